//! Nuisance-parameter estimation: slope coefficients from first differences,
//! fixed effects, augmented series and long-run error variances.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::epanechnikov;
use crate::panel::{PanelDataset, Series};

/// Reciprocal condition number below which the differenced Gram matrix is
/// treated as singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

/// Long-run variance estimates at or below this fraction of the series'
/// second moment are reported as degenerate.
const DEGENERATE_VARIANCE_RATIO: f64 = 1e-20;

/// How the long-run error variance of each series is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum LrvConfig {
    /// Block-difference subseries estimator. `block_len` defaults to
    /// `floor(T^(1/3))`.
    Subseries { block_len: Option<usize> },
    /// Yule-Walker AR(`order`) fit to residuals of a local-linear pilot fit
    /// with the given bandwidth.
    ArPlugin { order: usize, pilot_bandwidth: f64 },
}

impl Default for LrvConfig {
    fn default() -> Self {
        LrvConfig::Subseries { block_len: None }
    }
}

impl LrvConfig {
    pub const DEFAULT_PILOT_BANDWIDTH: f64 = 0.1;

    pub fn ar(order: usize) -> Self {
        LrvConfig::ArPlugin {
            order,
            pilot_bandwidth: Self::DEFAULT_PILOT_BANDWIDTH,
        }
    }

    /// Subseries length used for series of length `len`.
    pub fn block_len_for(&self, len: usize) -> Option<usize> {
        match *self {
            LrvConfig::Subseries { block_len } => Some(block_len.unwrap_or_else(|| floor_cbrt(len))),
            LrvConfig::ArPlugin { .. } => None,
        }
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        match *self {
            LrvConfig::Subseries { .. } => {
                let s = self.block_len_for(len).unwrap_or(0);
                if s < 2 || len / s < 2 {
                    return Err(Error::Config(format!(
                        "subseries length {s} invalid for T={len} (need s >= 2 and T/s >= 2)"
                    )));
                }
            }
            LrvConfig::ArPlugin {
                order,
                pilot_bandwidth,
            } => {
                if order < 1 {
                    return Err(Error::Config("AR order must be at least 1".into()));
                }
                if !(pilot_bandwidth > 0.0 && pilot_bandwidth < 0.5) {
                    return Err(Error::Config(format!(
                        "pilot bandwidth {pilot_bandwidth} not in (0, 1/2)"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Largest integer `s` with `s^3 <= n`.
pub fn floor_cbrt(n: usize) -> usize {
    let mut s = (n as f64).cbrt().round() as usize;
    while s > 0 && s * s * s > n {
        s -= 1;
    }
    while (s + 1) * (s + 1) * (s + 1) <= n {
        s += 1;
    }
    s
}

/// Least squares on first differences:
/// `(sum_t dX dX')^-1 sum_t dX dY` over `t = 2..=T`.
///
/// Returns an empty vector when the series has no covariates.
pub fn estimate_beta(series: &Series) -> Result<Vec<f64>> {
    let d = series.dim();
    if d == 0 {
        return Ok(Vec::new());
    }
    let y = series.y();
    let x = series.x();
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    let mut dx = vec![0.0; d];
    for t in 1..series.len() {
        for (k, v) in dx.iter_mut().enumerate() {
            *v = x[[t, k]] - x[[t - 1, k]];
        }
        let dy = y[t] - y[t - 1];
        for a in 0..d {
            rhs[a] += dx[a] * dy;
            for b in 0..d {
                gram[(a, b)] += dx[a] * dx[b];
            }
        }
    }

    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let rcond = if max > 0.0 { min / max } else { 0.0 };
    if !(rcond >= SINGULAR_RCOND) {
        return Err(Error::SingularDesign {
            id: series.id().to_owned(),
            rcond,
        });
    }
    let solution = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularDesign {
            id: series.id().to_owned(),
            rcond,
        })?;
    Ok(solution.iter().copied().collect())
}

/// `Y_t - beta' X_t` for every `t`.
fn detrended(y: &[f64], x: ArrayView2<'_, f64>, beta: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(x.rows())
        .map(|(yt, xt)| yt - xt.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

/// Fixed-effect estimate `T^-1 sum_t (Y_t - beta' X_t)`.
pub fn estimate_alpha(series: &Series, beta: &[f64]) -> f64 {
    let r = detrended(series.y(), series.x().view(), beta);
    r.iter().sum::<f64>() / r.len() as f64
}

/// Subseries long-run variance estimator built from differences of adjacent
/// blocks of length `block_len`.
///
/// Only block pairs that lie entirely inside `1..=T` enter the sum; with
/// `M = floor(T / s)` there are `M - 1` of them, and the result is their
/// mean squared block difference divided by `2 s`.
pub fn lrv_subseries(y: &[f64], x: ArrayView2<'_, f64>, beta: &[f64], block_len: usize) -> Result<f64> {
    let len = y.len();
    let s = block_len;
    if s == 0 || len / s < 2 {
        return Err(Error::Config(format!(
            "subseries length {s} leaves fewer than 2 blocks for T={len}"
        )));
    }
    let blocks = len / s;
    let r = detrended(y, x, beta);
    let pairs = (1..blocks).filter(|m| (m + 1) * s <= len);
    let mut total = 0.0;
    let mut used = 0usize;
    for m in pairs {
        let diff: f64 = (0..s).map(|t| r[t + m * s] - r[t + (m - 1) * s]).sum();
        total += diff * diff;
        used += 1;
    }
    Ok(total / (2.0 * used as f64 * s as f64))
}

/// AR(`order`) plug-in long-run variance `sigma_eta^2 / (1 - sum a_k)^2` from a
/// Yule-Walker fit. Constant residuals give 0.
pub fn lrv_ar_plugin(residuals: &[f64], order: usize) -> Result<f64> {
    let len = residuals.len();
    if order == 0 || len <= 10 * order {
        return Err(Error::Config(format!(
            "AR order {order} needs more than {} observations, got {len}",
            10 * order
        )));
    }
    let mean = residuals.iter().sum::<f64>() / len as f64;
    let centered: Vec<f64> = residuals.iter().map(|r| r - mean).collect();
    let acov: Vec<f64> = (0..=order)
        .map(|k| {
            centered[..len - k]
                .iter()
                .zip(&centered[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / len as f64
        })
        .collect();
    if acov[0] <= 0.0 {
        return Ok(0.0);
    }
    let toeplitz = DMatrix::from_fn(order, order, |i, j| acov[i.abs_diff(j)]);
    let rhs = DVector::from_iterator(order, acov[1..].iter().copied());
    let coef = toeplitz
        .lu()
        .solve(&rhs)
        .ok_or(Error::NonstationaryFit { sum: f64::NAN })?;
    let sum: f64 = coef.iter().sum();
    if !(sum.abs() < 1.0 - 1e-6) {
        return Err(Error::NonstationaryFit { sum });
    }
    let innovation = acov[0] - coef.iter().zip(&acov[1..]).map(|(a, g)| a * g).sum::<f64>();
    Ok(innovation / ((1.0 - sum) * (1.0 - sum)))
}

/// Local-linear regression of `y` on rescaled time `t/T`, evaluated at every
/// `t/T`, with the Epanechnikov kernel and the given bandwidth.
pub fn local_linear_fit(y: &[f64], bandwidth: f64) -> Result<Vec<f64>> {
    if !(bandwidth > 0.0 && bandwidth < 1.0) {
        return Err(Error::Domain {
            name: "bandwidth",
            value: bandwidth,
            reason: "must lie in (0, 1)",
        });
    }
    let len = y.len();
    let n = len as f64;
    let reach = (bandwidth * n + 1e-9).floor() as usize;
    (1..=len)
        .map(|t0| {
            let u = t0 as f64 / n;
            let lo = t0.saturating_sub(reach).max(1);
            let hi = (t0 + reach).min(len);
            let (mut s0, mut s1, mut s2, mut m0, mut m1) = (0.0, 0.0, 0.0, 0.0, 0.0);
            let mut support = 0;
            for t in lo..=hi {
                let x = (t as f64 / n - u) / bandwidth;
                let k = epanechnikov(x);
                if k > 0.0 {
                    support += 1;
                }
                s0 += k;
                s1 += k * x;
                s2 += k * x * x;
                m0 += k * y[t - 1];
                m1 += k * x * y[t - 1];
            }
            let det = s0 * s2 - s1 * s1;
            if support < 2 || !(det > 1e-12 * s0 * s2) {
                return Err(Error::DegenerateSupport {
                    u,
                    h: bandwidth,
                    len,
                });
            }
            Ok((s2 * m0 - s1 * m1) / det)
        })
        .collect()
}

/// Estimated nuisance parameters and augmented observations for every series.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPanel {
    ids: Vec<String>,
    /// `n x d`
    beta: Array2<f64>,
    alpha: Vec<f64>,
    sigma2: Vec<f64>,
    /// `n x T`, `Y_it - alpha_i - beta_i' X_it`.
    y_aug: Array2<f64>,
}

impl AugmentedPanel {
    /// Assembles an augmented panel from precomputed parts. Fixed effects are
    /// set to zero and there are no covariates.
    pub fn from_parts(ids: Vec<String>, y_aug: Array2<f64>, sigma2: Vec<f64>) -> Result<Self> {
        let n = y_aug.nrows();
        if ids.len() != n || sigma2.len() != n {
            return Err(Error::Config("ids, rows and variances must have equal length".into()));
        }
        if n < 2 {
            return Err(Error::TooFewSeries(n));
        }
        if let Some(i) = sigma2.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::DegenerateVariance {
                id: ids[i].clone(),
                value: sigma2[i],
            });
        }
        Ok(Self {
            ids,
            beta: Array2::zeros((n, 0)),
            alpha: vec![0.0; n],
            sigma2,
            y_aug,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn n(&self) -> usize {
        self.y_aug.nrows()
    }

    pub fn len(&self) -> usize {
        self.y_aug.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.y_aug.is_empty()
    }

    pub fn beta(&self) -> &Array2<f64> {
        &self.beta
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn y_aug(&self) -> &Array2<f64> {
        &self.y_aug
    }

    /// `(min, max)` of the estimated long-run variances.
    pub fn sigma2_range(&self) -> (f64, f64) {
        self.sigma2
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)))
    }
}

/// Runs the per-series estimation pipeline: slope, fixed effect, augmented
/// series, long-run variance.
pub fn augment_panel(panel: &PanelDataset, lrv: LrvConfig) -> Result<AugmentedPanel> {
    let len = panel.len();
    lrv.validate(len)?;
    let n = panel.n();
    let d = panel.dim();
    let mut beta = Array2::zeros((n, d));
    let mut alpha = Vec::with_capacity(n);
    let mut sigma2 = Vec::with_capacity(n);
    let mut y_aug = Array2::zeros((n, len));

    for (i, series) in panel.series().iter().enumerate() {
        let b = estimate_beta(series)?;
        let a = estimate_alpha(series, &b);
        let resid = detrended(series.y(), series.x().view(), &b);
        for (dst, r) in y_aug.row_mut(i).iter_mut().zip(&resid) {
            *dst = r - a;
        }
        let s2 = match lrv {
            LrvConfig::Subseries { .. } => {
                let s = lrv.block_len_for(len).expect("subseries");
                lrv_subseries(series.y(), series.x().view(), &b, s)?
            }
            LrvConfig::ArPlugin {
                order,
                pilot_bandwidth,
            } => {
                let row: Vec<f64> = y_aug.row(i).to_vec();
                let fit = local_linear_fit(&row, pilot_bandwidth)?;
                let res: Vec<f64> = row.iter().zip(&fit).map(|(y, f)| y - f).collect();
                lrv_ar_plugin(&res, order)?
            }
        };
        let second_moment = series.y().iter().map(|v| v * v).sum::<f64>() / len as f64;
        if !(s2.is_finite() && s2 > DEGENERATE_VARIANCE_RATIO * second_moment && s2 > 0.0) {
            return Err(Error::DegenerateVariance {
                id: series.id().to_owned(),
                value: s2,
            });
        }
        for (k, v) in b.iter().enumerate() {
            beta[[i, k]] = *v;
        }
        alpha.push(a);
        sigma2.push(s2);
    }

    Ok(AugmentedPanel {
        ids: panel.ids(),
        beta,
        alpha,
        sigma2,
        y_aug,
    })
}
