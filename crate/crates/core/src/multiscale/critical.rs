//! Monte-Carlo critical values from the Gaussian version of the multiscale
//! statistic.
//!
//! Under equal long-run variances each draw is
//!
//! ```text
//! max_{i<j} max_k  |sum_t w_t(u_k,h_k) ((Z_it - Zbar_i) - (Z_jt - Zbar_j))| / sqrt(2) - lambda(h_k)
//! ```
//!
//! with `Z_it` iid standard normal, so the quantiles depend only on
//! `(n, T, grid)` and can be computed once and reused.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::WeightBank;
use crate::panel::LocationScaleGrid;
use crate::rng;

/// Smallest Monte-Carlo sample accepted for a critical value.
pub const MIN_MC_DRAWS: usize = 100;

/// An estimated `(1 - alpha)` quantile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub alpha: f64,
    pub q: f64,
    pub mc_draws: usize,
    pub seed: u64,
}

/// Reusable buffers for repeated Gaussian draws on a fixed weight bank.
pub struct GaussianDrawer<'a> {
    bank: &'a WeightBank,
    n: usize,
    z: Vec<f64>,
    agg: Vec<f64>,
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl<'a> GaussianDrawer<'a> {
    pub fn new(n: usize, bank: &'a WeightBank) -> Self {
        let g = bank.weights().len();
        Self {
            bank,
            n,
            z: vec![0.0; bank.len()],
            agg: vec![0.0; g],
            hi: vec![0.0; g],
            lo: vec![0.0; g],
        }
    }

    /// One value of the Gaussian statistic. Consumes `n * T` normals from
    /// `rng`, series by series.
    ///
    /// For each grid point the maximum over pairs of `|s_i - s_j|` equals
    /// `max_i s_i - min_i s_i`, so only per-series aggregates are needed.
    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        self.hi.fill(f64::NEG_INFINITY);
        self.lo.fill(f64::INFINITY);
        for _ in 0..self.n {
            for z in self.z.iter_mut() {
                *z = rng.sample(StandardNormal);
            }
            let mean = self.z.iter().sum::<f64>() / self.z.len() as f64;
            self.z.iter_mut().for_each(|z| *z -= mean);
            self.bank.aggregate_into(&self.z, &mut self.agg);
            for ((a, hi), lo) in self.agg.iter().zip(self.hi.iter_mut()).zip(self.lo.iter_mut()) {
                *hi = hi.max(*a);
                *lo = lo.min(*a);
            }
        }
        self.hi
            .iter()
            .zip(&self.lo)
            .zip(self.bank.lambdas())
            .map(|((hi, lo), lambda)| (hi - lo) / std::f64::consts::SQRT_2 - lambda)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One draw of the Gaussian statistic for `n` series of length `len`.
pub fn gaussian_statistic_draw<R: Rng + ?Sized>(
    n: usize,
    len: usize,
    grid: &LocationScaleGrid,
    rng: &mut R,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::TooFewSeries(n));
    }
    let bank = WeightBank::new(len, grid)?;
    Ok(GaussianDrawer::new(n, &bank).draw(rng))
}

/// Sorted Monte-Carlo sample of the Gaussian statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNull {
    pub n: usize,
    pub len: usize,
    pub mc_draws: usize,
    pub seed: u64,
    draws: Vec<f64>,
}

impl GaussianNull {
    /// Simulates `mc_draws` values; draw `l` uses stream `l` under key `seed`,
    /// so the sample is identical for any number of worker threads.
    pub fn simulate(n: usize, bank: &WeightBank, mc_draws: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewSeries(n));
        }
        if mc_draws < MIN_MC_DRAWS {
            return Err(Error::Config(format!(
                "need at least {MIN_MC_DRAWS} Monte-Carlo draws, got {mc_draws}"
            )));
        }
        let mut draws: Vec<f64> = (0..mc_draws as u64)
            .into_par_iter()
            .map_init(
                || GaussianDrawer::new(n, bank),
                |drawer, l| drawer.draw(&mut rng::stream(seed, l)),
            )
            .collect();
        draws.sort_by(f64::total_cmp);
        Ok(Self {
            n,
            len: bank.len(),
            mc_draws,
            seed,
            draws,
        })
    }

    /// Rebuilds from stored draws (e.g. a cache file); the draws are sorted.
    pub fn from_draws(n: usize, len: usize, seed: u64, mut draws: Vec<f64>) -> Result<Self> {
        if draws.len() < MIN_MC_DRAWS || draws.iter().any(|d| !d.is_finite()) {
            return Err(Error::Config("stored Gaussian draws are invalid".into()));
        }
        draws.sort_by(f64::total_cmp);
        Ok(Self {
            n,
            len,
            mc_draws: draws.len(),
            seed,
            draws,
        })
    }

    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    /// The `ceil((1 - alpha) L)`-th order statistic.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain {
                name: "alpha",
                value: alpha,
                reason: "must lie in (0, 1)",
            });
        }
        let l = self.draws.len();
        let rank = (((1.0 - alpha) * l as f64) - 1e-9).ceil().clamp(1.0, l as f64) as usize;
        Ok(self.draws[rank - 1])
    }

    pub fn critical_value(&self, alpha: f64) -> Result<CriticalValue> {
        Ok(CriticalValue {
            alpha,
            q: self.quantile(alpha)?,
            mc_draws: self.mc_draws,
            seed: self.seed,
        })
    }
}

/// Critical value at level `alpha` from `mc_draws` Gaussian draws.
pub fn critical_value(
    n: usize,
    len: usize,
    grid: &LocationScaleGrid,
    alpha: f64,
    mc_draws: usize,
    seed: u64,
) -> Result<CriticalValue> {
    let bank = WeightBank::new(len, grid)?;
    GaussianNull::simulate(n, &bank, mc_draws, seed)?.critical_value(alpha)
}
