//! Kernel, local-linear weights and per-series kernel aggregates.
//!
//! For a location-scale point `(u, h)` and series length `T`, the weights are
//!
//! ```text
//! x_t        = (t/T - u) / h
//! S_l        = (T h)^-1 * sum_t K(x_t) x_t^l            (l = 1, 2)
//! Lambda_t   = K(x_t) * (S_2 - x_t S_1)
//! w_t        = Lambda_t / sqrt(sum_s Lambda_s^2)
//! ```
//!
//! so that `sum_t w_t^2 = 1`. Only the support window `|t/T - u| <= h` is
//! stored; weights outside it are zero.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::panel::{LocationScaleGrid, LocationScalePoint};

/// A kernel function with support `[-1, 1]`.
pub type KernelFn = fn(f64) -> f64;

/// Epanechnikov kernel `0.75 (1 - x^2)` on `[-1, 1]`.
pub fn epanechnikov(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        0.75 * (1.0 - x * x)
    } else {
        0.0
    }
}

/// Scale-dependent additive correction `sqrt(2 log(1 / (2h)))`.
pub fn lambda_correction(h: f64) -> Result<f64> {
    if !(h > 0.0 && h <= 0.5) {
        return Err(Error::Domain {
            name: "h",
            value: h,
            reason: "scale must lie in (0, 1/2]",
        });
    }
    Ok((2.0 * (1.0 / (2.0 * h)).ln()).max(0.0).sqrt())
}

/// Local-linear weights for one grid point, dense on the support window.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    point: LocationScalePoint,
    start_t: usize,
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn point(&self) -> LocationScalePoint {
        self.point
    }

    /// First time index (1-based) of the stored window.
    pub fn start_t(&self) -> usize {
        self.start_t
    }

    /// Last time index (1-based) of the stored window.
    pub fn end_t(&self) -> usize {
        self.start_t + self.weights.len() - 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at time `t` (1-based); zero outside the window.
    pub fn weight(&self, t: usize) -> f64 {
        if t < self.start_t {
            return 0.0;
        }
        self.weights.get(t - self.start_t).copied().unwrap_or(0.0)
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `sum_t w_t a_t` for a full-length sequence `a` (index 0 is `t = 1`).
    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        let window = &values[self.start_t - 1..self.start_t - 1 + self.weights.len()];
        dot(&self.weights, window)
    }
}

/// Dot product with four fixed accumulators; the summation order depends only
/// on the slice length.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: f64 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Inclusive 1-based window `{t : |t/T - u| <= h}` clipped to `1..=T`.
/// Returns `None` when empty.
pub(crate) fn support_window(len: usize, point: &LocationScalePoint) -> Option<(usize, usize)> {
    let n = len as f64;
    let lo = ((n * point.lower()) - 1e-9).ceil().max(1.0) as usize;
    let hi_f = ((n * point.upper()) + 1e-9).floor();
    if hi_f < 1.0 {
        return None;
    }
    let hi = (hi_f as usize).min(len);
    (lo <= hi).then_some((lo, hi))
}

/// Local-linear weights with the Epanechnikov kernel.
pub fn local_linear_weights(len: usize, point: LocationScalePoint) -> Result<WeightVector> {
    local_linear_weights_with(epanechnikov, len, point)
}

/// Local-linear weights with an arbitrary kernel supported on `[-1, 1]`.
pub fn local_linear_weights_with(
    kernel: KernelFn,
    len: usize,
    point: LocationScalePoint,
) -> Result<WeightVector> {
    let degenerate = || Error::DegenerateSupport {
        u: point.u(),
        h: point.h(),
        len,
    };
    let (lo, hi) = support_window(len, &point).ok_or_else(degenerate)?;
    let n = len as f64;
    let (u, h) = (point.u(), point.h());

    // Arguments within rounding of the support edge are snapped to +-1 so
    // that boundary points get exactly zero kernel mass.
    let xs: Vec<f64> = (lo..=hi)
        .map(|t| {
            let x = (t as f64 - n * u) / (n * h);
            if (x.abs() - 1.0).abs() < 1e-9 {
                x.signum()
            } else {
                x
            }
        })
        .collect();
    let ks: Vec<f64> = xs.iter().map(|&x| kernel(x)).collect();
    let th = n * h;
    let s1 = xs.iter().zip(&ks).map(|(x, k)| k * x).sum::<f64>() / th;
    let s2 = xs.iter().zip(&ks).map(|(x, k)| k * x * x).sum::<f64>() / th;

    let mut weights: Vec<f64> = xs.iter().zip(&ks).map(|(x, k)| k * (s2 - x * s1)).collect();
    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(degenerate());
    }
    weights.iter_mut().for_each(|w| *w /= norm);
    Ok(WeightVector {
        point,
        start_t: lo,
        weights,
    })
}

/// Precomputed weights and corrections for every point of a grid at a fixed
/// series length.
#[derive(Debug, Clone)]
pub struct WeightBank {
    len: usize,
    grid: LocationScaleGrid,
    weights: Vec<WeightVector>,
    lambdas: Vec<f64>,
}

impl WeightBank {
    pub fn new(len: usize, grid: &LocationScaleGrid) -> Result<Self> {
        let weights = grid
            .points()
            .iter()
            .map(|&p| local_linear_weights(len, p))
            .collect::<Result<Vec<_>>>()?;
        let lambdas = grid
            .points()
            .iter()
            .map(|p| lambda_correction(p.h()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            len,
            grid: grid.clone(),
            weights,
            lambdas,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn grid(&self) -> &LocationScaleGrid {
        &self.grid
    }

    pub fn weights(&self) -> &[WeightVector] {
        &self.weights
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Writes `sum_t w_t(u_k, h_k) a_t` for every grid point `k` into `out`.
    pub fn aggregate_into(&self, values: &[f64], out: &mut [f64]) {
        debug_assert_eq!(values.len(), self.len);
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o = w.apply(values);
        }
    }

    /// Single-threaded aggregation of every row of `values` (`n x T`).
    pub fn aggregate(&self, values: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((values.nrows(), self.weights.len()));
        for (row, mut dst) in values.rows().into_iter().zip(out.rows_mut()) {
            let row = row.to_vec();
            self.aggregate_into(&row, dst.as_slice_mut().expect("standard layout"));
        }
        out
    }

    /// Aggregation partitioned over grid points. Bitwise equal to
    /// [`Self::aggregate`].
    pub fn aggregate_par(&self, values: ArrayView2<'_, f64>) -> Array2<f64> {
        let rows: Vec<Vec<f64>> = values.rows().into_iter().map(|r| r.to_vec()).collect();
        let columns: Vec<Vec<f64>> = self
            .weights
            .par_iter()
            .map(|w| rows.iter().map(|r| w.apply(r)).collect())
            .collect();
        Array2::from_shape_fn((rows.len(), self.weights.len()), |(i, k)| columns[k][i])
    }
}

/// Kernel aggregates `sum_t w_t(u_k, h_k) a_it` for every series `i` and grid
/// point `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelAggregateTable {
    pub grid: LocationScaleGrid,
    /// `n x |grid|`.
    pub values: Array2<f64>,
}

/// Computes the aggregate table for an `n x T` matrix of per-series values.
pub fn aggregate_series(
    values: ArrayView2<'_, f64>,
    grid: &LocationScaleGrid,
) -> Result<KernelAggregateTable> {
    let bank = WeightBank::new(values.ncols(), grid)?;
    Ok(KernelAggregateTable {
        grid: grid.clone(),
        values: bank.aggregate_par(values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pt(u: f64, h: f64) -> LocationScalePoint {
        LocationScalePoint::new(u, h).unwrap()
    }

    #[test]
    fn epanechnikov_values() {
        assert_eq!(epanechnikov(0.0), 0.75);
        assert_eq!(epanechnikov(1.0), 0.0);
        assert_eq!(epanechnikov(-1.0), 0.0);
        assert_eq!(epanechnikov(0.5), 0.5625);
        assert_eq!(epanechnikov(1.5), 0.0);
        assert_eq!(epanechnikov(-0.3), epanechnikov(0.3));
    }

    // Hand evaluation: x = (-1, -.5, 0, .5, 1), K = (0, .5625, .75, .5625, 0),
    // S_1 = 0, so w is K / ||K|| = (0, .5625, .75, .5625, 0) / 1.093303...
    #[test]
    fn worked_weights_example() {
        let w = local_linear_weights(10, pt(0.5, 0.2)).unwrap();
        assert_eq!((w.start_t(), w.end_t()), (3, 7));
        let expected = [0.0, 0.51450, 0.68600, 0.51450, 0.0];
        for (got, want) in w.weights().iter().zip(expected) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-5);
        }
        let norm = (2.0f64 * 0.5625 * 0.5625 + 0.75 * 0.75).sqrt();
        assert_abs_diff_eq!(w.weight(5), 0.75 / norm, epsilon = 1e-15);
        assert_eq!(w.weight(3), w.weight(7));
        assert_eq!(w.weight(4), w.weight(6));
        assert_eq!(w.weight(2), 0.0);
        assert_eq!(w.weight(8), 0.0);
    }

    #[test]
    fn lambda_spot_values() {
        assert_eq!(lambda_correction(0.5).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(lambda_correction(1.0 / (2.0 * e)).unwrap(), 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(lambda_correction(0.05).unwrap(), 2.145966, epsilon = 1e-6);
        assert!(lambda_correction(0.0).is_err());
        assert!(lambda_correction(-0.1).is_err());
        assert!(lambda_correction(0.6).is_err());
    }

    #[test]
    fn degenerate_support() {
        // A single interior point with nonzero kernel mass gives S_2 = 0.
        let err = local_linear_weights(10, pt(0.5, 0.1)).unwrap_err();
        assert!(matches!(err, Error::DegenerateSupport { len: 10, .. }));
    }

    #[test]
    fn aggregate_zero_and_constant() {
        let grid = LocationScaleGrid::from_product(&[0.3, 0.5, 0.7], &[0.2, 0.25]).unwrap();
        let zeros = Array2::<f64>::zeros((3, 40));
        let table = aggregate_series(zeros.view(), &grid).unwrap();
        assert!(table.values.iter().all(|&v| v == 0.0));

        let c = 2.5;
        let consts = Array2::<f64>::from_elem((2, 40), c);
        let table = aggregate_series(consts.view(), &grid).unwrap();
        for (k, p) in grid.points().iter().enumerate() {
            let wsum = local_linear_weights(40, *p).unwrap().sum();
            for i in 0..2 {
                assert_abs_diff_eq!(table.values[[i, k]], c * wsum, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn parallel_and_serial_aggregation_are_bitwise_equal() {
        let grid = LocationScaleGrid::from_product(&[0.25, 0.5, 0.75], &[0.1, 0.2]).unwrap();
        let bank = WeightBank::new(64, &grid).unwrap();
        let values = Array2::from_shape_fn((4, 64), |(i, t)| ((i * 31 + t * 7) % 13) as f64 - 6.0);
        assert_eq!(bank.aggregate(values.view()), bank.aggregate_par(values.view()));
    }

    proptest! {
        #[test]
        fn weights_normalized_and_supported(len in 20usize..400, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let h = 0.02 + 0.46 * b;
            let u = h + (1.0 - 2.0 * h) * a;
            let p = pt(u, h);
            if let Ok(w) = local_linear_weights(len, p) {
                let ss: f64 = w.weights().iter().map(|v| v * v).sum();
                prop_assert!((ss - 1.0).abs() < 1e-12);
                for t in 1..=len {
                    if ((t as f64 / len as f64) - u).abs() > h + 1e-12 {
                        prop_assert_eq!(w.weight(t), 0.0);
                    }
                }
            }
        }

        #[test]
        fn aggregation_is_linear(
            a in proptest::collection::vec(-5.0f64..5.0, 60),
            b in proptest::collection::vec(-5.0f64..5.0, 60),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let grid = LocationScaleGrid::from_product(&[0.3, 0.5, 0.7], &[0.1, 0.25]).unwrap();
            let ma = Array2::from_shape_vec((2, 30), a).unwrap();
            let mb = Array2::from_shape_vec((2, 30), b).unwrap();
            let combo = &ma * alpha + &mb * beta;
            let ta = aggregate_series(ma.view(), &grid).unwrap().values;
            let tb = aggregate_series(mb.view(), &grid).unwrap().values;
            let tc = aggregate_series(combo.view(), &grid).unwrap().values;
            for ((c, x), y) in tc.iter().zip(ta.iter()).zip(tb.iter()) {
                prop_assert!((c - (alpha * x + beta * y)).abs() < 1e-10);
            }
        }
    }
}
