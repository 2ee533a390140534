use ndarray::Array2;

use crate::error::{Error, Result};
use crate::estimation::AugmentedPanel;
use crate::kernel::WeightBank;
use crate::panel::LocationScaleGrid;

/// Position of the unordered pair `{i, j}` (`i != j`) in the lexicographic
/// enumeration of `{(i, j) : i < j < n}`.
pub fn pair_index(i: usize, j: usize, n: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    debug_assert!(j < n && i != j);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// All pairs `(i, j)` with `i < j < n`, lexicographically.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// A symmetric table indexed by unordered pairs of series.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMaxima {
    n: usize,
    values: Vec<f64>,
}

impl PairMaxima {
    /// `values` in the order of [`pairs`].
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::Config(format!(
                "{} pair values given for n = {n}",
                values.len()
            )));
        }
        Ok(Self { n, values })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let values = pairs(n).map(|(i, j)| f(i, j)).collect();
        Self { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[pair_index(i, j, self.n)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Corrected pairwise statistics on every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PairStatistics {
    grid: LocationScaleGrid,
    n: usize,
    /// `n(n-1)/2 x |grid|`, rows in [`pairs`] order.
    psi0: Array2<f64>,
    psi_max: PairMaxima,
}

impl PairStatistics {
    pub fn grid(&self) -> &LocationScaleGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn psi0(&self) -> &Array2<f64> {
        &self.psi0
    }

    /// Row of corrected statistics for the pair `{i, j}`.
    pub fn pair_row(&self, i: usize, j: usize) -> ndarray::ArrayView1<'_, f64> {
        self.psi0.row(pair_index(i, j, self.n))
    }

    pub fn psi_max(&self) -> &PairMaxima {
        &self.psi_max
    }

    /// Overall multiscale statistic: maximum over pairs and grid points.
    pub fn global_max(&self) -> f64 {
        self.psi_max.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Computes `|psi_ij(u,h)| / sqrt(s_i^2 + s_j^2) - lambda(h)` for every pair and
/// grid point, where `psi_ij = sum_t w_t (Y_it - Y_jt)` is obtained as the
/// difference of per-series kernel aggregates.
pub fn pair_statistics(aug: &AugmentedPanel, grid: &LocationScaleGrid) -> Result<PairStatistics> {
    let bank = WeightBank::new(aug.len(), grid)?;
    Ok(pair_statistics_with(aug, &bank))
}

/// As [`pair_statistics`], reusing precomputed weights.
pub fn pair_statistics_with(aug: &AugmentedPanel, bank: &WeightBank) -> PairStatistics {
    let n = aug.n();
    let agg = bank.aggregate(aug.y_aug().view());
    let lambdas = bank.lambdas();
    let sigma2 = aug.sigma2();
    let g = lambdas.len();
    let mut psi0 = Array2::zeros((n * (n - 1) / 2, g));
    let mut maxima = Vec::with_capacity(n * (n - 1) / 2);
    for (row, (i, j)) in pairs(n).enumerate() {
        let scale = (sigma2[i] + sigma2[j]).sqrt();
        let (si, sj) = (agg.row(i), agg.row(j));
        let mut best = f64::NEG_INFINITY;
        for k in 0..g {
            let v = (si[k] - sj[k]).abs() / scale - lambdas[k];
            psi0[[row, k]] = v;
            best = best.max(v);
        }
        maxima.push(best);
    }
    PairStatistics {
        grid: bank.grid().clone(),
        n,
        psi0,
        psi_max: PairMaxima { n, values: maxima },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_enumeration_matches_index() {
        for n in 2..8 {
            for (k, (i, j)) in pairs(n).enumerate() {
                assert_eq!(pair_index(i, j, n), k);
                assert_eq!(pair_index(j, i, n), k);
            }
        }
    }

    #[test]
    fn pair_table_is_symmetric() {
        let t = PairMaxima::from_fn(4, |i, j| (10 * i + j) as f64);
        assert_eq!(t.get(1, 3), 13.0);
        assert_eq!(t.get(3, 1), 13.0);
        assert!(PairMaxima::new(4, vec![0.0; 5]).is_err());
    }
}
