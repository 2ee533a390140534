//! The multiscale test: pairwise statistics, Gaussian critical values, and
//! FWER-controlled sets of intervals where two trends differ.
//!
//! A local null `m_i = m_j on [u - h, u + h]` is rejected when the corrected
//! statistic `psi0_ij(u, h)` strictly exceeds the critical value `q`; the
//! global null is rejected when any local null is.

mod critical;
mod grid;
mod stats;

pub use critical::{
    critical_value, gaussian_statistic_draw, CriticalValue, GaussianDrawer, GaussianNull, MIN_MC_DRAWS,
};
pub use grid::{build_grid, GridPreset, GridSpec};
pub use stats::{pair_index, pair_statistics, pair_statistics_with, pairs, PairMaxima, PairStatistics};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimation::{augment_panel, AugmentedPanel, LrvConfig};
use crate::kernel::WeightBank;
use crate::panel::{LocationScaleGrid, LocationScalePoint, PanelDataset};

/// Members of `set` that contain no other member as a strict subset.
/// Input order is preserved.
pub fn minimal_intervals(set: &[LocationScalePoint]) -> Vec<LocationScalePoint> {
    set.iter()
        .filter(|candidate| !set.iter().any(|other| other.is_strict_subset_of(candidate)))
        .copied()
        .collect()
}

/// Rejection sets for one pair of series.
#[derive(Debug, Clone, PartialEq)]
pub struct PairReport {
    pub i: usize,
    pub j: usize,
    /// Maximum corrected statistic over the grid.
    pub psi_max: f64,
    /// Grid points with `psi0 > q`, in grid order.
    pub rejected: Vec<LocationScalePoint>,
    pub minimal: Vec<LocationScalePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub sigma2_min: f64,
    pub sigma2_max: f64,
    pub grid_size: usize,
    pub grid_dropped: usize,
    pub h_min: f64,
    pub h_max: f64,
}

/// Outcome of the test at one significance level.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    /// Number of series.
    pub n: usize,
    pub alpha: f64,
    pub critical_value: CriticalValue,
    /// Overall multiscale statistic.
    pub statistic: f64,
    pub global_reject: bool,
    /// One entry per pair `i < j`, lexicographic.
    pub pairs: Vec<PairReport>,
    pub diagnostics: Diagnostics,
}

impl TestReport {
    pub fn pair(&self, i: usize, j: usize) -> &PairReport {
        &self.pairs[pair_index(i, j, self.n)]
    }
}

/// Data-dependent part of the test, independent of the significance level.
#[derive(Debug, Clone)]
pub struct PreparedTest {
    augmented: AugmentedPanel,
    bank: WeightBank,
    statistics: PairStatistics,
}

impl PreparedTest {
    pub fn new(panel: &PanelDataset, grid: &LocationScaleGrid, lrv: LrvConfig) -> Result<Self> {
        let augmented = augment_panel(panel, lrv)?;
        let bank = WeightBank::new(panel.len(), grid)?;
        Ok(Self::from_augmented(augmented, bank))
    }

    pub fn from_augmented(augmented: AugmentedPanel, bank: WeightBank) -> Self {
        let statistics = pair_statistics_with(&augmented, &bank);
        Self {
            augmented,
            bank,
            statistics,
        }
    }

    pub fn augmented(&self) -> &AugmentedPanel {
        &self.augmented
    }

    pub fn statistics(&self) -> &PairStatistics {
        &self.statistics
    }

    pub fn bank(&self) -> &WeightBank {
        &self.bank
    }

    pub fn null_distribution(&self, mc_draws: usize, seed: u64) -> Result<GaussianNull> {
        GaussianNull::simulate(self.augmented.n(), &self.bank, mc_draws, seed)
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let (sigma2_min, sigma2_max) = self.augmented.sigma2_range();
        let grid = self.bank.grid();
        Diagnostics {
            sigma2_min,
            sigma2_max,
            grid_size: grid.len(),
            grid_dropped: grid.dropped(),
            h_min: grid.h_min(),
            h_max: grid.h_max(),
        }
    }

    /// Applies a critical value: local rejections, minimal intervals and the
    /// global decision.
    pub fn report(&self, critical_value: CriticalValue) -> TestReport {
        let q = critical_value.q;
        let stats = &self.statistics;
        let points = stats.grid().points();
        let n = stats.n();
        let pair_reports: Vec<PairReport> = pairs(n)
            .map(|(i, j)| {
                let rejected: Vec<LocationScalePoint> = stats
                    .pair_row(i, j)
                    .iter()
                    .zip(points)
                    .filter(|(v, _)| **v > q)
                    .map(|(_, p)| *p)
                    .collect();
                let minimal = minimal_intervals(&rejected);
                PairReport {
                    i,
                    j,
                    psi_max: stats.psi_max().get(i, j),
                    rejected,
                    minimal,
                }
            })
            .collect();
        let statistic = stats.global_max();
        TestReport {
            n,
            alpha: critical_value.alpha,
            critical_value,
            statistic,
            global_reject: statistic > q,
            pairs: pair_reports,
            diagnostics: self.diagnostics(),
        }
    }
}

/// Full pipeline at one level: estimation, statistics, Monte-Carlo critical
/// value with `mc_draws` draws under `seed`, and rejection sets.
pub fn run_test(
    panel: &PanelDataset,
    grid: &LocationScaleGrid,
    alpha: f64,
    lrv: LrvConfig,
    mc_draws: usize,
    seed: u64,
) -> Result<TestReport> {
    let prepared = PreparedTest::new(panel, grid, lrv)?;
    let cv = prepared.null_distribution(mc_draws, seed)?.critical_value(alpha)?;
    Ok(prepared.report(cv))
}
