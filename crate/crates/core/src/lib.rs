//! Multiscale comparison of nonparametric trends across a panel of time
//! series.
//!
//! The pipeline: [`estimation::augment_panel`] removes covariate effects and
//! fixed effects and estimates long-run variances;
//! [`multiscale::PreparedTest`] computes the pairwise corrected statistics on a
//! location-scale grid and, given a Gaussian critical value, the rejection
//! intervals for every pair; [`clustering`] groups series whose trends are
//! not distinguishable; [`simulation`] generates synthetic panels and runs
//! the size, power and clustering experiments.

// `!(x < bound)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod error;
pub mod estimation;
pub mod kernel;
pub mod multiscale;
pub mod panel;
pub mod rng;
pub mod simulation;

pub use clustering::{ClusterTree, GroupStructure, Merge, Partition};
pub use error::{Error, Result};
pub use estimation::{augment_panel, AugmentedPanel, LrvConfig};
pub use kernel::{KernelAggregateTable, WeightBank, WeightVector};
pub use multiscale::{
    build_grid, run_test, CriticalValue, GridPreset, GridSpec, PairReport, PairStatistics, PreparedTest,
    TestReport,
};
pub use panel::{validate_panel, LocationScaleGrid, LocationScalePoint, PanelDataset, Series};
pub use simulation::{DgpConfig, ExperimentConfig, ExperimentResult, Scenario};
