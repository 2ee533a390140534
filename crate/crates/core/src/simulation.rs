//! Synthetic panels and the size, power and clustering experiments.
//!
//! Every replicate draws from its own random stream, addressed by the master
//! seed, an experiment tag and the replicate index, so results are
//! bit-reproducible for any number of worker threads. Power experiments use
//! the same streams for every trend slope, which pairs the replicates.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{classification_errors, estimate_num_groups, hac_tree, partition_at, Partition};
use crate::error::{Error, Result};
use crate::estimation::{augment_panel, LrvConfig};
use crate::kernel::WeightBank;
use crate::multiscale::{build_grid, pair_statistics_with, GaussianNull, GridPreset, GridSpec};
use crate::panel::{validate_panel, PanelDataset, Series};
use crate::rng::{derive_key, stream};

pub const DEFAULT_REPLICATES: usize = 1000;
pub const DEFAULT_CLUSTERING_REPLICATES: usize = 500;
pub const PAPER_REPLICATES: usize = 5000;
pub const DEFAULT_MC_DRAWS: usize = 2000;
pub const MIN_REPLICATES: usize = 100;

/// Trend configuration of the simulated panel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// All trends are zero.
    Null,
    /// The first series has trend `b (u - 1/2)`, all others zero.
    Power { b: f64 },
    /// Fifteen series in three blocks of five with trends `0`, `u - 1/2` and
    /// `-(u - 1/2)`.
    Clusters3,
}

impl Scenario {
    /// Trend of series `i` (0-based) at rescaled time `u`.
    pub fn trend(&self, i: usize, u: f64) -> f64 {
        match *self {
            Scenario::Null => 0.0,
            Scenario::Power { b } => {
                if i == 0 {
                    b * (u - 0.5)
                } else {
                    0.0
                }
            }
            Scenario::Clusters3 => match i / 5 {
                0 => 0.0,
                1 => u - 0.5,
                _ => -(u - 0.5),
            },
        }
    }
}

/// Data-generating process: `Y_it = m_i(t/T) + beta X_it + eps_it` with AR(1)
/// errors and, when `d = 1`, one AR(1) covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n: usize,
    pub len: usize,
    pub d: usize,
    pub err_ar: f64,
    pub err_innov_sd: f64,
    pub cov_ar: f64,
    pub cov_innov_sd: f64,
    pub beta: f64,
    pub scenario: Scenario,
}

impl DgpConfig {
    pub fn new(n: usize, len: usize, scenario: Scenario) -> Self {
        Self {
            n,
            len,
            d: 1,
            err_ar: 0.25,
            err_innov_sd: 0.5,
            cov_ar: 0.5,
            cov_innov_sd: 1.0,
            beta: 1.0,
            scenario,
        }
        .effective()
    }

    /// The clustering scenario always has 15 series and no covariates.
    pub fn effective(mut self) -> Self {
        if self.scenario == Scenario::Clusters3 {
            self.n = 15;
            self.d = 0;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooFewSeries(self.n));
        }
        if self.d > 1 {
            return Err(Error::Range {
                what: "covariate dimension",
                value: self.d,
                range: "0..=1".into(),
            });
        }
        if self.len < 2 {
            return Err(Error::TooShort { min: 2, found: self.len });
        }
        for (name, a) in [("err_ar", self.err_ar), ("cov_ar", self.cov_ar)] {
            if !(a.abs() < 1.0) {
                return Err(Error::Domain {
                    name,
                    value: a,
                    reason: "AR coefficient must satisfy |a| < 1",
                });
            }
        }
        for (name, sd) in [("err_innov_sd", self.err_innov_sd), ("cov_innov_sd", self.cov_innov_sd)] {
            if !(sd > 0.0 && sd.is_finite()) {
                return Err(Error::Domain {
                    name,
                    value: sd,
                    reason: "standard deviation must be positive",
                });
            }
        }
        if let Scenario::Power { b } = self.scenario {
            if !b.is_finite() {
                return Err(Error::Domain {
                    name: "b",
                    value: b,
                    reason: "must be finite",
                });
            }
        }
        Ok(())
    }

    /// True group structure, if the scenario has one.
    pub fn truth(&self) -> Option<Partition> {
        (self.scenario == Scenario::Clusters3).then(|| Partition::blocks(&[5, 5, 5]))
    }
}

/// Stationary AR(1) path `x_t = a x_{t-1} + eta_t`, `eta_t ~ N(0, sd^2)`, with
/// `x_1` drawn from the stationary law `N(0, sd^2 / (1 - a^2))`.
pub fn simulate_ar1<R: Rng + ?Sized>(len: usize, a: f64, innov_sd: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(a.abs() < 1.0) {
        return Err(Error::Domain {
            name: "a",
            value: a,
            reason: "AR coefficient must satisfy |a| < 1",
        });
    }
    let mut path = Vec::with_capacity(len);
    if len == 0 {
        return Ok(path);
    }
    let z: f64 = rng.sample(StandardNormal);
    let mut x = z * innov_sd / (1.0 - a * a).sqrt();
    path.push(x);
    for _ in 1..len {
        let z: f64 = rng.sample(StandardNormal);
        x = a * x + innov_sd * z;
        path.push(x);
    }
    Ok(path)
}

/// Draws one panel. Series are generated in order; for each series the
/// error path is drawn before the covariate path. Fixed effects are zero.
pub fn generate_panel<R: Rng + ?Sized>(cfg: &DgpConfig, rng: &mut R) -> Result<PanelDataset> {
    let cfg = cfg.effective();
    cfg.validate()?;
    let len = cfg.len;
    let mut series = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let eps = simulate_ar1(len, cfg.err_ar, cfg.err_innov_sd, rng)?;
        let cov = if cfg.d == 1 {
            simulate_ar1(len, cfg.cov_ar, cfg.cov_innov_sd, rng)?
        } else {
            Vec::new()
        };
        let y: Vec<f64> = (0..len)
            .map(|t| {
                let u = (t + 1) as f64 / len as f64;
                let x_part = if cfg.d == 1 { cfg.beta * cov[t] } else { 0.0 };
                cfg.scenario.trend(i, u) + x_part + eps[t]
            })
            .collect();
        let x = Array2::from_shape_vec((len, cfg.d), cov).expect("covariate shape");
        series.push(Series::new(format!("s{}", i + 1), y, x));
    }
    validate_panel(series)
}

/// Settings shared by all experiments. `dgp.len` and `dgp.scenario` are
/// overwritten per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub lens: Vec<usize>,
    pub alphas: Vec<f64>,
    pub replicates: usize,
    pub mc_draws: usize,
    pub seed: u64,
    pub lrv: LrvConfig,
    pub grid: GridSpec,
    pub dgp: DgpConfig,
}

impl ExperimentConfig {
    /// Fifteen series with one covariate, subseries long-run variance, the
    /// simulation grid and the desk-scale replicate count.
    pub fn new(lens: Vec<usize>, alphas: Vec<f64>) -> Self {
        let len = lens.first().copied().unwrap_or(100);
        Self {
            lens,
            alphas,
            replicates: DEFAULT_REPLICATES,
            mc_draws: DEFAULT_MC_DRAWS,
            seed: 0,
            lrv: LrvConfig::default(),
            grid: GridPreset::SimS6.into(),
            dgp: DgpConfig::new(15, len, Scenario::Null),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.lens.is_empty() || self.alphas.is_empty() {
            return Err(Error::Config("at least one length and one level are required".into()));
        }
        if self.replicates < MIN_REPLICATES {
            return Err(Error::Config(format!(
                "need at least {MIN_REPLICATES} replicates, got {}",
                self.replicates
            )));
        }
        if let Some(&a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::Domain {
                name: "alpha",
                value: a,
                reason: "must lie in (0, 1)",
            });
        }
        Ok(())
    }

    fn dgp_for(&self, len: usize, scenario: Scenario) -> DgpConfig {
        DgpConfig {
            len,
            scenario,
            ..self.dgp
        }
        .effective()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Size,
    Power,
    Clustering,
}

/// An estimated probability with its Monte-Carlo standard error
/// `sqrt(p (1 - p) / replicates)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub count: usize,
    pub replicates: usize,
    pub rate: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(count: usize, replicates: usize) -> Self {
        let p = count as f64 / replicates as f64;
        Self {
            count,
            replicates,
            rate: p,
            se: (p * (1.0 - p) / replicates as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    /// Fraction of replicates rejecting the global null.
    Rejection { rejection: Estimate },
    Clustering {
        n_groups_correct: Estimate,
        partition_correct: Estimate,
        /// Entry `r` counts replicates with `r` estimated groups (`0..=n`).
        n_groups_hist: Vec<usize>,
        /// Entry `e` counts replicates with `e` classification errors (`0..=n`).
        error_hist: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub len: usize,
    pub alpha: f64,
    /// Trend slope of the power scenario.
    pub b: Option<f64>,
    pub critical_value: f64,
    pub outcome: Outcome,
}

impl Cell {
    /// Rejection rate of a size or power cell.
    pub fn rejection(&self) -> Option<Estimate> {
        match &self.outcome {
            Outcome::Rejection { rejection } => Some(*rejection),
            Outcome::Clustering { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub cells: Vec<Cell>,
}

impl ExperimentResult {
    pub fn cell(&self, len: usize, alpha: f64, b: Option<f64>) -> Option<&Cell> {
        self.cells.iter().find(|c| c.len == len && c.alpha == alpha && c.b == b)
    }
}

/// Weights and critical values for one series length, shared by all
/// replicates and scenarios at that length.
struct LengthSetup {
    bank: WeightBank,
    qs: Vec<f64>,
}

fn length_setup(cfg: &ExperimentConfig, n: usize, len: usize) -> Result<LengthSetup> {
    let grid = build_grid(len, &cfg.grid)?;
    let bank = WeightBank::new(len, &grid)?;
    let key = derive_key(cfg.seed, &format!("critical/n{n}/T{len}"));
    let null = GaussianNull::simulate(n, &bank, cfg.mc_draws, key)?;
    let qs = cfg
        .alphas
        .iter()
        .map(|&a| null.quantile(a))
        .collect::<Result<Vec<_>>>()?;
    Ok(LengthSetup { bank, qs })
}

/// Overall statistic of every replicate, in replicate order.
fn replicate_statistics(cfg: &ExperimentConfig, dgp: &DgpConfig, bank: &WeightBank, key: u64) -> Result<Vec<f64>> {
    (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let panel = generate_panel(dgp, &mut stream(key, r))?;
            let aug = augment_panel(&panel, cfg.lrv)?;
            Ok(pair_statistics_with(&aug, bank).global_max())
        })
        .collect()
}

fn rejection_cells(
    cfg: &ExperimentConfig,
    setup: &LengthSetup,
    len: usize,
    b: Option<f64>,
    stats: &[f64],
) -> Vec<Cell> {
    cfg.alphas
        .iter()
        .zip(&setup.qs)
        .map(|(&alpha, &q)| Cell {
            len,
            alpha,
            b,
            critical_value: q,
            outcome: Outcome::Rejection {
                rejection: Estimate::new(stats.iter().filter(|&&s| s > q).count(), stats.len()),
            },
        })
        .collect()
}

/// Rejection rates under the null scenario for every `(T, alpha)`.
pub fn run_size_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &len in &cfg.lens {
        let dgp = cfg.dgp_for(len, Scenario::Null);
        dgp.validate()?;
        let setup = length_setup(cfg, dgp.n, len)?;
        let key = derive_key(cfg.seed, &format!("size/T{len}"));
        let stats = replicate_statistics(cfg, &dgp, &setup.bank, key)?;
        cells.extend(rejection_cells(cfg, &setup, len, None, &stats));
    }
    Ok(ExperimentResult {
        kind: ExperimentKind::Size,
        config: cfg.clone(),
        cells,
    })
}

/// Rejection rates when the first series carries the trend `b (u - 1/2)`, for
/// every `(T, b, alpha)`. Replicate `r` reuses the same noise for every `b`.
pub fn run_power_experiment(cfg: &ExperimentConfig, slopes: &[f64]) -> Result<ExperimentResult> {
    cfg.validate()?;
    if slopes.is_empty() {
        return Err(Error::Config("at least one trend slope is required".into()));
    }
    let mut cells = Vec::new();
    for &len in &cfg.lens {
        let key = derive_key(cfg.seed, &format!("power/T{len}"));
        let mut setup = None;
        for &b in slopes {
            let dgp = cfg.dgp_for(len, Scenario::Power { b });
            dgp.validate()?;
            if setup.is_none() {
                setup = Some(length_setup(cfg, dgp.n, len)?);
            }
            let setup = setup.as_ref().expect("initialised above");
            let stats = replicate_statistics(cfg, &dgp, &setup.bank, key)?;
            cells.extend(rejection_cells(cfg, setup, len, Some(b), &stats));
        }
    }
    Ok(ExperimentResult {
        kind: ExperimentKind::Power,
        config: cfg.clone(),
        cells,
    })
}

/// Per-level clustering summary of one replicate.
#[derive(Debug, Clone, Copy)]
struct ClusterOutcome {
    n_groups: usize,
    correct: bool,
    errors: usize,
}

/// Group-number and partition recovery under the three-cluster scenario for
/// every `(T, alpha)`.
pub fn run_clustering_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &len in &cfg.lens {
        let dgp = cfg.dgp_for(len, Scenario::Clusters3);
        dgp.validate()?;
        let truth = dgp.truth().expect("clustering scenario");
        let setup = length_setup(cfg, dgp.n, len)?;
        let key = derive_key(cfg.seed, &format!("clustering/T{len}"));
        let outcomes: Vec<Vec<ClusterOutcome>> = (0..cfg.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let panel = generate_panel(&dgp, &mut stream(key, r))?;
                let aug = augment_panel(&panel, cfg.lrv)?;
                let stats = pair_statistics_with(&aug, &setup.bank);
                let table = stats.psi_max();
                let tree = hac_tree(table)?;
                setup
                    .qs
                    .iter()
                    .map(|&q| {
                        let n_groups = estimate_num_groups(&tree, table, q);
                        let partition = partition_at(&tree, n_groups)?;
                        Ok(ClusterOutcome {
                            n_groups,
                            correct: partition == truth,
                            errors: classification_errors(&partition, &truth),
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;

        for (k, (&alpha, &q)) in cfg.alphas.iter().zip(&setup.qs).enumerate() {
            let mut n_groups_hist = vec![0; dgp.n + 1];
            let mut error_hist = vec![0; dgp.n + 1];
            let (mut hits, mut correct) = (0, 0);
            for o in outcomes.iter().map(|row| row[k]) {
                n_groups_hist[o.n_groups] += 1;
                error_hist[o.errors] += 1;
                hits += usize::from(o.n_groups == truth.len());
                correct += usize::from(o.correct);
            }
            cells.push(Cell {
                len,
                alpha,
                b: None,
                critical_value: q,
                outcome: Outcome::Clustering {
                    n_groups_correct: Estimate::new(hits, cfg.replicates),
                    partition_correct: Estimate::new(correct, cfg.replicates),
                    n_groups_hist,
                    error_hist,
                },
            });
        }
    }
    Ok(ExperimentResult {
        kind: ExperimentKind::Clustering,
        config: cfg.clone(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ar1_zero_coefficient_is_white_noise_scale() {
        let mut r = stream(3, 0);
        let path = simulate_ar1(20_000, 0.0, 2.0, &mut r).unwrap();
        let var = path.iter().map(|v| v * v).sum::<f64>() / path.len() as f64;
        assert!((var - 4.0).abs() < 0.15, "{var}");
        assert!(simulate_ar1(10, 1.0, 1.0, &mut r).is_err());
        assert!(simulate_ar1(10, -1.2, 1.0, &mut r).is_err());
    }

    #[test]
    fn ar1_is_reproducible() {
        let a = simulate_ar1(50, 0.25, 0.5, &mut stream(9, 2)).unwrap();
        let b = simulate_ar1(50, 0.25, 0.5, &mut stream(9, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn clustering_scenario_forces_shape() {
        let cfg = DgpConfig {
            n: 4,
            d: 1,
            ..DgpConfig::new(4, 60, Scenario::Clusters3)
        };
        let panel = generate_panel(&cfg, &mut stream(1, 0)).unwrap();
        assert_eq!((panel.n(), panel.dim()), (15, 0));
        assert_eq!(cfg.effective().truth().unwrap(), Partition::blocks(&[5, 5, 5]));
    }

    #[test]
    fn trends() {
        assert_eq!(Scenario::Power { b: 2.0 }.trend(0, 1.0), 1.0);
        assert_eq!(Scenario::Power { b: 2.0 }.trend(1, 1.0), 0.0);
        assert_eq!(Scenario::Clusters3.trend(7, 0.75), 0.25);
        assert_eq!(Scenario::Clusters3.trend(12, 0.75), -0.25);
        assert_eq!(Scenario::Clusters3.trend(4, 0.75), 0.0);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = DgpConfig::new(3, 50, Scenario::Null);
        cfg.err_ar = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = DgpConfig::new(3, 50, Scenario::Null);
        cfg.err_innov_sd = 0.0;
        assert!(cfg.validate().is_err());
        let mut exp = ExperimentConfig::new(vec![100], vec![0.05]);
        exp.replicates = 10;
        assert!(run_size_experiment(&exp).is_err());
    }

    #[test]
    fn estimate_standard_error() {
        let e = Estimate::new(50, 1000);
        assert_eq!(e.rate, 0.05);
        assert!((e.se - (0.05f64 * 0.95 / 1000.0).sqrt()).abs() < 1e-15);
    }
}
