//! JSON report documents.
//!
//! A report echoes the full run configuration, a SHA-256 hash of that echo and
//! the seed, so any report can be regenerated exactly. Serialization is
//! deterministic: identical runs give byte-identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mstrend_core::clustering::{ClusterTree, GroupStructure};
use mstrend_core::multiscale::{CriticalValue, Diagnostics};
use mstrend_core::simulation::ExperimentResult;
use mstrend_core::{LocationScalePoint, LrvConfig, TestReport};

pub const FORMAT_VERSION: &str = concat!("mstrend ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed report {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Everything that determines a run's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEcho {
    pub command: String,
    /// Input file name and the SHA-256 of its contents.
    pub input: Option<InputEcho>,
    pub alphas: Vec<f64>,
    pub grid: String,
    pub lrv: LrvConfig,
    pub mc_draws: usize,
    pub seed: u64,
    pub interpolate: bool,
    pub extrapolate: bool,
    pub missing_cap: usize,
    /// Requested number of groups for clustering, if fixed.
    pub groups: Option<usize>,
    /// Simulation-only settings.
    pub simulation: Option<SimulationEcho>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputEcho {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationEcho {
    pub experiment: String,
    pub lens: Vec<usize>,
    pub slopes: Vec<f64>,
    pub replicates: usize,
}

impl RunEcho {
    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("echo serializes").as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A tested interval in rescaled time and, when time labels are known, in
/// calendar time (first and last observation inside the interval).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalDoc {
    pub u: f64,
    pub h: f64,
    pub lower: f64,
    pub upper: f64,
    pub start: Option<String>,
    pub end: Option<String>,
}

impl IntervalDoc {
    pub fn new(point: &LocationScalePoint, times: Option<&[String]>) -> Self {
        let (start, end) = match times {
            Some(times) if !times.is_empty() => {
                let len = times.len();
                let n = len as f64;
                let lo = ((n * point.lower() - 1e-9).ceil().max(1.0) as usize).min(len);
                let hi = ((n * point.upper() + 1e-9).floor().max(1.0) as usize).min(len);
                (Some(times[lo - 1].clone()), Some(times[hi - 1].clone()))
            }
            _ => (None, None),
        };
        Self {
            u: point.u(),
            h: point.h(),
            lower: point.lower(),
            upper: point.upper(),
            start,
            end,
        }
    }

    pub fn point(&self) -> LocationScalePoint {
        LocationScalePoint::new(self.u, self.h).expect("stored points are valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDoc {
    pub i: usize,
    pub j: usize,
    pub id_i: String,
    pub id_j: String,
    pub psi_max: f64,
    pub rejected: Vec<IntervalDoc>,
    pub minimal: Vec<IntervalDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDoc {
    pub alpha: f64,
    pub critical_value: CriticalValue,
    pub statistic: f64,
    pub global_reject: bool,
    pub pairs: Vec<PairDoc>,
}

impl LevelDoc {
    pub fn new(report: &TestReport, ids: &[String], times: Option<&[String]>) -> Self {
        let docs = |set: &[LocationScalePoint]| set.iter().map(|p| IntervalDoc::new(p, times)).collect();
        Self {
            alpha: report.alpha,
            critical_value: report.critical_value,
            statistic: report.statistic,
            global_reject: report.global_reject,
            pairs: report
                .pairs
                .iter()
                .map(|p| PairDoc {
                    i: p.i,
                    j: p.j,
                    id_i: ids[p.i].clone(),
                    id_j: ids[p.j].clone(),
                    psi_max: p.psi_max,
                    rejected: docs(&p.rejected),
                    minimal: docs(&p.minimal),
                })
                .collect(),
        }
    }
}

/// Estimates and test results for a data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestDoc {
    pub ids: Vec<String>,
    pub times: Vec<String>,
    pub len: usize,
    /// Per series: estimated slopes, fixed effect and long-run variance.
    pub beta: Vec<Vec<f64>>,
    pub alpha_hat: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub imputed: Vec<(String, usize)>,
    pub diagnostics: Diagnostics,
    pub levels: Vec<LevelDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPairDoc {
    pub l: usize,
    pub m: usize,
    pub intervals: Vec<IntervalDoc>,
    pub minimal: Vec<IntervalDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLevelDoc {
    pub alpha: f64,
    pub critical_value: f64,
    pub n_groups: usize,
    /// Member indices per group.
    pub groups: Vec<Vec<usize>>,
    pub group_ids: Vec<Vec<String>>,
    pub within_max: Vec<Option<f64>>,
    pub between: Vec<GroupPairDoc>,
}

impl ClusterLevelDoc {
    pub fn new(
        report: &TestReport,
        full: &GroupStructure,
        minimal: &GroupStructure,
        ids: &[String],
        times: Option<&[String]>,
    ) -> Self {
        let groups: Vec<Vec<usize>> = full.groups.groups().to_vec();
        let between = full
            .between_intervals
            .iter()
            .map(|(&(l, m), set)| GroupPairDoc {
                l,
                m,
                intervals: set.iter().map(|p| IntervalDoc::new(p, times)).collect(),
                minimal: minimal.between_intervals[&(l, m)]
                    .iter()
                    .map(|p| IntervalDoc::new(p, times))
                    .collect(),
            })
            .collect();
        Self {
            alpha: report.alpha,
            critical_value: report.critical_value.q,
            n_groups: full.n_groups,
            group_ids: groups.iter().map(|g| g.iter().map(|&i| ids[i].clone()).collect()).collect(),
            groups,
            within_max: full.within_max.clone(),
            between,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDoc {
    pub tree: ClusterTree,
    pub levels: Vec<ClusterLevelDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Body {
    Test { test: TestDoc },
    Cluster { test: TestDoc, clustering: ClusterDoc },
    Simulate { experiment: ExperimentResult },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: RunEcho,
    pub body: Body,
}

impl ReportDocument {
    pub fn new(config: RunEcho, body: Body) -> Self {
        Self {
            version: FORMAT_VERSION.to_owned(),
            config_hash: config.hash(),
            seed: config.seed,
            config,
            body,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

pub fn write_report(doc: &ReportDocument, path: &Path) -> Result<(), ReportError> {
    std::fs::write(path, doc.to_json()).map_err(|source| ReportError::Write {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_report(path: &Path) -> Result<ReportDocument, ReportError> {
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Read {
        path: path.display().to_string(),
        source,
    })?;
    ReportDocument::from_json(&text).map_err(|source| ReportError::Json {
        path: path.display().to_string(),
        source,
    })
}

/// Experiment cells as CSV: one row per cell and metric.
pub fn experiment_table(result: &ExperimentResult) -> String {
    use mstrend_core::simulation::Outcome;
    let mut out = String::from("T,alpha,b,critical_value,metric,count,replicates,rate,se\n");
    for c in &result.cells {
        let b = c.b.map(|b| b.to_string()).unwrap_or_default();
        let mut row = |metric: &str, e: &mstrend_core::simulation::Estimate| {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                c.len, c.alpha, b, c.critical_value, metric, e.count, e.replicates, e.rate, e.se
            ));
        };
        match &c.outcome {
            Outcome::Rejection { rejection } => row("rejection", rejection),
            Outcome::Clustering {
                n_groups_correct,
                partition_correct,
                ..
            } => {
                row("n_groups_correct", n_groups_correct);
                row("partition_correct", partition_correct);
            }
        }
    }
    out
}
