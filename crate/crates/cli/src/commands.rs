//! The `test`, `cluster` and `simulate` commands.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::Deserialize;

use mstrend_core::clustering::cluster_report;
use mstrend_core::multiscale::{build_grid, GridPreset, GridSpec, PreparedTest};
use mstrend_core::simulation::{
    run_clustering_experiment, run_power_experiment, run_size_experiment, ExperimentConfig, ExperimentKind,
    DEFAULT_CLUSTERING_REPLICATES, DEFAULT_MC_DRAWS, DEFAULT_REPLICATES, PAPER_REPLICATES,
};
use mstrend_core::{LrvConfig, TestReport};

use crate::cache::{self, CacheKey};
use crate::ingest::{load_panel_csv, LoadSpec, LoadedPanel};
use crate::report::{
    experiment_table, sha256_hex, write_report, Body, ClusterDoc, ClusterLevelDoc, InputEcho, LevelDoc,
    ReportDocument, RunEcho, SimulationEcho, TestDoc,
};
use crate::svg::{render_dendrogram, render_interval_plot};

/// A grid preset name or `custom:<file>` pointing to a JSON file
/// `{"us": [...], "hs": [...]}`.
#[derive(Debug, Clone, PartialEq)]
pub enum GridChoice {
    Preset(GridPreset),
    Custom(PathBuf),
}

impl FromStr for GridChoice {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s.strip_prefix("custom:") {
            Some(path) if !path.is_empty() => Ok(GridChoice::Custom(PathBuf::from(path))),
            Some(_) => bail!("`custom:` needs a file name"),
            None => Ok(GridChoice::Preset(s.parse()?)),
        }
    }
}

#[derive(Deserialize)]
struct CustomGridFile {
    us: Vec<f64>,
    hs: Vec<f64>,
}

impl GridChoice {
    pub fn spec(&self) -> anyhow::Result<GridSpec> {
        match self {
            GridChoice::Preset(p) => Ok(GridSpec::Preset(*p)),
            GridChoice::Custom(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read grid file {}", path.display()))?;
                let file: CustomGridFile = serde_json::from_str(&text)
                    .with_context(|| format!("malformed grid file {}", path.display()))?;
                Ok(GridSpec::Custom { us: file.us, hs: file.hs })
            }
        }
    }

    /// Echo form; custom grids are identified by the hash of their contents.
    pub fn label(&self) -> anyhow::Result<String> {
        match self {
            GridChoice::Preset(p) => Ok(p.name().to_owned()),
            GridChoice::Custom(path) => {
                let bytes = std::fs::read(path).with_context(|| format!("cannot read grid file {}", path.display()))?;
                Ok(format!("custom:{}", sha256_hex(&bytes)))
            }
        }
    }
}

/// `subseries`, `subseries:<block length>` or `ar:<order>`.
pub fn parse_lrv(s: &str) -> anyhow::Result<LrvConfig> {
    if s == "subseries" {
        return Ok(LrvConfig::default());
    }
    if let Some(block) = s.strip_prefix("subseries:") {
        return Ok(LrvConfig::Subseries {
            block_len: Some(block.parse().context("block length must be a positive integer")?),
        });
    }
    if let Some(order) = s.strip_prefix("ar:") {
        return Ok(LrvConfig::ar(order.parse().context("AR order must be a positive integer")?));
    }
    bail!("unknown long-run variance method `{s}` (expected subseries, subseries:<s> or ar:<p>)")
}

/// Settings for the commands that analyse a data file.
#[derive(Debug, Clone, PartialEq)]
pub struct DataArgs {
    pub input: PathBuf,
    pub load: LoadSpec,
    pub alphas: Vec<f64>,
    pub grid: GridChoice,
    pub lrv: LrvConfig,
    pub mc_draws: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub plots: bool,
    pub cache_dir: Option<PathBuf>,
}

impl DataArgs {
    pub fn new(input: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            load: LoadSpec::default(),
            alphas: vec![0.05],
            grid: GridChoice::Preset(GridPreset::SimS6),
            lrv: LrvConfig::default(),
            mc_draws: DEFAULT_MC_DRAWS,
            seed: 0,
            out: None,
            plots: true,
            cache_dir: None,
        }
    }

    fn echo(&self, command: &str, groups: Option<usize>) -> anyhow::Result<RunEcho> {
        let bytes = std::fs::read(&self.input).with_context(|| format!("cannot read {}", self.input.display()))?;
        let file = self
            .input
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(RunEcho {
            command: command.to_owned(),
            input: Some(InputEcho {
                file,
                sha256: sha256_hex(&bytes),
            }),
            alphas: self.alphas.clone(),
            grid: self.grid.label()?,
            lrv: self.lrv,
            mc_draws: self.mc_draws,
            seed: self.seed,
            interpolate: self.load.interpolate,
            extrapolate: self.load.extrapolate,
            missing_cap: self.load.missing_cap,
            groups,
            simulation: None,
        })
    }
}

fn check_alphas(alphas: &[f64]) -> anyhow::Result<()> {
    if alphas.is_empty() {
        bail!("at least one --alpha is required");
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        bail!("alpha must lie in (0, 1), got {a}");
    }
    Ok(())
}

/// Loaded data plus the test outcome at every requested level.
pub struct Analysis {
    pub loaded: LoadedPanel,
    pub prepared: PreparedTest,
    pub reports: Vec<TestReport>,
}

pub fn analyse(args: &DataArgs) -> anyhow::Result<Analysis> {
    check_alphas(&args.alphas)?;
    let loaded = load_panel_csv(&args.input, args.load)?;
    let len = loaded.panel.len();
    let grid = build_grid(len, &args.grid.spec()?)?;
    let prepared = PreparedTest::new(&loaded.panel, &grid, args.lrv)?;
    let key = CacheKey::new(loaded.panel.n(), len, &grid, args.mc_draws, args.seed);
    let null = cache::null_distribution(args.cache_dir.as_deref(), &key, prepared.bank())?;
    let reports = args
        .alphas
        .iter()
        .map(|&a| Ok(prepared.report(null.critical_value(a)?)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(Analysis {
        loaded,
        prepared,
        reports,
    })
}

fn test_doc(analysis: &Analysis) -> TestDoc {
    let aug = analysis.prepared.augmented();
    let ids = aug.ids();
    let times = Some(analysis.loaded.times.as_slice());
    TestDoc {
        ids: ids.to_vec(),
        times: analysis.loaded.times.clone(),
        len: aug.len(),
        beta: aug.beta().rows().into_iter().map(|r| r.to_vec()).collect(),
        alpha_hat: aug.alpha().to_vec(),
        sigma2: aug.sigma2().to_vec(),
        imputed: analysis.loaded.imputed.clone(),
        diagnostics: analysis.prepared.diagnostics(),
        levels: analysis.reports.iter().map(|r| LevelDoc::new(r, ids, times)).collect(),
    }
}

fn prepare_out(out: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn write_interval_plots(analysis: &Analysis, out: &Path) -> anyhow::Result<()> {
    let dir = out.join("plots");
    prepare_out(&dir)?;
    for report in &analysis.reports {
        for pair in &report.pairs {
            let svg = render_interval_plot(pair, Some(analysis.prepared.augmented()), Some(&analysis.loaded.times));
            let name = format!("pair_{}_{}_alpha_{}.svg", pair.i + 1, pair.j + 1, report.alpha);
            write_file(&dir.join(name), &svg)?;
        }
    }
    Ok(())
}

/// Runs the multiscale test; writes `report.json` (and pair plots) when an
/// output directory is set.
pub fn run_test_command(args: &DataArgs) -> anyhow::Result<ReportDocument> {
    let analysis = analyse(args)?;
    let doc = ReportDocument::new(args.echo("test", None)?, Body::Test { test: test_doc(&analysis) });
    if let Some(out) = &args.out {
        prepare_out(out)?;
        write_report(&doc, &out.join("report.json"))?;
        if args.plots {
            write_interval_plots(&analysis, out)?;
        }
    }
    Ok(doc)
}

/// Runs the test and clusters the series at every level; `groups` fixes the
/// number of clusters instead of estimating it.
pub fn run_cluster_command(args: &DataArgs, groups: Option<usize>) -> anyhow::Result<ReportDocument> {
    let analysis = analyse(args)?;
    let aug = analysis.prepared.augmented();
    let ids = aug.ids();
    let times = Some(analysis.loaded.times.as_slice());
    let mut levels = Vec::new();
    let mut tree = None;
    for report in &analysis.reports {
        let (t, full) = cluster_report(report, groups, false)?;
        let (_, minimal) = cluster_report(report, groups, true)?;
        levels.push(ClusterLevelDoc::new(report, &full, &minimal, ids, times));
        tree = Some(t);
    }
    let tree = tree.expect("at least one level");
    if let (Some(out), true) = (&args.out, args.plots) {
        prepare_out(out)?;
        for level in &levels {
            let svg = render_dendrogram(&tree, ids, level.n_groups);
            write_file(&out.join(format!("dendrogram_alpha_{}.svg", level.alpha)), &svg)?;
        }
        write_interval_plots(&analysis, out)?;
    }
    let doc = ReportDocument::new(
        args.echo("cluster", groups)?,
        Body::Cluster {
            test: test_doc(&analysis),
            clustering: ClusterDoc { tree, levels },
        },
    );
    if let Some(out) = &args.out {
        prepare_out(out)?;
        write_report(&doc, &out.join("report.json"))?;
    }
    Ok(doc)
}

/// Settings for the simulation experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateArgs {
    pub experiment: ExperimentKind,
    pub lens: Vec<usize>,
    pub alphas: Vec<f64>,
    /// Trend slopes for the power experiment.
    pub slopes: Vec<f64>,
    /// Overrides the default replicate count.
    pub replicates: Option<usize>,
    pub paper_scale: bool,
    pub mc_draws: usize,
    pub seed: u64,
    pub lrv: LrvConfig,
    pub grid: GridChoice,
    pub out: Option<PathBuf>,
}

impl SimulateArgs {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            lens: vec![100, 250, 500],
            alphas: vec![0.01, 0.05, 0.1],
            slopes: vec![0.75, 1.0, 1.25],
            replicates: None,
            paper_scale: false,
            mc_draws: DEFAULT_MC_DRAWS,
            seed: 0,
            lrv: LrvConfig::default(),
            grid: GridChoice::Preset(GridPreset::SimS6),
            out: None,
        }
    }

    pub fn replicate_count(&self) -> usize {
        match (self.replicates, self.paper_scale, self.experiment) {
            (Some(r), _, _) => r,
            (None, true, _) => PAPER_REPLICATES,
            (None, false, ExperimentKind::Clustering) => DEFAULT_CLUSTERING_REPLICATES,
            (None, false, _) => DEFAULT_REPLICATES,
        }
    }

    fn name(&self) -> &'static str {
        match self.experiment {
            ExperimentKind::Size => "size",
            ExperimentKind::Power => "power",
            ExperimentKind::Clustering => "clustering",
        }
    }
}

pub fn run_simulate_command(args: &SimulateArgs) -> anyhow::Result<ReportDocument> {
    check_alphas(&args.alphas)?;
    let mut cfg = ExperimentConfig::new(args.lens.clone(), args.alphas.clone());
    cfg.replicates = args.replicate_count();
    cfg.mc_draws = args.mc_draws;
    cfg.seed = args.seed;
    cfg.lrv = args.lrv;
    cfg.grid = args.grid.spec()?;
    let result = match args.experiment {
        ExperimentKind::Size => run_size_experiment(&cfg)?,
        ExperimentKind::Power => run_power_experiment(&cfg, &args.slopes)?,
        ExperimentKind::Clustering => run_clustering_experiment(&cfg)?,
    };
    let echo = RunEcho {
        command: "simulate".into(),
        input: None,
        alphas: args.alphas.clone(),
        grid: args.grid.label()?,
        lrv: args.lrv,
        mc_draws: args.mc_draws,
        seed: args.seed,
        interpolate: false,
        extrapolate: false,
        missing_cap: 0,
        groups: None,
        simulation: Some(SimulationEcho {
            experiment: args.name().into(),
            lens: args.lens.clone(),
            slopes: if args.experiment == ExperimentKind::Power {
                args.slopes.clone()
            } else {
                Vec::new()
            },
            replicates: cfg.replicates,
        }),
    };
    let table = experiment_table(&result);
    let doc = ReportDocument::new(echo, Body::Simulate { experiment: result });
    if let Some(out) = &args.out {
        prepare_out(out)?;
        write_report(&doc, &out.join("report.json"))?;
        write_file(&out.join(format!("{}.csv", args.name())), &table)?;
    }
    Ok(doc)
}
