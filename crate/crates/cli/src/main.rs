use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mstrend_cli::commands::{
    parse_lrv, run_cluster_command, run_simulate_command, run_test_command, DataArgs, GridChoice, SimulateArgs,
};
use mstrend_cli::ingest::{LoadSpec, DEFAULT_MISSING_CAP};
use mstrend_cli::report::{Body, ReportDocument};
use mstrend_core::simulation::{ExperimentKind, Outcome, DEFAULT_MC_DRAWS};
use mstrend_core::LrvConfig;

#[derive(Parser)]
#[command(name = "mstrend", version, about = "Multiscale comparison of trends in panel time series")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test which pairs of trends differ, and where.
    Test(DataOpts),
    /// Test, then group series with indistinguishable trends.
    Cluster {
        #[command(flatten)]
        data: DataOpts,
        /// Fix the number of groups instead of estimating it.
        #[arg(long)]
        groups: Option<usize>,
    },
    /// Run a size, power or clustering experiment on simulated panels.
    Simulate(SimOpts),
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

impl From<Toggle> for bool {
    fn from(t: Toggle) -> bool {
        matches!(t, Toggle::On)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Size,
    Power,
    Clustering,
}

#[derive(Args)]
struct Common {
    /// Significance level; repeat for several levels.
    #[arg(long = "alpha", default_values_t = [0.05])]
    alphas: Vec<f64>,
    /// sim_s6, gdp_s71, house_s72 or custom:<file.json>.
    #[arg(long, default_value = "sim_s6", value_parser = |s: &str| s.parse::<GridChoice>().map_err(|e| e.to_string()))]
    grid: GridChoice,
    /// subseries, subseries:<block length> or ar:<order>.
    #[arg(long, default_value = "subseries", value_parser = |s: &str| parse_lrv(s).map_err(|e| e.to_string()))]
    lrv: LrvConfig,
    /// Monte-Carlo draws for the critical value.
    #[arg(long, default_value_t = DEFAULT_MC_DRAWS)]
    mc_draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for the report and plots.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DataOpts {
    /// Long-format CSV: series_id,time,y[,x1..xd].
    input: PathBuf,
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "on")]
    plots: Toggle,
    /// Fill interior gaps by linear interpolation.
    #[arg(long, value_enum, default_value = "on")]
    interpolate: Toggle,
    /// Fill leading and trailing gaps with the nearest observed value.
    #[arg(long, value_enum, default_value = "off")]
    extrapolate: Toggle,
    /// Maximum number of missing time points per series.
    #[arg(long, default_value_t = DEFAULT_MISSING_CAP)]
    missing_cap: usize,
    /// Directory for cached critical-value samples.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SimOpts {
    #[arg(long, value_enum)]
    experiment: Experiment,
    #[command(flatten)]
    common: Common,
    /// Series lengths.
    #[arg(long = "len", default_values_t = [100, 250, 500])]
    lens: Vec<usize>,
    /// Trend slopes for the power experiment.
    #[arg(long = "slope", default_values_t = [0.75, 1.0, 1.25])]
    slopes: Vec<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Use 5000 replicates unless --replicates is given.
    #[arg(long)]
    paper_scale: bool,
}

impl DataOpts {
    fn into_args(self) -> DataArgs {
        DataArgs {
            input: self.input,
            load: LoadSpec {
                interpolate: self.interpolate.into(),
                missing_cap: self.missing_cap,
                extrapolate: self.extrapolate.into(),
            },
            alphas: self.common.alphas,
            grid: self.common.grid,
            lrv: self.common.lrv,
            mc_draws: self.common.mc_draws,
            seed: self.common.seed,
            out: self.common.out,
            plots: self.plots.into(),
            cache_dir: self.cache_dir,
        }
    }
}

fn summarize(doc: &ReportDocument) {
    match &doc.body {
        Body::Test { test } | Body::Cluster { test, .. } => {
            for level in &test.levels {
                let significant = level.pairs.iter().filter(|p| !p.rejected.is_empty()).count();
                println!(
                    "alpha={} q={:.4} statistic={:.4} reject={} pairs_with_differences={}",
                    level.alpha, level.critical_value.q, level.statistic, level.global_reject, significant
                );
            }
            if let Body::Cluster { clustering, .. } = &doc.body {
                for level in &clustering.levels {
                    let groups: Vec<String> = level.group_ids.iter().map(|g| format!("{{{}}}", g.join(","))).collect();
                    println!("alpha={} groups={} {}", level.alpha, level.n_groups, groups.join(" "));
                }
            }
        }
        Body::Simulate { experiment } => {
            for c in &experiment.cells {
                let b = c.b.map(|b| format!(" b={b}")).unwrap_or_default();
                match &c.outcome {
                    Outcome::Rejection { rejection } => println!(
                        "T={} alpha={}{} rejection={:.3} (se {:.3})",
                        c.len, c.alpha, b, rejection.rate, rejection.se
                    ),
                    Outcome::Clustering {
                        n_groups_correct,
                        partition_correct,
                        ..
                    } => println!(
                        "T={} alpha={} P(N=3)={:.3} (se {:.3}) P(correct)={:.3} (se {:.3})",
                        c.len,
                        c.alpha,
                        n_groups_correct.rate,
                        n_groups_correct.se,
                        partition_correct.rate,
                        partition_correct.se
                    ),
                }
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let doc = match cli.command {
        Command::Test(data) => run_test_command(&data.into_args())?,
        Command::Cluster { data, groups } => run_cluster_command(&data.into_args(), groups)?,
        Command::Simulate(sim) => {
            let experiment = match sim.experiment {
                Experiment::Size => ExperimentKind::Size,
                Experiment::Power => ExperimentKind::Power,
                Experiment::Clustering => ExperimentKind::Clustering,
            };
            run_simulate_command(&SimulateArgs {
                experiment,
                lens: sim.lens,
                alphas: sim.common.alphas,
                slopes: sim.slopes,
                replicates: sim.replicates,
                paper_scale: sim.paper_scale,
                mc_draws: sim.common.mc_draws,
                seed: sim.common.seed,
                lrv: sim.common.lrv,
                grid: sim.common.grid,
                out: sim.common.out,
            })?
        }
    };
    summarize(&doc);
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
