//! Command-line front end: method menus, selection experiments on CSV data
//! or simulated designs, population score curves and partition agreement.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use quadscore::criteria::Criterion;
use quadscore::dgp::SeparationDesign;

use crate::commands::CurveArgs;
use crate::config::{ExperimentConfig, Overrides};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "quadscore",
    version,
    about = "Quadratic-score validation and selection of clusterings"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GlobalArgs {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Bootstrap replicates.
    #[arg(long = "b", global = true)]
    pub b: Option<usize>,
    /// Bootstrap percentile level.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Cross-validation folds.
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    /// Standard-error multiplier of the cross-validated score.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CurveDesign {
    #[value(name = "dgpG", alias = "dgpg")]
    DgpG,
    #[value(name = "dgpU", alias = "dgpu")]
    DgpU,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a method menu on CSV data and select per criterion.
    Select,
    /// Monte Carlo selection experiment on a simulated design.
    Simulate,
    /// Population hard and smooth score curves of the separation designs.
    PopulationCurve {
        #[arg(long, value_enum)]
        design: CurveDesign,
        #[arg(long, default_value_t = 2.5)]
        d_min: f64,
        #[arg(long, default_value_t = 4.0)]
        d_max: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
    },
    /// ARI and negated variation of information between two label files.
    Metrics {
        labels_a: PathBuf,
        labels_b: PathBuf,
    },
}

fn experiment(global: &GlobalArgs) -> CliResult<ExperimentConfig> {
    let path = global
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply(&Overrides {
        seed: global.seed,
        out: global.out.clone(),
        b: global.b,
        alpha: global.alpha,
        folds: global.folds,
        delta: global.delta,
    });
    cfg.validate()?;
    Ok(cfg)
}

fn print_selection(selected: impl IntoIterator<Item = (Criterion, String)>) {
    for (c, id) in selected {
        println!("{c}\t{id}");
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Select => {
            let out = commands::select(&experiment(&cli.global)?)?;
            print_selection(
                out.report
                    .selected
                    .iter()
                    .map(|(&c, &i)| (c, out.report.rows[i].method_id.clone())),
            );
        }
        Command::Simulate => {
            let out = commands::simulate(&experiment(&cli.global)?)?;
            for s in &out.summaries {
                let k = s.modal_k.map_or("-".to_string(), |k| k.to_string());
                println!("{}\tK={k}\t{:.0}%", s.criterion, 100.0 * s.modal_frequency);
            }
        }
        Command::PopulationCurve {
            design,
            d_min,
            d_max,
            step,
            draws,
            repeats,
        } => {
            let seed = cli
                .global
                .seed
                .ok_or_else(|| CliError::Config("--seed is required".into()))?;
            let args = CurveArgs {
                design: match design {
                    CurveDesign::DgpG => SeparationDesign::Gaussian,
                    CurveDesign::DgpU => SeparationDesign::Uniform,
                },
                d_min: *d_min,
                d_max: *d_max,
                step: *step,
                draws: *draws,
                repeats: *repeats,
                seed,
                out: cli.global.out.clone(),
            };
            let r = commands::population_curve(&args)?;
            let show = |v: Option<f64>| v.map_or("none".to_string(), |d| format!("{d:.3}"));
            println!("hard crossing\t{}", show(r.hard_crossing()));
            println!("smooth crossing\t{}", show(r.smooth_crossing()));
        }
        Command::Metrics { labels_a, labels_b } => {
            let a = commands::metrics(labels_a, labels_b)?;
            println!("ARI\t{}", a.ari);
            println!("-VIC\t{}", a.neg_vic);
        }
    }
    Ok(())
}

/// Runs a parsed command line on a pool of `--workers` threads.
pub fn run(cli: &Cli) -> CliResult<()> {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.workers.unwrap_or(0))
            .build()
            .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| dispatch(cli))
    }
    #[cfg(not(feature = "parallel"))]
    {
        if cli.global.workers.is_some_and(|w| w > 1) {
            log::warn!("built without the parallel feature; --workers is ignored");
        }
        dispatch(cli)
    }
}

/// Parses a command line; on failure prints the usage error and returns
/// the exit code.
pub fn parse_args<I, T>(args: I) -> Result<Cli, i32>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(args).map_err(|e| {
        let _ = e.print();
        if e.use_stderr() {
            2
        } else {
            0
        }
    })
}

/// Runs `cli` and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args`, runs the command, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match parse_args(args) {
        Ok(cli) => execute(&cli),
        Err(code) => code,
    }
}
