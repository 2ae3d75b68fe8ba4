//! The `gpstate` command line: solve, dataset, train, predict, eval, bench
//! and gradcheck.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "gpstate", version, about = "Gross-Pitaevskii ground states and their neural surrogate")]
pub struct Cli {
    /// key=value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override one configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    /// Worker threads; also read from GPSTATE_WORKERS.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

/// Shortcuts for the problem keys.
#[derive(Debug, Clone, Default, Args)]
pub struct ProblemArgs {
    /// grid.dims
    #[arg(long)]
    pub dims: Option<usize>,
    /// grid.x.points (and grid.y.points in 2D)
    #[arg(long)]
    pub points: Option<usize>,
    /// problem.potential
    #[arg(long)]
    pub potential: Option<String>,
    /// Two-component problem (problem.components=2).
    #[arg(long)]
    pub two_component: bool,
    /// problem.g
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<f64>,
    /// problem.omega
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub g11: Option<f64>,
    #[arg(long)]
    pub g12: Option<f64>,
    #[arg(long)]
    pub g22: Option<f64>,
    /// solver.dt
    #[arg(long)]
    pub dt: Option<f64>,
    /// solver.iterations
    #[arg(long)]
    pub iterations: Option<usize>,
}

impl ProblemArgs {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut put = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        put("grid.dims", self.dims.map(|v| v.to_string()));
        put("grid.x.points", self.points.map(|v| v.to_string()));
        if self.dims == Some(2) {
            put("grid.y.points", self.points.map(|v| v.to_string()));
        }
        put("problem.potential", self.potential.clone());
        put("problem.components", self.two_component.then(|| "2".to_string()));
        put("problem.g", self.g.map(|v| v.to_string()));
        put("problem.omega", self.omega.map(|v| v.to_string()));
        put("problem.g11", self.g11.map(|v| v.to_string()));
        put("problem.g12", self.g12.map(|v| v.to_string()));
        put("problem.g22", self.g22.map(|v| v.to_string()));
        put("solver.dt", self.dt.map(|v| v.to_string()));
        put("solver.iterations", self.iterations.map(|v| v.to_string()));
        out
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Imaginary-time ground state of one problem.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Directory for state.gpds and state.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate, inspect or split datasets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train a surrogate on a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Directory holding train.idx and val.idx; otherwise the dataset is
        /// split with train.val_fraction and train.split_seed.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predicted profile at one coefficient, as CSV.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, allow_hyphen_values = true, conflicts_with = "omega")]
        g: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        omega: Option<f64>,
        /// CSV file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Relative energy errors of a checkpoint over dataset records.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Directory holding val.idx; all records when absent.
        #[arg(long)]
        split: Option<PathBuf>,
        /// Re-solve every record with the configured solver settings.
        #[arg(long)]
        recompute: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Surrogate forward pass against one imaginary-time solve.
    Bench {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = gpstate_eval::bench::DEFAULT_RUNS)]
        runs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference gradient checks of every layer and the network.
    Gradcheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Solve every plan value in parallel.
    Generate {
        #[command(flatten)]
        problem: ProblemArgs,
        /// plan.segments
        #[arg(long, allow_hyphen_values = true)]
        segments: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Header, record count and target validation.
    Inspect {
        path: PathBuf,
        /// Also write the records as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Train/validation index lists.
    Split {
        path: PathBuf,
        /// train.val_fraction
        #[arg(long)]
        fraction: Option<f64>,
        /// train.split_seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Resolves the configuration: defaults, `--config`, command shortcuts,
/// `--set`, then the worker count from the environment and `--workers`.
pub fn resolve_config(cli: &Cli, env_workers: Option<&str>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    let shortcuts: Vec<(&str, String)> = match &cli.command {
        Command::Solve { problem, .. } | Command::Bench { problem, .. } => problem.pairs(),
        Command::Dataset(DatasetCommand::Generate { problem, segments, .. }) => {
            let mut p = problem.pairs();
            if let Some(s) = segments {
                p.push(("plan.segments", s.clone()));
            }
            p
        }
        Command::Dataset(DatasetCommand::Split { fraction, seed, .. }) => {
            let mut p = Vec::new();
            if let Some(f) = fraction {
                p.push(("train.val_fraction", f.to_string()));
            }
            if let Some(s) = seed {
                p.push(("train.split_seed", s.to_string()));
            }
            p
        }
        _ => Vec::new(),
    };
    for (k, v) in shortcuts {
        cfg.set(k, &v)?;
    }
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(w) = env_workers {
        cfg.set("run.workers", w)?;
    }
    if let Some(w) = cli.workers {
        cfg.set("run.workers", &w.to_string())?;
    }
    cfg.workers()?;
    Ok(cfg)
}

/// Runs a parsed command line, writing human-readable output to stdout.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let env = std::env::var("GPSTATE_WORKERS").ok();
    let cfg = resolve_config(cli, env.as_deref())?;
    commands::dispatch(&cli.command, &cfg)
}
