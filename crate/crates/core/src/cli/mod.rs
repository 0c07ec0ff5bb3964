//! Command-line harness: configuration, subcommands, named experiments and
//! result records.
//!
//! Exit codes are 0 when every checked metric passes, 1 when one fails and
//! 2 on configuration or runtime errors.

pub mod commands;
pub mod config;
pub mod experiments;
pub mod record;

use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use commands::EntropyKind;
pub use config::ExperimentConfig;
pub use experiments::{run_experiment, RunContext, DEFAULT_SEED, EXPERIMENTS};
pub use record::{Artifact, Metric, Outcome, ResultRecord};

use crate::gluing::ScheduleMode;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("{stage}: {message}")]
    Stage { stage: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("unknown experiment {0:?}; available: {1}")]
    UnknownExperiment(String, String),
}

impl CliError {
    /// Wraps an error from the named module.
    pub fn stage<E: Display>(stage: &'static str) -> impl Fn(E) -> CliError + Copy {
        move |e| CliError::Stage { stage: stage.into(), message: e.to_string() }
    }

    pub fn csv(e: csv::Error) -> CliError {
        CliError::Stage { stage: "csv".into(), message: e.to_string() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io { path: path.display().to_string(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    PaperStrict,
    Desk,
}

impl From<ModeArg> for ScheduleMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::PaperStrict => ScheduleMode::PaperStrict,
            ModeArg::Desk => ScheduleMode::Desk,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EntropyArg {
    Katok,
    Bowen,
    Edp,
}

#[derive(Debug, Parser)]
#[command(name = "historic", version, about = "Historic points of Birkhoff averages: gluing, shadowing and entropy experiments")]
pub struct Cli {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Directory for the record and data tables.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Schedule mode for gluing.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Orbit of the configured start point, as CSV.
    Simulate,
    /// Lyapunov exponents along an orbit.
    Lyapunov,
    /// Pesin block membership of a random sample.
    PesinBlocks,
    /// Entropy estimates.
    Entropy {
        #[arg(value_enum)]
        method: EntropyArg,
    },
    /// Glue a point between the two configured targets.
    ConstructHistoric,
    /// Run a named acceptance recipe; `list` prints the names.
    Experiment { name: String },
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(None) => 0,
        Ok(Some(out)) => {
            println!("{}", out.record.summary());
            if out.record.pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Runs a parsed command; `None` for commands that only print.
pub fn run(cli: &Cli) -> Result<Option<Outcome>, CliError> {
    if let Some(n) = cli.workers {
        // Fails only when a pool already exists, which then stays in use.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(m) = cli.mode {
        cfg.construct.schedule.mode = m.into();
    }
    let out_dir = cli.out.clone().or_else(|| cfg.out.clone());
    let outcome = match &cli.command {
        Command::Experiment { name } if name == "list" => {
            for (name, about, _) in EXPERIMENTS {
                println!("{name:<18} {about}");
            }
            return Ok(None);
        }
        Command::Experiment { name } => {
            let ctx = RunContext { seed: cfg.seed.unwrap_or(DEFAULT_SEED), mode: cfg.construct.schedule.mode };
            run_experiment(name, &ctx)?
        }
        other => {
            cfg.validate()?;
            let t = std::time::Instant::now();
            let mut out = match other {
                Command::Simulate => commands::simulate(&cfg)?,
                Command::Lyapunov => commands::lyapunov(&cfg)?,
                Command::PesinBlocks => commands::pesin_blocks(&cfg)?,
                Command::Entropy { method } => {
                    let kind = match method {
                        EntropyArg::Katok => EntropyKind::Katok,
                        EntropyArg::Bowen => EntropyKind::Bowen,
                        EntropyArg::Edp => EntropyKind::Edp,
                    };
                    commands::entropy(kind, &cfg)?
                }
                Command::ConstructHistoric => commands::construct_historic(&cfg)?,
                Command::Experiment { .. } => unreachable!("handled above"),
            };
            out.record.runtime_secs = t.elapsed().as_secs_f64();
            out
        }
    };
    match out_dir {
        Some(dir) => outcome.write_to(&dir)?,
        None => println!("{}", serde_json::to_string_pretty(&outcome.record).expect("records serialize")),
    }
    Ok(Some(outcome))
}
