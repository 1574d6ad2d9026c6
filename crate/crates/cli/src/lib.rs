//! Command-line front end: literals, data ingestion, configuration and
//! reports around the `htm-core` library.

pub mod commands;
pub mod data;
pub mod literal;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

use htm_core::inference::CodifferencePower;

pub use data::{ingest_csv, Dataset, Transform};
pub use report::{Format, Report, Table};

/// Failures of a CLI run, one per exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Data(_) => 4,
        }
    }
}

impl From<htm_core::Error> for CliError {
    fn from(e: htm_core::Error) -> Self {
        use htm_core::Error as E;
        match e {
            E::InvalidParameter(_) | E::Parse(_) | E::Divergent(_) => CliError::Config(e.to_string()),
            E::NonConvergence { .. } | E::Inconsistent(_) => CliError::Numerical(e.to_string()),
            E::InsufficientData(_) => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "htm", version, about = "Memory diagnostics for heavy-tailed stationary processes")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct GlobalArgs {
    /// TOML file with default values for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "HTM_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Directory receiving the JSON, text and CSV outputs.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Absolute tolerance of the excursion inversion.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a linear SαS series.
    Simulate(SimulateArgs),
    /// SRD/LRD verdict for an SαS moving average kernel.
    Classify(ClassifyArgs),
    /// Integrated excursion covariance by inversion, with a Monte Carlo check.
    Excursion(ExcursionArgs),
    /// Extremal coefficients, bounds and verdict for a max-stable model.
    Maxstable(MaxstableArgs),
    /// McCulloch estimate and codifference contrast fit of a data set.
    Fit(FitArgs),
    /// Parametric bootstrap of the contrast fit.
    Bootstrap(BootstrapArgs),
    /// Ingest, estimate, fit and bootstrap, emitting the per-lag boxplot table.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args, Default)]
pub struct SimulateArgs {
    /// Kernel literal, `series:` or `steps:` (see `literal`).
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Innovation scale.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Series length.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Upgrade indeterminate cases outside L^(alpha/2) to a conjectured LRD.
    #[arg(long)]
    pub conjecture: bool,
}

#[derive(Debug, Args, Default)]
pub struct ExcursionArgs {
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Measure literal, `dirac:u` or `mix:u1:w1,...`.
    #[arg(long)]
    pub measure: Option<String>,
    /// Comma-separated lags.
    #[arg(long)]
    pub lags: Option<String>,
    /// Monte Carlo paths per lag; 0 skips the check.
    #[arg(long)]
    pub mc_paths: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct MaxstableArgs {
    /// Model literal, e.g. `br:gamma=12*log1p(|t|)`.
    #[arg(long)]
    pub model: Option<String>,
    /// Fréchet index of the margins.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lags: Option<String>,
    /// Range of the reported partial integral of 2 - theta.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Level u = v of the cdf and covariance bounds.
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct DataArgs {
    /// CSV file; the bundled synthetic series when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long, value_enum)]
    pub transform: Option<Transform>,
}

#[derive(Debug, Args, Default)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Largest lag of the contrast.
    #[arg(long)]
    pub lags: Option<usize>,
    #[arg(long, value_enum)]
    pub power: Option<PowerArg>,
    /// Use this stability index instead of the McCulloch estimate.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Length of each simulated series.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub lags: Option<usize>,
    #[arg(long, value_enum)]
    pub power: Option<PowerArg>,
}

#[derive(Debug, Args, Default)]
pub struct ReproduceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub lags: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_enum)]
    pub power: Option<PowerArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerArg {
    /// Raw scale estimates, `2σ̂ - σ̂_t`.
    Unit,
    /// Scales raised to the estimated index, `2σ̂^α̂ - σ̂_t^α̂`.
    Alpha,
}

impl From<PowerArg> for CodifferencePower {
    fn from(p: PowerArg) -> Self {
        match p {
            PowerArg::Unit => CodifferencePower::Unit,
            PowerArg::Alpha => CodifferencePower::Alpha,
        }
    }
}

/// Contents of a `--config` TOML file. Every key is optional and is
/// overridden by the matching flag.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub kernel: Option<String>,
    pub model: Option<String>,
    pub measure: Option<String>,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    pub n: Option<usize>,
    pub lags: Option<String>,
    pub mc_paths: Option<usize>,
    pub horizon: Option<f64>,
    pub level: Option<f64>,
    pub conjecture: Option<bool>,
    pub data: Option<PathBuf>,
    pub column: Option<String>,
    pub transform: Option<Transform>,
    pub power: Option<PowerArg>,
    pub delta: Option<f64>,
    pub c: Option<f64>,
    pub reps: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Outcome of [`run`]: the report and what to print.
#[derive(Debug)]
pub struct Output {
    pub report: Report,
    pub rendered: String,
    pub written: Vec<String>,
}

/// Executes a parsed command line.
pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let file = match &cli.global.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let threads = cli.global.threads.or(file.threads);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let report = pool.install(|| commands::execute(&cli.command, &cli.global, &file))?;
    let format = cli.global.format.or(file.format).unwrap_or_default();
    let rendered = report.render(format);
    let written = match cli.global.out.as_ref().or(file.out.as_ref()) {
        Some(dir) => report.write_dir(dir)?,
        None => Vec::new(),
    };
    Ok(Output {
        report,
        rendered,
        written,
    })
}
