use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "qicert",
    version,
    about = "Quasi-isometry certificates for random column submatrices"
)]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the coherence hypotheses and report the failure bound.
    Certify(CertifyArgs),
    /// Run a Monte Carlo experiment.
    Experiment(ExperimentArgs),
    /// Check an exact oracle.
    Verify(VerifyArgs),
    /// Write a generated matrix as CSV.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// CSV matrix file.
    #[arg(long, conflicts_with = "gen")]
    pub matrix: Option<PathBuf>,
    /// Generator, e.g. `gaussian_unit:n=32,p=64` or `spikes_sines:n=16`.
    #[arg(long)]
    pub gen: Option<String>,
    /// Seed for random generators.
    #[arg(long, default_value_t = 0)]
    pub gen_seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Statistics without a matrix: `mu=..,op_norm=..,n=..,p=..`.
    #[arg(long, conflicts_with_all = ["matrix", "gen"])]
    pub scalars: Option<String>,
    #[arg(long)]
    pub r: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub s: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    Failure,
    Decoupling,
    Poissonization,
    Intermediate,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Confidence level parameter of the one-sided upper bounds.
    #[arg(long, default_value_t = qicert::montecarlo::DEFAULT_GAMMA)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    pub kind: ExperimentKind,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub mc: McArgs,
    /// Thresholds: `a,b,c` or `linspace(a,b,k)`. Defaults to 8 points in (0, 2‖H‖).
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub u: Option<f64>,
    #[arg(long)]
    pub v: Option<f64>,
    /// Used to tune `u` and `v` when they are not given.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyKind {
    Chaos,
    Chernoff,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    pub kind: VerifyKind,
    /// Chaos coefficients as `i,j,x` lines (1-based).
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Number of random chaos instances when no file is given.
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    #[arg(long, default_value_t = 3)]
    pub p_min: usize,
    #[arg(long, default_value_t = 12)]
    pub p_max: usize,
    /// Dimension of the diagonal Chernoff ensemble.
    #[arg(long, default_value_t = 64)]
    pub d: usize,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Thresholds: `a,b,c` or `linspace(a,b,k)`.
    #[arg(long)]
    pub grid: Option<String>,
    #[command(flatten)]
    pub mc: McArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}
