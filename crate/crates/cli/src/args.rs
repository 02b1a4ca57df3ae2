use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dynkc_core::Mode;

#[derive(Debug, Parser)]
#[command(
    name = "dynkc",
    version,
    about = "Dynamic k-center clustering experiments"
)]
pub struct Cli {
    /// More log output (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset and/or an update trace.
    Generate(GenerateArgs),
    /// Replay a trace for every (epsilon, k) pair and record timings and quality.
    Run(RunArgs),
    /// Replay a trace and check every net after each event.
    Validate(ValidateArgs),
    /// Rebuild the aggregate and tables from stored per-run JSON files.
    Aggregate(AggregateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    List,
    Tree,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::List => Mode::List,
            ModeArg::Tree => Mode::Tree,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceKind {
    /// Insert in order, delete each point `window` insertions later.
    Sliding,
    /// Random insert/delete/query mix over a shuffled supply.
    Mix,
}

/// Where points come from.
#[derive(Debug, Clone, Args)]
pub struct PointSource {
    /// CSV file with `x,y` lines.
    #[arg(long, conflicts_with = "random")]
    pub points: Option<PathBuf>,
    /// Generate Gaussian blobs instead of reading a file.
    #[arg(long)]
    pub random: bool,
    /// Number of blob centers.
    #[arg(long, default_value_t = 100)]
    pub seeds: usize,
    /// Points per blob.
    #[arg(long, default_value_t = 200)]
    pub per: usize,
    /// Per-coordinate variance of each blob.
    #[arg(long, default_value_t = 0.001)]
    pub variance: f64,
    /// Seed for every random draw (overridden by DYNKC_SEED).
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// How the update trace is produced.
#[derive(Debug, Clone, Args)]
pub struct TraceParams {
    #[arg(long, value_enum)]
    pub trace: Option<TraceKind>,
    /// Sliding window length.
    #[arg(long, default_value_t = 6000)]
    pub window: usize,
    /// Query after this many insertions (sliding window).
    #[arg(long, default_value_t = 200)]
    pub query_every: usize,
    /// Deletion probability per step (random mix).
    #[arg(long, default_value_t = 0.3)]
    pub delete_frac: f64,
    /// Stop the random mix after this many events.
    #[arg(long)]
    pub max_events: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub source: PointSource,
    #[command(flatten)]
    pub trace: TraceParams,
    /// Output directory; receives points.csv and/or trace.txt.
    #[arg(long)]
    pub out: PathBuf,
}

/// Engine settings shared by `run` and `validate`.
#[derive(Debug, Clone, Args)]
pub struct EngineParams {
    /// Approximation slack; comma separated list.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.5, 1.0, 4.0])]
    pub epsilon: Vec<f64>,
    /// Number of centers; comma separated list.
    #[arg(long, value_delimiter = ',', default_values_t = vec![20usize, 50, 100, 200])]
    pub k: Vec<usize>,
    #[arg(long, value_enum, default_value = "list")]
    pub mode: ModeArg,
    /// Navigation-list radius multiplier (list mode, at least 4).
    #[arg(long, default_value_t = 4.0)]
    pub psi: f64,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: PointSource,
    #[command(flatten)]
    pub trace: TraceParams,
    /// Replay this trace file instead of generating one.
    #[arg(long)]
    pub trace_file: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineParams,
    #[arg(long, default_value_t = 10)]
    pub repeats: u32,
    /// Worker threads for independent (epsilon, k, repeat) cells.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Time a fresh greedy solution at every query for comparison.
    #[arg(long)]
    pub compare_gonzalez: bool,
    /// Output directory for per-run JSON, the aggregate and tables.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub source: PointSource,
    #[command(flatten)]
    pub trace: TraceParams,
    #[arg(long)]
    pub trace_file: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineParams,
    /// Check the nets after every N-th event.
    #[arg(long, default_value_t = 1)]
    pub every: usize,
    /// Corrupt a stored counter after this event to exercise the checker.
    #[arg(long, hide = true)]
    pub inject_fault: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct AggregateArgs {
    /// Directory of per-run JSON files written by `run`.
    #[arg(long)]
    pub runs: PathBuf,
    /// Where aggregate.json and tables.md go.
    #[arg(long)]
    pub out: PathBuf,
}
