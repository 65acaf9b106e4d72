use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "vsbbm", version, about = "Two-speed branching Brownian motion experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the F-KPP equation and write front traces as CSV.
    FkppFront(FrontArgs),
    /// Simulate replicates and write them as JSONL.
    BbmSample(SampleArgs),
    /// Fit laws, martingales, localisation and clusters to a JSONL run.
    Analyze(AnalyzeArgs),
    /// Run acceptance criteria and print one PASS/FAIL line each.
    Acceptance(AcceptanceArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; all outputs are independent of this.
    #[arg(long, env = "VSBBM_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FrontArgs {
    /// Experiment config; repeat for several profiles.
    #[arg(long = "config", required = true)]
    pub configs: Vec<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; overrides `engine.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replicate count; overrides `engine.replicates`.
    #[arg(long)]
    pub replicates: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// JSONL file written by `bbm-sample`.
    pub records: PathBuf,
    /// Analysis settings; defaults to the config in the file header.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct AcceptanceArgs {
    /// One of: all, oracles, front, trend, mckean, lawfit, localisation,
    /// martingales, engineering.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also write the report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "VSBBM_THREADS")]
    pub threads: Option<usize>,
}
