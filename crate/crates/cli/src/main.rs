//! `dpscale`: profile, plan, replay and sweep dynamic precision scaling.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for data errors
//! (unreadable or malformed inputs, mismatched schedules, failed runs).

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpscale::{PolicyKind, PrecisionFormat, WorkloadInput};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dpscale", version, about = "Dynamic precision scaling for floating-point kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the bundled workloads.
    List,
    /// Run the fault-injection campaign and write the loss matrices.
    Profile(ProfileArgs),
    /// Turn loss matrices into an omission schedule.
    Plan(PlanArgs),
    /// Replay a workload under a schedule and report accuracy and energy.
    Run(RunArgs),
    /// Plan and replay every (policy, target) pair into one CSV.
    Sweep(SweepArgs),
    /// Emit plot-ready data from run reports and loss matrices.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct WorkloadArgs {
    #[arg(long)]
    pub workload: String,
    /// `generated`, `cycle:N` or an edge-list path (PageRank).
    #[arg(long, default_value = "generated")]
    pub input: WorkloadInput,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// `single` or `double`; defaults to the workload's native format.
    #[arg(long)]
    pub precision: Option<PrecisionFormat>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub workload: WorkloadArgs,
    /// Profile only the lowest N mantissa bits.
    #[arg(long)]
    pub bits: Option<u32>,
    /// Writes `<prefix>.s0.csv`, `<prefix>.s1.csv` and `<prefix>.meta.json`.
    #[arg(long)]
    pub out_prefix: PathBuf,
    /// Run experiments on one thread.
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Prefix the matrices were written under.
    #[arg(long)]
    pub matrices: PathBuf,
    #[arg(long)]
    pub policy: PolicyKind,
    /// Accuracy-loss target (dps, dps+, sps+).
    #[arg(long)]
    pub target: Option<f64>,
    /// Fraction of mantissa bits to omit (sps).
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Schedule JSON path; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub workload: WorkloadArgs,
    #[arg(long)]
    pub schedule: PathBuf,
    /// Report JSON path; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file overriding cache geometry, EPI values and energy scaling.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub workload: WorkloadArgs,
    /// Reuse previously written matrices instead of profiling.
    #[arg(long)]
    pub matrices: Option<PathBuf>,
    /// Bits to profile when no matrices are given.
    #[arg(long)]
    pub bits: Option<u32>,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.15,0.2")]
    pub targets: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "dps,dps+,sps+")]
    pub policies: Vec<PolicyKind>,
    /// Omitted fractions used for sps rows.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
    pub fractions: Vec<f64>,
    /// CSV path; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub run_reports: Vec<PathBuf>,
    /// Matrix prefix for the loss heatmap.
    #[arg(long)]
    pub matrices: Option<PathBuf>,
    /// Histogram bucket edges for per-point errors.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.15,0.2")]
    pub thresholds: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
    /// Output directory for csv, output file for json (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::List => commands::list(),
        Command::Profile(a) => commands::profile(&a),
        Command::Plan(a) => commands::plan(&a),
        Command::Run(a) => commands::run(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Report(a) => artifacts::report(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
