//! `runevt`: ingest results, fit, diagnose, forecast and simulate.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "runevt", version, about = "Extreme-value models for running world records")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Deduplicate raw results and select exceedances above a count threshold.
    Ingest(IngestArgs),
    /// Mean-residual-life curve for threshold choice.
    Mrl(MrlArgs),
    /// Fit the joint model by maximum likelihood.
    Fit(FitArgs),
    /// QQ and yearly-count diagnostics.
    Diagnose(DiagnoseArgs),
    /// Forecast functionals of a fitted model.
    Forecast(ForecastArgs),
    /// Convert a post-2018 time to its no-footwear equivalent.
    Correct(CorrectArgs),
    /// Simulate exceedances (and optionally raw results) from a model.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    Auto,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Json,
    Text,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// Results CSV, an earlier ingest JSON, or `-` for stdin.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: InputFormat,
    /// Exceedances kept per discipline.
    #[arg(long)]
    pub target: Option<usize>,
    /// Restrict to these disciplines (repeatable).
    #[arg(long = "discipline", short)]
    pub disciplines: Vec<String>,
    #[arg(long)]
    pub from: Option<i32>,
    #[arg(long)]
    pub to: Option<i32>,
    /// Write the JSON here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// CSV report of rejected rows.
    #[arg(long)]
    pub rejects: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct MrlArgs {
    /// Results CSV.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub discipline: String,
    /// Slowest candidate threshold, as a clock time.
    #[arg(long)]
    pub slowest: String,
    /// Fastest candidate threshold, as a clock time.
    #[arg(long)]
    pub fastest: String,
    #[arg(long, default_value_t = 40)]
    pub points: usize,
    #[arg(long)]
    pub from: Option<i32>,
    #[arg(long)]
    pub to: Option<i32>,
    /// Also write the curve as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Exceedance JSON from `ingest` or `simulate`.
    #[arg(long, short)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_evaluations: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Drop the footwear step.
    #[arg(long)]
    pub no_gamma: bool,
    /// Drop the scale trend.
    #[arg(long)]
    pub no_delta: bool,
    /// Separate shape per discipline.
    #[arg(long)]
    pub per_discipline_xi: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct DiagnoseArgs {
    /// Model, fit result, or `fit` output; defaults to the published estimates.
    #[arg(long, short)]
    pub model: Option<PathBuf>,
    #[arg(long, short)]
    pub data: PathBuf,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// QQ for one discipline instead of the pooled plot.
    #[arg(long)]
    pub discipline: Option<String>,
    #[arg(long)]
    pub qq_csv: Option<PathBuf>,
    #[arg(long)]
    pub qq_svg: Option<PathBuf>,
    #[arg(long)]
    pub counts_csv: Option<PathBuf>,
    #[arg(long)]
    pub counts_svg: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ForecastArgs {
    #[command(subcommand)]
    pub action: ForecastAction,
    /// Model, fit result, or `fit` output; defaults to the published estimates.
    #[arg(long, short, global = true)]
    pub model: Option<PathBuf>,
    #[arg(long, global = true, default_value = "with-aft")]
    pub mode: String,
    #[arg(long, global = true)]
    pub origin_year: Option<i32>,
    #[arg(long, global = true)]
    pub horizon_cap: Option<i32>,
    /// Bootstrap replicates for an interval; needs a fit result and `--data`.
    #[arg(long, global = true)]
    pub bootstrap: Option<usize>,
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub ci_level: Option<f64>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: OutputFormat,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Record to beat: defaults to the standing record at the end of 2019.
#[derive(Debug, Args, Serialize)]
pub struct RecordArgs {
    #[arg(long, short, default_value = "marM")]
    pub discipline: String,
    /// Record time as a clock string.
    #[arg(long)]
    pub record: Option<String>,
    #[arg(long)]
    pub record_year: Option<i32>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum ForecastAction {
    /// Fastest achievable time (upper endpoint).
    Ultimate {
        #[arg(long, short, default_value = "marM")]
        discipline: String,
        #[arg(long)]
        year: i32,
    },
    /// Expected time of a new record set in `year`.
    ExpectedRecord {
        #[command(flatten)]
        record: RecordArgs,
        #[arg(long)]
        year: i32,
    },
    /// Probability the record falls in `year`.
    RecordProb {
        #[command(flatten)]
        record: RecordArgs,
        #[arg(long)]
        year: i32,
    },
    /// Probability the record falls before `year`.
    RecordBefore {
        #[command(flatten)]
        record: RecordArgs,
        #[arg(long)]
        year: i32,
    },
    /// Earliest year by which the record falls with probability `level`.
    EarliestYear {
        #[command(flatten)]
        record: RecordArgs,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Expected years until the record falls.
    WaitingTime {
        #[command(flatten)]
        record: RecordArgs,
    },
    /// Probability of a time under `target` in `year` (or by `year`).
    SubThreshold {
        #[arg(long, short, default_value = "marM")]
        discipline: String,
        #[arg(long)]
        target: String,
        #[arg(long)]
        year: i32,
        #[arg(long)]
        cumulative: bool,
    },
    /// Time in `target` as rare as `time` in `source`.
    Equivalent {
        #[arg(long)]
        source: String,
        #[arg(long)]
        target: String,
        #[arg(long)]
        time: String,
        #[arg(long)]
        year: i32,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct CorrectArgs {
    #[arg(long, short)]
    pub model: Option<PathBuf>,
    #[arg(long, short)]
    pub discipline: String,
    #[arg(long)]
    pub year: i32,
    #[arg(long)]
    pub time: String,
    #[arg(long, value_enum, default_value = "json")]
    pub format: OutputFormat,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, short)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 2001)]
    pub from: i32,
    #[arg(long, default_value_t = 2019)]
    pub to: i32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Reset thresholds to give this many expected exceedances per discipline.
    #[arg(long)]
    pub expected_count: Option<f64>,
    /// Athletes per discipline for raw results output.
    #[arg(long)]
    pub pool: Option<usize>,
    /// Raw results CSV (requires `--pool`).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Mrl(a) => commands::mrl(a),
        Command::Fit(a) => commands::fit(a),
        Command::Diagnose(a) => commands::diagnose(a),
        Command::Forecast(a) => commands::forecast(a),
        Command::Correct(a) => commands::correct(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(output::exit_code(&e))
        }
    }
}
