//! `tefs`: capture stereo datasets from the simulated engine, convert depth,
//! run the odometry baseline and evaluate trajectories.

mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "tefs",
    version,
    about = "Single-viewport stereo capture and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a capture session and write a dataset.
    Capture(CaptureArgs),
    /// Convert depth files between NDC and metric depth.
    ConvertDepth(ConvertArgs),
    /// Run stereo odometry on a dataset.
    Vo(VoArgs),
    /// Compare an estimated trajectory with ground truth.
    Evaluate(EvaluateArgs),
    /// Capture with TeFS (or naive swap) and the dual-viewport reference and compare.
    ValidateTefs(ValidateArgs),
    /// Tabulate several estimates against one ground truth.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Tefs,
    Naive,
    Dual,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ConditionArg {
    Sunny,
    Rain,
    Storm,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum AlignArg {
    None,
    Rigid,
    Similarity,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ProfileArg {
    SimNative,
    ScaledReciprocal,
    OffsetReciprocal,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SemanticsArg {
    Ray,
    Planar,
}

#[derive(Args, Clone)]
pub struct ScenarioOverrides {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the ego speed, km/h.
    #[arg(long)]
    speed: Option<f64>,
    /// Override the number of capture cycles.
    #[arg(long)]
    cycles: Option<usize>,
    /// Override the engine temporal disparity, ms.
    #[arg(long)]
    disparity_ms: Option<f64>,
}

#[derive(Args)]
pub struct CaptureArgs {
    #[command(flatten)]
    scenario: ScenarioOverrides,
    #[arg(long, value_enum, default_value = "tefs")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "sunny")]
    condition: ConditionArg,
    /// Output dataset directory; must not already hold a dataset.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct ConvertArgs {
    /// Input depth file.
    #[arg(long)]
    input: PathBuf,
    /// Output depth file.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 90.0)]
    hfov: f64,
    #[arg(long, default_value_t = 59.0)]
    vfov: f64,
    #[arg(long, default_value_t = 0.01)]
    near: f64,
    #[arg(long, default_value_t = 600.0)]
    far: f64,
    #[arg(long, value_enum, default_value = "sim-native")]
    profile: ProfileArg,
    /// Semantics of the metric output (NDC input) or input (with --to-ndc).
    #[arg(long, value_enum, default_value = "ray")]
    semantics: SemanticsArg,
    /// Convert metric depth to NDC instead.
    #[arg(long)]
    to_ndc: bool,
}

#[derive(Args)]
pub struct VoArgs {
    /// Dataset directory.
    #[arg(long)]
    dataset: PathBuf,
    /// Output directory for poses.txt and times.txt.
    #[arg(long)]
    out: PathBuf,
    /// Pixel noise added to the observations.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ignore points deeper than this many baselines (0 disables).
    #[arg(long, default_value_t = tefs_core::vo::DEFAULT_MAX_DEPTH_BASELINES)]
    max_depth_baselines: f64,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Estimated trajectory (pose file or directory).
    #[arg(long)]
    est: PathBuf,
    /// Ground-truth trajectory (pose file or directory).
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, value_enum, default_value = "none")]
    align: AlignArg,
    /// Rescale the estimate to the ground-truth length first.
    #[arg(long)]
    scale_correct: bool,
    /// Frame offset for RPE.
    #[arg(long, default_value_t = 1)]
    delta: usize,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    scenario: ScenarioOverrides,
    /// Method compared against the dual-viewport reference.
    #[arg(long, value_enum, default_value = "tefs")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "sunny")]
    condition: ConditionArg,
    /// Pixel noise for the odometry.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Keep both datasets under this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Ground-truth trajectory (pose file or directory).
    #[arg(long)]
    gt: PathBuf,
    /// Estimates as NAME=PATH; repeatable.
    #[arg(long = "est", required = true)]
    estimates: Vec<String>,
    #[arg(long, value_enum, default_value = "none")]
    align: AlignArg,
    #[arg(long)]
    scale_correct: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Outcome of a command that ran to completion.
pub enum Outcome {
    Success,
    /// A threshold check failed; the message names the failing row.
    ThresholdFailed(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            eprintln!("\n{}", Cli::command().render_usage());
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Capture(a) => commands::capture(a),
        Command::ConvertDepth(a) => commands::convert_depth(a),
        Command::Vo(a) => commands::vo(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::ValidateTefs(a) => commands::validate_tefs(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::ThresholdFailed(row)) => {
            eprintln!("threshold failed: {row}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
