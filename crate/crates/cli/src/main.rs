//! `sim`: headless runs, batch sweeps, the closed-form correction, metrics
//! reports, schedules and the interactive session server.
//!
//! Exit codes: 0 success, 1 runtime error, 2 trial timed out (`run`),
//! 64 usage error, 65 invalid frame input (`correct`).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use camalign_core::session::ClockMode;
use camalign_core::sim::SimMode;
use clap::{Args, Parser, Subcommand, ValueEnum};

use output::Format;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_TIMEOUT: u8 = 2;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_DATA: u8 = 65;

#[derive(Debug, Parser)]
#[command(
    name = "sim",
    version,
    about = "Eye-in-hand camera roll correction simulator"
)]
struct Cli {
    /// TOML file overriding simulator, scene, operator, grid and server defaults.
    #[arg(long, global = true, env = "SIM_CONFIG")]
    config: Option<PathBuf>,

    /// Report format.
    #[arg(long, global = true, value_enum, default_value = "table")]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one headless trial with a scripted operator.
    Run(RunArgs),
    /// Run every cell of a condition grid.
    Batch(BatchArgs),
    /// Print the roll correction angle in degrees.
    Correct(CorrectArgs),
    /// Summarize a directory of trial logs.
    Metrics(MetricsArgs),
    /// Generate a counterbalanced trial order.
    Schedule(ScheduleArgs),
    /// Serve interactive trials over TCP until interrupted.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn on(self) -> bool {
        self == OnOff::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OperatorKind {
    NaiveP,
    Adaptive,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Paper,
    Free,
}

impl From<ModeArg> for SimMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Paper => SimMode::Paper,
            ModeArg::Free => SimMode::Free,
        }
    }
}

#[derive(Debug, Args)]
struct OperatorArgs {
    /// Scripted operator policy.
    #[arg(long, value_enum)]
    operator: Option<OperatorKind>,
    /// Lateral gain.
    #[arg(long)]
    gain: Option<f64>,
    /// Depth gain.
    #[arg(long)]
    gain_z: Option<f64>,
    /// Number of recent motion pairs the adaptive operator fits.
    #[arg(long)]
    window: Option<usize>,
    /// Command script for `--operator replay`: one `x y z` triple per line.
    #[arg(long)]
    script: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    roll: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pitch: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    yaw: f64,
    #[arg(long, value_enum, default_value = "off")]
    correction: OnOff,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[command(flatten)]
    operator: OperatorArgs,
    /// Step budget; defaults to the trial's maximum duration.
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the trial log here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the exact applied command script here (replayable).
    #[arg(long)]
    script_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GridKind {
    Paper,
    Custom,
}

#[derive(Debug, Args)]
struct BatchArgs {
    #[arg(long, value_enum, default_value = "paper")]
    grid: GridKind,
    /// Custom grid roll levels in degrees.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    rolls: Option<Vec<f64>>,
    /// Custom grid pitch:yaw pairs in degrees, e.g. `0:0,45:45`.
    #[arg(long, value_delimiter = ',')]
    pitch_yaw: Option<Vec<String>>,
    /// Custom grid correction levels.
    #[arg(long, value_enum, value_delimiter = ',')]
    corrections: Option<Vec<OnOff>>,
    #[arg(long)]
    reps: Option<u32>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[command(flatten)]
    operator: OperatorArgs,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for one trial log per trial.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct CorrectArgs {
    /// Teleoperation frame as nine reals: X, Y, Z axes in turn.
    #[arg(
        long,
        num_args = 9,
        allow_negative_numbers = true,
        requires = "actual_frame",
        conflicts_with = "rpy"
    )]
    teleop_frame: Option<Vec<f64>>,
    /// Camera frame as nine reals: X, Y, Z axes in turn.
    #[arg(
        long,
        num_args = 9,
        allow_negative_numbers = true,
        requires = "teleop_frame"
    )]
    actual_frame: Option<Vec<f64>>,
    /// Camera roll, pitch, yaw in degrees; the teleoperation frame is the identity.
    #[arg(long, num_args = 3, allow_negative_numbers = true, value_names = ["ROLL", "PITCH", "YAW"])]
    rpy: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PairBy {
    Condition,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// Directory containing `*.trial.jsonl` files.
    #[arg(long)]
    in_dir: PathBuf,
    #[arg(long, value_enum, default_value = "condition")]
    pair_by: PairBy,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    #[arg(long)]
    subjects: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the schedule as TSV here instead of printing it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    host: Option<String>,
    /// TCP port; 0 picks a free one.
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, value_enum)]
    clock: Option<ClockArg>,
    #[arg(long)]
    display_hz: Option<f64>,
    /// Directory for finished trial logs.
    #[arg(long)]
    log_dir: Option<PathBuf>,
    /// Follow this subject's scheduled trial order.
    #[arg(long)]
    subject: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClockArg {
    Realtime,
    Lockstep,
}

impl From<ClockArg> for ClockMode {
    fn from(c: ClockArg) -> Self {
        match c {
            ClockArg::Realtime => ClockMode::Realtime,
            ClockArg::Lockstep => ClockMode::Lockstep,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match commands::dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("sim: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
