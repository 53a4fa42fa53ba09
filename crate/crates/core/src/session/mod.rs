//! Experiment orchestration: counterbalanced schedules, trial log files, and
//! the session server that drives one interactive trial at a time.

mod engine;
mod log_io;
mod schedule;
mod server;
pub mod wire;

pub use engine::{replay_transcript, EngineConfig, SessionEngine, SessionEvent};
pub use log_io::{
    log_file_name, parse_trial_log, read_trial_log, trial_log_to_string, write_trial_log,
    LOG_EXTENSION,
};
pub use schedule::{build_schedule, williams_square, ConditionGrid, Schedule, ScheduleEntry};
pub use server::{Server, ServerOptions};
pub use wire::{ClientMessage, ClockMode, ServerMessage, TrialCondition, TrialStatus, WireClient};
