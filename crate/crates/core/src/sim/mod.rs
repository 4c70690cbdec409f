//! Discrete-event execution of a schedule with perturbations, replanning
//! triggers and warm-started re-solves.

mod config;
mod episode;
mod scenario;
mod trace;
mod world;

use thiserror::Error;

pub use config::{ScriptAction, ScriptedEvent, SimConfig};
pub use episode::{run_episode, AdoptedPlan, EpisodeFailure, EpisodeMetrics, EpisodeOutcome, OPERATIONAL_TAG};
pub use scenario::{load_scenario, InstanceSource, Scenario, ScenarioError};
pub use trace::{busy_intervals, idle_time, parse_jsonl, to_jsonl, TraceEvent, TraceRecord, TRACE_VERSION};
pub use world::{detect_triggers, Detection, RobotState, Run, TaskState, TriggerEvent, TriggerKind, WorldModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("initial schedule is invalid: {0}")]
    InitialSchedule(String),
}
