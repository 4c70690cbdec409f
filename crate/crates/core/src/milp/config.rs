use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Schedule;

use super::warm::WarmStart;

/// Caps and stopping rules for the exact search.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    /// Wall-clock cap in seconds.
    pub time_limit: f64,
    /// Stop once `(incumbent - bound) / |incumbent|` is at most this.
    pub gap_rel: f64,
    pub node_limit: Option<u64>,
    pub warm_start: Option<WarmStart>,
    /// Seed for randomized helpers. The tree search itself is deterministic.
    pub rng_seed: u64,
    /// Search workers; 1 is the sequential reference mode.
    pub workers: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { time_limit: 120.0, gap_rel: 0.01, node_limit: None, warm_start: None, rng_seed: 0, workers: 1 }
    }
}

impl SolveConfig {
    pub fn with_time_limit(mut self, seconds: f64) -> Self {
        self.time_limit = seconds;
        self
    }

    pub fn with_gap(mut self, gap_rel: f64) -> Self {
        self.gap_rel = gap_rel;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_node_limit(mut self, nodes: u64) -> Self {
        self.node_limit = Some(nodes);
        self
    }

    pub fn with_warm_start(mut self, warm: WarmStart) -> Self {
        self.warm_start = Some(warm);
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.time_limit > 0.0) {
            return Err(SolveError::InvalidConfig(format!("time_limit must be positive, got {}", self.time_limit)));
        }
        if !(0.0..1.0).contains(&self.gap_rel) {
            return Err(SolveError::InvalidConfig(format!("gap_rel must lie in [0, 1), got {}", self.gap_rel)));
        }
        if self.workers == 0 {
            return Err(SolveError::InvalidConfig("workers must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("frozen entry for task `{task}` is infeasible: {reason}")]
    FrozenInfeasible { task: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    GapStop,
    TimeLimitIncumbent,
    TimeLimitNoIncumbent,
    Infeasible,
    /// Search produced nothing better than the fallback allocator's plan.
    Fallback,
    /// Produced by a heuristic allocator; no bound is claimed.
    Heuristic,
}

impl SolveStatus {
    pub fn has_schedule(self) -> bool {
        !matches!(self, SolveStatus::TimeLimitNoIncumbent | SolveStatus::Infeasible)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One point of the incumbent/bound trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSample {
    pub nodes: u64,
    pub elapsed: f64,
    pub incumbent: f64,
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub schedule: Option<Schedule>,
    pub objective: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub status: SolveStatus,
    pub nodes_explored: u64,
    pub wall_time: f64,
    pub bound_trace: Vec<BoundSample>,
}

impl SolveResult {
    pub(crate) fn heuristic(schedule: Schedule, wall_time: f64) -> Self {
        let objective = schedule.objective;
        Self {
            schedule: Some(schedule),
            objective,
            lower_bound: 0.0,
            gap: 1.0,
            status: SolveStatus::Heuristic,
            nodes_explored: 0,
            wall_time,
            bound_trace: Vec::new(),
        }
    }
}

pub(crate) fn relative_gap(objective: f64, lower_bound: f64) -> f64 {
    ((objective - lower_bound) / objective.abs().max(1e-9)).max(0.0)
}
