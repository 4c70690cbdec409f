use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{ProblemInstance, Task};

use super::SimError;

/// A scripted world change at a fixed simulation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedEvent {
    pub time: f64,
    #[serde(flatten)]
    pub action: ScriptAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScriptAction {
    /// The robot stops working; its running task goes back to pending.
    RobotFailure { robot: String },
    /// Perception says the task is moot; it is dropped from the plan.
    Contradiction { task: String },
    /// A new task appears. `travel` gives one entry per robot.
    Discovery {
        task: Task,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        travel: Option<Vec<f64>>,
    },
}

impl ScriptedEvent {
    pub fn robot_failure(time: f64, robot: impl Into<String>) -> Self {
        Self { time, action: ScriptAction::RobotFailure { robot: robot.into() } }
    }

    pub fn contradiction(time: f64, task: impl Into<String>) -> Self {
        Self { time, action: ScriptAction::Contradiction { task: task.into() } }
    }

    pub fn discovery(time: f64, task: Task) -> Self {
        Self { time, action: ScriptAction::Discovery { task, travel: None } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    /// Sigma of the multiplicative lognormal noise on durations.
    pub duration_noise: f64,
    /// A running task is late once it exceeds its planned duration by this
    /// fraction.
    pub delay_threshold: f64,
    /// Chance that an execution attempt fails.
    pub failure_prob: f64,
    /// Attempts per task before it is given up.
    pub max_attempts: u32,
    /// Replan on every completion instead of only releasing successors.
    pub replan_on_completion: bool,
    pub events: Vec<ScriptedEvent>,
    /// Fixed duration multipliers per task id, applied on top of noise.
    pub slowdowns: BTreeMap<String, f64>,
    /// Simulation-time cap.
    pub max_time: Option<f64>,
    pub max_replans: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            duration_noise: 0.0,
            delay_threshold: 0.5,
            failure_prob: 0.0,
            max_attempts: 2,
            replan_on_completion: false,
            events: Vec::new(),
            slowdowns: BTreeMap::new(),
            max_time: None,
            max_replans: 1000,
        }
    }
}

impl SimConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.duration_noise = sigma;
        self
    }

    pub fn with_event(mut self, event: ScriptedEvent) -> Self {
        self.events.push(event);
        self
    }

    pub fn with_slowdown(mut self, task: impl Into<String>, factor: f64) -> Self {
        self.slowdowns.insert(task.into(), factor);
        self
    }

    /// Checks parameter ranges and that the script only names known robots
    /// and introduces fresh task ids.
    pub fn validate(&self, instance: &ProblemInstance) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if !(self.delay_threshold > 0.0 && self.delay_threshold.is_finite()) {
            return bad(format!("delay_threshold must be positive, got {}", self.delay_threshold));
        }
        if !(0.0..=1.0).contains(&self.failure_prob) {
            return bad(format!("failure_prob must lie in [0, 1], got {}", self.failure_prob));
        }
        if !(self.duration_noise >= 0.0 && self.duration_noise.is_finite()) {
            return bad(format!("duration_noise must be nonnegative, got {}", self.duration_noise));
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1".into());
        }
        if let Some((id, f)) = self.slowdowns.iter().find(|(_, f)| !(**f > 0.0 && f.is_finite())) {
            return bad(format!("slowdown for `{id}` must be positive, got {f}"));
        }
        let mut known: BTreeSet<String> = instance.tasks().iter().map(|t| t.id.clone()).collect();
        for ev in &self.events {
            if !(ev.time >= 0.0 && ev.time.is_finite()) {
                return bad(format!("event time {} is not a nonnegative number", ev.time));
            }
            match &ev.action {
                ScriptAction::RobotFailure { robot } if instance.robot_index(robot).is_none() => {
                    return bad(format!("event names unknown robot `{robot}`"));
                }
                ScriptAction::Discovery { task, travel } => {
                    if !known.insert(task.id.clone()) {
                        return bad(format!("discovered task `{}` reuses an existing id", task.id));
                    }
                    if travel.as_ref().is_some_and(|t| t.len() != instance.n_robots()) {
                        return bad(format!("travel row for `{}` needs {} entries", task.id, instance.n_robots()));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}
