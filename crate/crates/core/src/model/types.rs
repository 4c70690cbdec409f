use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Release time and optional deadline for a task, in seconds.
///
/// Serialized as a two-element array `[release, deadline]`; the deadline may
/// be `null` when only a release time applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, Option<f64>)", into = "(f64, Option<f64>)")]
pub struct TimeWindow {
    pub release: f64,
    pub deadline: Option<f64>,
}

impl TimeWindow {
    pub fn new(release: f64, deadline: Option<f64>) -> Self {
        Self { release, deadline }
    }

    pub fn release_only(release: f64) -> Self {
        Self { release, deadline: None }
    }
}

impl From<(f64, Option<f64>)> for TimeWindow {
    fn from((release, deadline): (f64, Option<f64>)) -> Self {
        Self { release, deadline }
    }
}

impl From<TimeWindow> for (f64, Option<f64>) {
    fn from(w: TimeWindow) -> Self {
        (w.release, w.deadline)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskConstraints {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_window: Option<TimeWindow>,
}

impl TaskConstraints {
    fn is_empty(&self) -> bool {
        self.location.is_none() && self.time_window.is_none()
    }
}

/// One node of the task graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub duration: f64,
    #[serde(default)]
    pub dependencies: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub required_capabilities: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "TaskConstraints::is_empty")]
    pub constraints: TaskConstraints,
}

impl Task {
    pub fn new(id: impl Into<String>, duration: f64) -> Self {
        Self {
            id: id.into(),
            description: String::new(),
            duration,
            dependencies: Vec::new(),
            required_capabilities: BTreeSet::new(),
            constraints: TaskConstraints::default(),
        }
    }

    pub fn with_dependencies<I, S>(mut self, deps: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.dependencies = deps.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_capabilities<I, S>(mut self, caps: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.required_capabilities = caps.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_description(mut self, text: impl Into<String>) -> Self {
        self.description = text.into();
        self
    }

    pub fn with_location(mut self, location: impl Into<String>) -> Self {
        self.constraints.location = Some(location.into());
        self
    }

    pub fn with_time_window(mut self, window: TimeWindow) -> Self {
        self.constraints.time_window = Some(window);
        self
    }

    pub fn location(&self) -> Option<&str> {
        self.constraints.location.as_deref()
    }

    pub fn time_window(&self) -> Option<TimeWindow> {
        self.constraints.time_window
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotProfile {
    pub id: String,
    #[serde(default)]
    pub capabilities: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home_location: Option<String>,
}

impl RobotProfile {
    pub fn new<I, S>(id: impl Into<String>, caps: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            id: id.into(),
            capabilities: caps.into_iter().map(Into::into).collect(),
            speed: None,
            home_location: None,
        }
    }

    pub fn can_perform(&self, task: &Task) -> bool {
        task.required_capabilities.is_subset(&self.capabilities)
    }
}

/// Robot-major `n x m` matrix of suitability scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FitnessMatrix {
    values: Vec<Vec<f64>>,
}

impl FitnessMatrix {
    /// Wraps already-normalized values. Range and shape are checked by
    /// instance validation, not here.
    pub fn from_rows(values: Vec<Vec<f64>>) -> Self {
        Self { values }
    }

    pub fn uniform(n: usize, m: usize, value: f64) -> Self {
        Self { values: vec![vec![value; m]; n] }
    }

    pub fn get(&self, robot: usize, task: usize) -> f64 {
        self.values[robot][task]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn n_robots(&self) -> usize {
        self.values.len()
    }

    pub fn n_tasks(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn column(&self, task: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[task]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityMask {
    values: Vec<Vec<bool>>,
}

impl FeasibilityMask {
    pub fn from_profiles(robots: &[RobotProfile], tasks: &[Task]) -> Self {
        let values = robots
            .iter()
            .map(|r| tasks.iter().map(|t| r.can_perform(t)).collect())
            .collect();
        Self { values }
    }

    #[inline]
    pub fn get(&self, robot: usize, task: usize) -> bool {
        self.values[robot][task]
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TravelMode {
    /// `tau * travel[i][j]` is added to the assignment cost.
    #[default]
    CostTerm,
    /// `travel[i][j]` is added to the task duration when robot `i` runs it.
    DurationAugment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    #[serde(default = "CostParams::default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub travel: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub travel_mode: TravelMode,
}

impl CostParams {
    fn default_gamma() -> f64 {
        1.0
    }

    /// Travel contribution to the cost of `(robot, task)`; zero when travel is
    /// absent or accounted for in durations.
    pub fn travel_cost(&self, robot: usize, task: usize) -> f64 {
        match (&self.travel, self.travel_mode) {
            (Some(t), TravelMode::CostTerm) => self.tau * t[robot][task],
            _ => 0.0,
        }
    }

    /// Extra time added to a task's duration on `robot`.
    pub fn travel_time(&self, robot: usize, task: usize) -> f64 {
        match (&self.travel, self.travel_mode) {
            (Some(t), TravelMode::DurationAugment) => t[robot][task],
            _ => 0.0,
        }
    }
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            gamma: Self::default_gamma(),
            tau: 0.0,
            travel: None,
            travel_mode: TravelMode::CostTerm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl ObjectiveWeights {
    pub fn makespan_only() -> Self {
        Self { alpha: 1.0, beta: 0.0, lambda: 0.0 }
    }
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 0.01, lambda: 0.001 }
    }
}
