use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::cost::{completion_by_robot, weighted};
use super::instance::ProblemInstance;

/// One row of the schedule dictionary: who runs what, and when.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub task_id: String,
    pub robot_id: String,
    pub start: f64,
    pub end: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, Value>,
}

impl ScheduleEntry {
    pub fn new(task_id: impl Into<String>, robot_id: impl Into<String>, start: f64, end: f64) -> Self {
        Self {
            task_id: task_id.into(),
            robot_id: robot_id.into(),
            start,
            end,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Whether this entry is pinned by a warm start.
    pub fn is_frozen(&self) -> bool {
        self.metadata.get(FROZEN_KEY).and_then(Value::as_bool).unwrap_or(false)
    }
}

/// Metadata key marking an entry as completed or in-progress work.
pub const FROZEN_KEY: &str = "frozen";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub entries: Vec<ScheduleEntry>,
    pub makespan: f64,
    pub per_robot_completion: BTreeMap<String, f64>,
    pub objective: f64,
}

/// On-disk schedule: either the bare entry array or a full object with
/// cached completion fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleFile {
    Entries(Vec<ScheduleEntry>),
    Full(Schedule),
}

impl Schedule {
    /// Builds a schedule and derives makespan, per-robot completion and the
    /// objective from the entries. Entries are sorted by `(start, task_id)`.
    ///
    /// The objective sums the cost terms of whatever entries are present and
    /// does not require full coverage; see [`super::objective_value`] for the
    /// strict version.
    pub fn new(mut entries: Vec<ScheduleEntry>, instance: &ProblemInstance) -> Self {
        entries.sort_by(|a, b| a.start.total_cmp(&b.start).then_with(|| a.task_id.cmp(&b.task_id)));
        let per_robot_completion = completion_by_robot(&entries, instance);
        let makespan = entries.iter().map(|e| e.end).fold(0.0, f64::max);
        let completion: Vec<f64> = instance
            .robots()
            .iter()
            .map(|r| per_robot_completion.get(&r.id).copied().unwrap_or(0.0))
            .collect();
        let cost: f64 = entries
            .iter()
            .filter_map(|e| Some(instance.cost(instance.robot_index(&e.robot_id)?, instance.task_index(&e.task_id)?)))
            .sum();
        let objective = weighted(instance, &completion, cost);
        Self { entries, makespan, per_robot_completion, objective }
    }

    /// Builds a schedule from entries alone, without an instance. Completion
    /// is only known for robots that appear in the entries.
    pub fn from_entries_unchecked(entries: Vec<ScheduleEntry>) -> Self {
        let mut per_robot_completion = BTreeMap::new();
        for e in &entries {
            let slot = per_robot_completion.entry(e.robot_id.clone()).or_insert(0.0_f64);
            *slot = slot.max(e.end);
        }
        let makespan = entries.iter().map(|e| e.end).fold(0.0, f64::max);
        Self { entries, makespan, per_robot_completion, objective: f64::NAN }
    }

    pub fn empty(instance: &ProblemInstance) -> Self {
        Self::new(Vec::new(), instance)
    }

    pub fn entry(&self, task_id: &str) -> Option<&ScheduleEntry> {
        self.entries.iter().find(|e| e.task_id == task_id)
    }

    /// Entries on `robot_id` in start order.
    pub fn robot_entries<'a>(&'a self, robot_id: &'a str) -> impl Iterator<Item = &'a ScheduleEntry> + 'a {
        self.entries.iter().filter(move |e| e.robot_id == robot_id)
    }

    /// Sum of assignment costs over the entries.
    pub fn assignment_cost(&self, instance: &ProblemInstance) -> f64 {
        self.entries
            .iter()
            .filter_map(|e| Some(instance.cost(instance.robot_index(&e.robot_id)?, instance.task_index(&e.task_id)?)))
            .sum()
    }

    pub fn to_json_entries(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("schedule entries serialize")
    }
}

impl ScheduleFile {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Converts to a [`Schedule`]. Bare entry arrays get their cached fields
    /// recomputed against `instance`; full objects are kept as written.
    pub fn into_schedule(self, instance: &ProblemInstance) -> Schedule {
        match self {
            ScheduleFile::Entries(entries) => Schedule::new(entries, instance),
            ScheduleFile::Full(s) => s,
        }
    }
}
