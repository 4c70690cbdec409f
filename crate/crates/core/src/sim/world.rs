use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{ProblemInstance, Task};

use super::config::{ScriptAction, ScriptedEvent, SimConfig};
use super::trace::{TraceEvent, TraceRecord, TRACE_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Pending,
    Running,
    Completed,
    Failed,
    Invalidated,
}

impl TaskState {
    pub fn is_terminal(self) -> bool {
        matches!(self, Self::Completed | Self::Failed | Self::Invalidated)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotState {
    Idle,
    Busy(String),
    Failed,
}

/// The four replanning triggers. Declaration order is the tie-break order
/// at equal timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerKind {
    Completion,
    DelayExceeded,
    PerceptionContradiction,
    NewDiscovery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerEvent {
    pub kind: TriggerKind,
    /// Task and robot ids the trigger is about.
    pub subjects: Vec<String>,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub time: f64,
    pub task_id: String,
}

/// One execution attempt in progress.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub robot: String,
    pub start: f64,
    /// Planned duration the delay check measures against.
    pub planned: f64,
    pub(crate) token: u64,
    pub(crate) ok: bool,
}

impl Run {
    /// Time after which the run counts as delayed.
    pub fn delay_limit(&self, threshold: f64) -> f64 {
        self.start + self.planned * (1.0 + threshold)
    }
}

/// Shared execution state: task and robot statuses, detections and the
/// append-only trace.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    pub task_states: BTreeMap<String, TaskState>,
    pub robot_states: BTreeMap<String, RobotState>,
    pub clock: f64,
    pub detections: Vec<Detection>,
    pub log: Vec<TraceRecord>,
    pub(crate) running: BTreeMap<String, Run>,
    pub(crate) delay_flagged: BTreeSet<String>,
    pub(crate) inbox: Vec<TriggerEvent>,
    pub(crate) script: Vec<ScriptedEvent>,
    pub(crate) script_cursor: usize,
    /// Discovered tasks not yet merged into the instance.
    pub(crate) discovered: Vec<(Task, Option<Vec<f64>>)>,
    next_token: u64,
}

impl WorldModel {
    pub fn new(instance: &ProblemInstance, config: &SimConfig) -> Self {
        let mut script = config.events.clone();
        script.sort_by(|a, b| a.time.total_cmp(&b.time));
        Self {
            task_states: instance.tasks().iter().map(|t| (t.id.clone(), TaskState::Pending)).collect(),
            robot_states: instance.robots().iter().map(|r| (r.id.clone(), RobotState::Idle)).collect(),
            clock: 0.0,
            detections: Vec::new(),
            log: Vec::new(),
            running: BTreeMap::new(),
            delay_flagged: BTreeSet::new(),
            inbox: Vec::new(),
            script,
            script_cursor: 0,
            discovered: Vec::new(),
            next_token: 0,
        }
    }

    pub fn running(&self) -> &BTreeMap<String, Run> {
        &self.running
    }

    pub fn state(&self, task: &str) -> Option<TaskState> {
        self.task_states.get(task).copied()
    }

    pub fn all_terminal(&self) -> bool {
        self.task_states.values().all(|s| s.is_terminal())
    }

    /// Moves the clock forward.
    pub fn advance(&mut self, t: f64) {
        assert!(t >= self.clock, "clock moved backwards: {} -> {t}", self.clock);
        self.clock = t;
    }

    pub fn record(&mut self, event: TraceEvent) {
        let seq = self.log.len() as u64;
        self.log.push(TraceRecord { v: TRACE_VERSION, seq, t: self.clock, event });
    }

    /// Starts `task` on `robot` now. `ok` is the hidden outcome revealed at
    /// finish time. Returns the run token.
    pub fn begin(&mut self, task: &str, robot: &str, planned: f64, ok: bool) -> u64 {
        let token = self.next_token;
        self.next_token += 1;
        self.task_states.insert(task.to_string(), TaskState::Running);
        self.robot_states.insert(robot.to_string(), RobotState::Busy(task.to_string()));
        self.running.insert(
            task.to_string(),
            Run { robot: robot.to_string(), start: self.clock, planned, token, ok },
        );
        token
    }

    /// Ends a run early. The task returns to pending and a still-working
    /// robot becomes idle.
    pub(crate) fn abort(&mut self, task: &str) -> Option<Run> {
        let run = self.running.remove(task)?;
        self.task_states.insert(task.to_string(), TaskState::Pending);
        if self.robot_states.get(&run.robot) == Some(&RobotState::Busy(task.to_string())) {
            self.robot_states.insert(run.robot.clone(), RobotState::Idle);
        }
        self.record(TraceEvent::Abort { task: task.to_string(), robot: run.robot.clone(), start: run.start });
        Some(run)
    }

    pub fn next_script_time(&self) -> Option<f64> {
        self.script.get(self.script_cursor).map(|e| e.time)
    }

    fn apply_script(&mut self, event: ScriptedEvent, out: &mut Vec<TriggerEvent>) {
        let now = self.clock;
        match event.action {
            ScriptAction::RobotFailure { robot } => {
                let Some(state) = self.robot_states.get(&robot).cloned() else { return };
                if state == RobotState::Failed {
                    return;
                }
                self.robot_states.insert(robot.clone(), RobotState::Failed);
                self.record(TraceEvent::RobotFailed { robot: robot.clone() });
                let mut subjects = vec![robot];
                if let RobotState::Busy(task) = state {
                    self.abort(&task);
                    subjects.push(task);
                }
                out.push(TriggerEvent { kind: TriggerKind::PerceptionContradiction, subjects, time: now });
            }
            ScriptAction::Contradiction { task } => {
                match self.state(&task) {
                    Some(s) if !s.is_terminal() => {}
                    _ => return,
                }
                self.abort(&task);
                self.task_states.insert(task.clone(), TaskState::Invalidated);
                self.record(TraceEvent::Invalidated { task: task.clone() });
                out.push(TriggerEvent { kind: TriggerKind::PerceptionContradiction, subjects: vec![task], time: now });
            }
            ScriptAction::Discovery { task, travel } => {
                if self.task_states.contains_key(&task.id) {
                    return;
                }
                let id = task.id.clone();
                self.task_states.insert(id.clone(), TaskState::Pending);
                self.detections.push(Detection { time: now, task_id: id.clone() });
                self.discovered.push((task, travel));
                self.record(TraceEvent::Discovered { task: id.clone() });
                out.push(TriggerEvent { kind: TriggerKind::NewDiscovery, subjects: vec![id], time: now });
            }
        }
    }
}

/// Collects the triggers due at the world's current clock: reported
/// outcomes, runs past their delay limit (once per task), and scripted
/// contradictions and discoveries. Scripted effects are applied to the
/// world. Triggers come back ordered by kind, then subject ids, and are
/// appended to the trace.
pub fn detect_triggers(world: &mut WorldModel, config: &SimConfig) -> Vec<TriggerEvent> {
    let now = world.clock;
    let mut out = std::mem::take(&mut world.inbox);

    let late: Vec<String> = world
        .running
        .iter()
        .filter(|(task, run)| now > run.delay_limit(config.delay_threshold) && !world.delay_flagged.contains(*task))
        .map(|(task, _)| task.clone())
        .collect();
    for task in late {
        world.delay_flagged.insert(task.clone());
        out.push(TriggerEvent { kind: TriggerKind::DelayExceeded, subjects: vec![task], time: now });
    }

    while let Some(ev) = world.script.get(world.script_cursor).filter(|e| e.time <= now).cloned() {
        world.script_cursor += 1;
        world.apply_script(ev, &mut out);
    }

    out.sort_by(|a, b| a.kind.cmp(&b.kind).then_with(|| a.subjects.cmp(&b.subjects)));
    for t in &out {
        world.record(TraceEvent::Trigger { trigger: t.kind, subjects: t.subjects.clone() });
    }
    out
}
