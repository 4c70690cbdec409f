use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::milp::SolveStatus;
use crate::model::ScheduleEntry;

use super::world::TriggerKind;

/// Schema version stamped on every trace line.
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub v: u32,
    pub seq: u64,
    pub t: f64,
    #[serde(flatten)]
    pub event: TraceEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    /// A schedule was adopted. Version 0 is the initial plan.
    Plan { version: u64, status: SolveStatus, rescored: Vec<String>, entries: Vec<ScheduleEntry> },
    Start { task: String, robot: String, planned_start: f64, planned_end: f64 },
    /// An attempt ended; `ok` is false when it failed.
    Finish { task: String, robot: String, start: f64, ok: bool },
    /// An attempt was cut short by a failure or an invalidation.
    Abort { task: String, robot: String, start: f64 },
    Trigger { trigger: TriggerKind, subjects: Vec<String> },
    RobotFailed { robot: String },
    Invalidated { task: String },
    Discovered { task: String },
    /// The task will not be attempted again.
    TaskFailed { task: String },
    ReplanFailed { cause: String },
    End { success: bool },
}

/// One JSON object per line.
pub fn to_jsonl(trace: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in trace {
        out.push_str(&serde_json::to_string(r).expect("trace record serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str) -> Result<Vec<TraceRecord>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

/// Busy intervals per robot, from finished and aborted attempts.
pub fn busy_intervals(trace: &[TraceRecord]) -> BTreeMap<String, Vec<(f64, f64)>> {
    let mut busy: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in trace {
        if let TraceEvent::Finish { robot, start, .. } | TraceEvent::Abort { robot, start, .. } = &r.event {
            busy.entry(robot.clone()).or_default().push((*start, r.t));
        }
    }
    busy
}

/// Idle seconds per robot: the gaps between its busy intervals inside
/// `[first start, last end]`. Robots that never worked are absent, which
/// counts as zero.
pub fn idle_time(trace: &[TraceRecord]) -> BTreeMap<String, f64> {
    busy_intervals(trace)
        .into_iter()
        .map(|(robot, mut spans)| {
            spans.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let mut idle = 0.0;
            let mut reach = spans[0].1;
            for &(s, e) in &spans[1..] {
                if s > reach {
                    idle += s - reach;
                }
                reach = reach.max(e);
            }
            (robot, idle)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finish(robot: &str, start: f64, end: f64, seq: u64) -> TraceRecord {
        TraceRecord {
            v: TRACE_VERSION,
            seq,
            t: end,
            event: TraceEvent::Finish { task: format!("t{seq}"), robot: robot.into(), start, ok: true },
        }
    }

    #[test]
    fn idle_gaps() {
        let back_to_back = vec![finish("a", 0.0, 5.0, 0), finish("a", 5.0, 9.0, 1)];
        assert_eq!(idle_time(&back_to_back)["a"], 0.0);
        let gap = vec![finish("a", 0.0, 2.0, 0), finish("a", 6.0, 8.0, 1), finish("b", 1.0, 3.0, 2)];
        let idle = idle_time(&gap);
        assert_eq!(idle["a"], 4.0);
        assert_eq!(idle["b"], 0.0);
        assert!(!idle.contains_key("c"));
    }

    #[test]
    fn jsonl_round_trip() {
        let trace = vec![
            finish("a", 0.0, 2.5, 0),
            TraceRecord {
                v: TRACE_VERSION,
                seq: 1,
                t: 2.5,
                event: TraceEvent::Trigger { trigger: TriggerKind::Completion, subjects: vec!["t0".into()] },
            },
        ];
        let text = to_jsonl(&trace);
        assert!(text.lines().all(|l| l.starts_with("{\"v\":1,")));
        assert_eq!(parse_jsonl(&text).unwrap(), trace);
    }
}
