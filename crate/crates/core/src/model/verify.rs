use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::instance::ProblemInstance;
use super::schedule::{Schedule, ScheduleEntry};

/// Absolute tolerance for every time comparison, in seconds.
pub const TIME_TOL: f64 = 1e-6;

/// Constraint family a [`Violation`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintFamily {
    /// Each task on exactly one robot; ids must exist.
    Assignment,
    /// Robot lacks a required capability.
    Feasibility,
    /// A successor starts before its predecessor finishes.
    Precedence,
    /// Two tasks on one robot intersect.
    Overlap,
    /// Cached `C_i` / `C_max` disagree with the entries.
    Completion,
    /// Release, deadline or nonnegative start.
    TimeWindow,
    /// `end - start` differs from the task's processing time.
    Duration,
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Assignment => "Assignment",
            Self::Feasibility => "Feasibility",
            Self::Precedence => "Precedence",
            Self::Overlap => "Overlap",
            Self::Completion => "Completion",
            Self::TimeWindow => "TimeWindow",
            Self::Duration => "Duration",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub family: ConstraintFamily,
    pub ids: Vec<String>,
    /// Signed slack of the violated inequality; negative means violated by
    /// that much.
    pub slack: f64,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}] slack={}: {}", self.family, self.ids.join(","), self.slack, self.message)
    }
}

fn violation(family: ConstraintFamily, ids: &[&str], slack: f64, message: String) -> Violation {
    Violation {
        family,
        ids: ids.iter().map(|s| s.to_string()).collect(),
        slack,
        message,
    }
}

/// Checks a candidate schedule against every constraint of the scheduling
/// model and returns all violations found. An empty result means the
/// schedule is feasible.
///
/// Any schedule is accepted as input, including ones with unknown ids,
/// missing tasks or duplicates.
pub fn check_schedule(schedule: &Schedule, instance: &ProblemInstance) -> Vec<Violation> {
    use ConstraintFamily::*;
    let mut out = Vec::new();

    // Resolve entries; the first entry of a task is its representative.
    let mut first: Vec<Option<&ScheduleEntry>> = vec![None; instance.n_tasks()];
    let mut counts = vec![0usize; instance.n_tasks()];
    let mut by_robot: BTreeMap<usize, Vec<(usize, &ScheduleEntry)>> = BTreeMap::new();
    for e in &schedule.entries {
        let task = instance.task_index(&e.task_id);
        let robot = instance.robot_index(&e.robot_id);
        let (j, i) = match (task, robot) {
            (Some(j), Some(i)) => (j, i),
            (None, _) => {
                out.push(violation(Assignment, &[&e.task_id], -1.0, format!("unknown task `{}`", e.task_id)));
                continue;
            }
            (Some(_), None) => {
                out.push(violation(
                    Assignment,
                    &[&e.task_id, &e.robot_id],
                    -1.0,
                    format!("task `{}` assigned to unknown robot `{}`", e.task_id, e.robot_id),
                ));
                continue;
            }
        };
        counts[j] += 1;
        first[j].get_or_insert(e);
        by_robot.entry(i).or_default().push((j, e));

        if !instance.feasible(i, j) {
            let missing: Vec<&str> = instance
                .task(j)
                .required_capabilities
                .difference(&instance.robot(i).capabilities)
                .map(String::as_str)
                .collect();
            out.push(violation(
                Feasibility,
                &[&e.task_id, &e.robot_id],
                -(missing.len() as f64),
                format!("robot `{}` lacks {}", e.robot_id, missing.join(", ")),
            ));
        }
        let expected = instance.duration_on(i, j);
        let dev = (e.end - e.start) - expected;
        if !dev.is_finite() || dev.abs() > TIME_TOL {
            out.push(violation(
                Duration,
                &[&e.task_id],
                -dev.abs(),
                format!("entry spans {} but task takes {}", e.end - e.start, expected),
            ));
        }
        let release = instance.release(j);
        if e.start < release - TIME_TOL {
            out.push(violation(
                TimeWindow,
                &[&e.task_id],
                e.start - release,
                format!("starts at {} before release {}", e.start, release),
            ));
        }
        if let Some(dl) = instance.deadline(j) {
            if e.end > dl + TIME_TOL {
                out.push(violation(
                    TimeWindow,
                    &[&e.task_id],
                    dl - e.end,
                    format!("ends at {} after deadline {}", e.end, dl),
                ));
            }
        }
    }

    for (j, &c) in counts.iter().enumerate() {
        if c != 1 {
            let id = &instance.task(j).id;
            let msg = if c == 0 {
                format!("task `{id}` is not assigned")
            } else {
                format!("task `{id}` is assigned {c} times")
            };
            out.push(violation(Assignment, &[id], -((c as f64) - 1.0).abs(), msg));
        }
    }

    for &(k, j) in instance.edges() {
        if let (Some(ek), Some(ej)) = (first[k], first[j]) {
            let slack = ej.start - ek.end;
            if slack < -TIME_TOL {
                out.push(violation(
                    Precedence,
                    &[&ek.task_id, &ej.task_id],
                    slack,
                    format!("`{}` starts at {} before `{}` ends at {}", ej.task_id, ej.start, ek.task_id, ek.end),
                ));
            }
        }
    }

    for (&i, list) in &by_robot {
        for (a, &(_, ea)) in list.iter().enumerate() {
            for &(_, eb) in &list[a + 1..] {
                let overlap = ea.end.min(eb.end) - ea.start.max(eb.start);
                if overlap > TIME_TOL {
                    let (x, y) = if (ea.start, &ea.task_id) <= (eb.start, &eb.task_id) { (ea, eb) } else { (eb, ea) };
                    out.push(violation(
                        Overlap,
                        &[&x.task_id, &y.task_id],
                        -overlap,
                        format!(
                            "`{}` [{}, {}) and `{}` [{}, {}) overlap on robot `{}`",
                            x.task_id, x.start, x.end, y.task_id, y.start, y.end, instance.robot(i).id
                        ),
                    ));
                }
            }
        }
    }

    let recomputed_makespan = schedule.entries.iter().map(|e| e.end).fold(0.0, f64::max);
    let dm = schedule.makespan - recomputed_makespan;
    if !dm.is_finite() || dm.abs() > TIME_TOL {
        out.push(violation(
            Completion,
            &["makespan"],
            -dm.abs(),
            format!("makespan {} but last task ends at {}", schedule.makespan, recomputed_makespan),
        ));
    }
    for (i, r) in instance.robots().iter().enumerate() {
        let actual = by_robot
            .get(&i)
            .map(|l| l.iter().map(|(_, e)| e.end).fold(0.0, f64::max))
            .unwrap_or(0.0);
        let cached = schedule.per_robot_completion.get(&r.id).copied().unwrap_or(0.0);
        let d = cached - actual;
        if !d.is_finite() || d.abs() > TIME_TOL {
            out.push(violation(
                Completion,
                &[&r.id],
                -d.abs(),
                format!("robot `{}` completion {} but its last task ends at {}", r.id, cached, actual),
            ));
        }
    }

    out.sort_by(|a, b| a.family.cmp(&b.family).then_with(|| a.ids.cmp(&b.ids)));
    out
}
