use std::collections::BTreeSet;

use crate::model::{ProblemInstance, Schedule, ScheduleEntry, TIME_TOL};

use super::config::SolveError;

/// Seed for a re-solve: pinned work plus an optional starting incumbent.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    /// Completed and in-progress entries; robot and start are fixed.
    pub frozen: Vec<ScheduleEntry>,
    /// Full previous plan, tried as the first incumbent.
    pub seed: Option<Vec<ScheduleEntry>>,
}

impl WarmStart {
    pub fn is_frozen(&self, task_id: &str) -> bool {
        self.frozen.iter().any(|e| e.task_id == task_id)
    }
}

fn frozen_err(task: &str, reason: impl Into<String>) -> SolveError {
    SolveError::FrozenInfeasible { task: task.to_string(), reason: reason.into() }
}

/// Turns a partial schedule into a warm start for `instance`.
///
/// Entries whose metadata carries `"frozen": true` are pinned. Every pinned
/// entry must still be valid: known task and robot, capable robot, matching
/// duration, inside its time window, no overlap with another pinned entry,
/// and all of its predecessors pinned and finished before it starts.
///
/// The remaining entries, restricted to tasks of `instance`, become the seed
/// incumbent when they cover every task. The search discards the seed if it
/// no longer fits.
pub fn warm_start(instance: &ProblemInstance, partial: &Schedule) -> Result<WarmStart, SolveError> {
    let mut frozen: Vec<ScheduleEntry> = partial.entries.iter().filter(|e| e.is_frozen()).cloned().collect();
    frozen.sort_by(|a, b| a.start.total_cmp(&b.start).then_with(|| a.task_id.cmp(&b.task_id)));

    let mut seen = BTreeSet::new();
    for e in &frozen {
        let j = instance.task_index(&e.task_id).ok_or_else(|| frozen_err(&e.task_id, "task no longer exists"))?;
        let i = instance
            .robot_index(&e.robot_id)
            .ok_or_else(|| frozen_err(&e.task_id, format!("robot `{}` is not in the team", e.robot_id)))?;
        if !seen.insert(j) {
            return Err(frozen_err(&e.task_id, "pinned twice"));
        }
        if !instance.feasible(i, j) {
            return Err(frozen_err(&e.task_id, format!("robot `{}` lacks a required capability", e.robot_id)));
        }
        let p = instance.duration_on(i, j);
        if (e.end - e.start - p).abs() > TIME_TOL || e.start < -TIME_TOL {
            return Err(frozen_err(&e.task_id, format!("interval [{}, {}) does not match duration {}", e.start, e.end, p)));
        }
        if e.start < instance.release(j) - TIME_TOL {
            return Err(frozen_err(&e.task_id, "starts before its release time"));
        }
        if let Some(dl) = instance.deadline(j) {
            if e.end > dl + TIME_TOL {
                return Err(frozen_err(&e.task_id, "ends after its deadline"));
            }
        }
    }
    for e in &frozen {
        let j = instance.task_index(&e.task_id).expect("checked above");
        for &k in instance.preds(j) {
            let pred_id = &instance.task(k).id;
            match frozen.iter().find(|f| &f.task_id == pred_id) {
                Some(f) if f.end <= e.start + TIME_TOL => {}
                Some(_) => return Err(frozen_err(&e.task_id, format!("starts before predecessor `{pred_id}` ends"))),
                None => return Err(frozen_err(&e.task_id, format!("predecessor `{pred_id}` is not pinned"))),
            }
        }
    }
    for (x, a) in frozen.iter().enumerate() {
        for b in &frozen[x + 1..] {
            if a.robot_id == b.robot_id && a.start < b.end - TIME_TOL && b.start < a.end - TIME_TOL {
                return Err(frozen_err(&b.task_id, format!("overlaps pinned task `{}`", a.task_id)));
            }
        }
    }

    let seed_entries: Vec<ScheduleEntry> =
        partial.entries.iter().filter(|e| instance.task_index(&e.task_id).is_some()).cloned().collect();
    let covered: BTreeSet<&str> = seed_entries.iter().map(|e| e.task_id.as_str()).collect();
    let seed = (covered.len() == instance.n_tasks() && seed_entries.len() == instance.n_tasks()).then_some(seed_entries);

    Ok(WarmStart { frozen, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_instance, CostParams, ObjectiveWeights, RobotProfile, Task, ValidateOptions, FROZEN_KEY};

    fn chain() -> ProblemInstance {
        validate_instance(
            vec![Task::new("a", 2.0), Task::new("b", 3.0).with_dependencies(["a"]), Task::new("c", 1.0)],
            vec![RobotProfile::new("r1", Vec::<String>::new()), RobotProfile::new("r2", Vec::<String>::new())],
            None,
            CostParams::default(),
            ObjectiveWeights::default(),
            ValidateOptions::default(),
        )
        .unwrap()
    }

    fn sched(inst: &ProblemInstance, entries: Vec<ScheduleEntry>) -> Schedule {
        Schedule::new(entries, inst)
    }

    #[test]
    fn frozen_and_seed_are_split() {
        let inst = chain();
        let s = sched(
            &inst,
            vec![
                ScheduleEntry::new("a", "r1", 0.0, 2.0).with_meta(FROZEN_KEY, true),
                ScheduleEntry::new("b", "r1", 2.0, 5.0),
                ScheduleEntry::new("c", "r2", 0.0, 1.0),
            ],
        );
        let w = warm_start(&inst, &s).unwrap();
        assert_eq!(w.frozen.len(), 1);
        assert!(w.is_frozen("a"));
        assert_eq!(w.seed.as_ref().map(Vec::len), Some(3));
    }

    #[test]
    fn partial_cover_gives_no_seed() {
        let inst = chain();
        let s = sched(&inst, vec![ScheduleEntry::new("a", "r1", 0.0, 2.0).with_meta(FROZEN_KEY, true)]);
        assert_eq!(warm_start(&inst, &s).unwrap().seed, None);
    }

    #[test]
    fn frozen_violations_are_rejected() {
        let inst = chain();
        let bad_robot = sched(&inst, vec![ScheduleEntry::new("a", "r9", 0.0, 2.0).with_meta(FROZEN_KEY, true)]);
        assert!(matches!(warm_start(&inst, &bad_robot), Err(SolveError::FrozenInfeasible { .. })));
        let lone_succ = sched(&inst, vec![ScheduleEntry::new("b", "r1", 2.0, 5.0).with_meta(FROZEN_KEY, true)]);
        assert!(matches!(warm_start(&inst, &lone_succ), Err(SolveError::FrozenInfeasible { task, .. }) if task == "b"));
        let wrong_len = sched(&inst, vec![ScheduleEntry::new("a", "r1", 0.0, 4.0).with_meta(FROZEN_KEY, true)]);
        assert!(warm_start(&inst, &wrong_len).is_err());
        let overlap = sched(
            &inst,
            vec![
                ScheduleEntry::new("a", "r1", 0.0, 2.0).with_meta(FROZEN_KEY, true),
                ScheduleEntry::new("c", "r1", 1.0, 2.0).with_meta(FROZEN_KEY, true),
            ],
        );
        assert!(warm_start(&inst, &overlap).is_err());
    }
}
