use crate::milp::WarmStart;
use crate::model::{ProblemInstance, Schedule, ScheduleEntry};

/// List scheduling in topological order: each task goes to the capable
/// robot that would finish it first, ties to the lower robot index.
/// Fitness is ignored.
pub fn greedy_allocate(instance: &ProblemInstance) -> Schedule {
    greedy_with(instance, None)
}

pub(crate) fn greedy_with(instance: &ProblemInstance, warm: Option<&WarmStart>) -> Schedule {
    let n = instance.n_robots();
    let m = instance.n_tasks();
    let mut avail = vec![0.0_f64; n];
    let mut end = vec![None::<f64>; m];
    let mut entries = Vec::with_capacity(m);
    if let Some(w) = warm {
        for e in &w.frozen {
            if let (Some(j), Some(i)) = (instance.task_index(&e.task_id), instance.robot_index(&e.robot_id)) {
                avail[i] = avail[i].max(e.end);
                end[j] = Some(e.end);
                entries.push(e.clone());
            }
        }
    }
    for &j in instance.topo_order() {
        if end[j].is_some() {
            continue;
        }
        let est = instance.preds(j).iter().filter_map(|&k| end[k]).fold(instance.release(j), f64::max);
        let mut best: Option<(f64, f64, usize)> = None;
        for i in instance.feasible_robots(j) {
            let start = est.max(avail[i]);
            let finish = start + instance.duration_on(i, j);
            if best.is_none_or(|(f, _, _)| finish < f) {
                best = Some((finish, start, i));
            }
        }
        let (finish, start, i) = best.expect("validated instance has a capable robot for every task");
        avail[i] = finish;
        end[j] = Some(finish);
        entries.push(ScheduleEntry::new(&instance.task(j).id, &instance.robot(i).id, start, finish));
    }
    Schedule::new(entries, instance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_schedule, validate_instance, CostParams, ObjectiveWeights, RobotProfile, Task, ValidateOptions};

    fn inst(tasks: Vec<Task>, robots: Vec<RobotProfile>) -> ProblemInstance {
        validate_instance(tasks, robots, None, CostParams::default(), ObjectiveWeights::default(), ValidateOptions::default())
            .unwrap()
    }

    #[test]
    fn packs_short_tasks_beside_long_one() {
        let robots = vec![RobotProfile::new("a", Vec::<String>::new()), RobotProfile::new("b", Vec::<String>::new())];
        let i = inst(vec![Task::new("x", 4.0), Task::new("y", 1.0), Task::new("z", 1.0)], robots);
        let s = greedy_allocate(&i);
        assert_eq!(s.makespan, 4.0);
        assert_eq!(s.entry("y").unwrap().robot_id, "b");
        assert_eq!(s.entry("z").unwrap().robot_id, "b");
    }

    #[test]
    fn single_capable_robot_serializes() {
        let robots = vec![RobotProfile::new("a", ["arm"]), RobotProfile::new("b", Vec::<String>::new())];
        let tasks = vec![
            Task::new("x", 2.0).with_capabilities(["arm"]),
            Task::new("y", 3.0).with_capabilities(["arm"]),
            Task::new("z", 1.5).with_capabilities(["arm"]),
        ];
        let i = inst(tasks, robots);
        let s = greedy_allocate(&i);
        assert_eq!(s.makespan, 6.5);
        assert!(check_schedule(&s, &i).is_empty());
    }

    #[test]
    fn empty_instance() {
        let i = inst(vec![], vec![RobotProfile::new("a", Vec::<String>::new())]);
        let s = greedy_allocate(&i);
        assert!(s.entries.is_empty());
        assert_eq!(s.makespan, 0.0);
    }
}
