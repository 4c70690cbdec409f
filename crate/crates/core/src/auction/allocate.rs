use serde::Serialize;
use thiserror::Error;

use crate::allocator::PlanError;
use crate::milp::WarmStart;
use crate::model::{check_schedule, ProblemInstance, Schedule, ScheduleEntry, TIME_TOL};

use super::eps::{auction_assign, brute_force_min_cost, has_perfect_matching, Arcs};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuctionConfig {
    /// Bid increment floor, relative to the largest assignment cost.
    pub epsilon: f64,
    /// Cap on the total number of bids in one call.
    pub max_rounds: u64,
}

impl Default for AuctionConfig {
    fn default() -> Self {
        Self { epsilon: 0.01, max_rounds: 2_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskPrice {
    pub task_id: String,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuctionOutcome {
    pub schedule: Schedule,
    /// Price of each task when it was awarded, in task order.
    pub prices: Vec<TaskPrice>,
    pub bids: u64,
    pub decision_times: Vec<f64>,
}

/// Runs the event-driven auction and returns just the schedule.
pub fn auction_allocate(instance: &ProblemInstance, config: &AuctionConfig) -> Result<Schedule, PlanError> {
    auction_run(instance, config, None).map(|o| o.schedule)
}

struct Scheduled {
    robot: usize,
    start: f64,
    end: f64,
}

/// Event-driven auction.
///
/// At each decision time the idle robots bid for the ready tasks (released,
/// and every predecessor finished). Robot `i` values task `j` at
/// `-(c_ij + alpha * (t + p_ij))`, so cheaper and earlier-finishing pairings
/// win; among equal bids the lower robot id, which bids first, keeps the
/// task. When the bidding problem is not a square one with a perfect
/// matching, it is padded with "stay idle" and "wait" dummies whose values
/// force a maximum number of real awards.
pub fn auction_run(
    instance: &ProblemInstance,
    config: &AuctionConfig,
    warm: Option<&WarmStart>,
) -> Result<AuctionOutcome, PlanError> {
    if !(config.epsilon > 0.0) {
        return Err(PlanError::InvalidConfig(format!("epsilon must be positive, got {}", config.epsilon)));
    }
    let n = instance.n_robots();
    let m = instance.n_tasks();
    let alpha = instance.weights().alpha;
    let max_cost = (0..n)
        .flat_map(|i| (0..m).filter(move |&j| instance.feasible(i, j)).map(move |j| instance.cost(i, j)))
        .fold(0.0_f64, f64::max);
    let eps = config.epsilon * max_cost.max(f64::MIN_POSITIVE);

    let mut done: Vec<Option<Scheduled>> = (0..m).map(|_| None).collect();
    let mut avail = vec![0.0_f64; n];
    let mut frozen_meta = vec![None; m];
    if let Some(w) = warm {
        for e in &w.frozen {
            let (Some(j), Some(i)) = (instance.task_index(&e.task_id), instance.robot_index(&e.robot_id)) else {
                return Err(PlanError::Infeasible(format!("pinned entry `{}` does not match the instance", e.task_id)));
            };
            done[j] = Some(Scheduled { robot: i, start: e.start, end: e.end });
            avail[i] = avail[i].max(e.end);
            frozen_meta[j] = Some(e.metadata.clone());
        }
    }

    let mut prices = vec![0.0_f64; m];
    let mut bids = 0_u64;
    let mut decision_times = Vec::new();
    let mut t = 0.0_f64;
    loop {
        if done.iter().all(Option::is_some) {
            break;
        }
        let idle: Vec<usize> = (0..n).filter(|&i| avail[i] <= t + TIME_TOL).collect();
        let ready: Vec<usize> = (0..m)
            .filter(|&j| {
                done[j].is_none()
                    && instance.release(j) <= t + TIME_TOL
                    && instance.preds(j).iter().all(|&k| done[k].as_ref().is_some_and(|s| s.end <= t + TIME_TOL))
            })
            .collect();
        if !idle.is_empty() && !ready.is_empty() {
            decision_times.push(t);
            let awards = bid_round(instance, &idle, &ready, t, alpha, eps, &mut prices, config.max_rounds, &mut bids)?;
            for (i, j) in awards {
                let pred_end = instance.preds(j).iter().filter_map(|&k| done[k].as_ref()).map(|s| s.end).fold(0.0, f64::max);
                let start = t.max(avail[i]).max(pred_end).max(instance.release(j));
                let end = start + instance.duration_on(i, j);
                avail[i] = end;
                done[j] = Some(Scheduled { robot: i, start, end });
            }
        }
        let next_robot = avail.iter().copied().filter(|&a| a > t + TIME_TOL);
        let next_release = (0..m).filter(|&j| done[j].is_none()).map(|j| instance.release(j)).filter(|&r| r > t + TIME_TOL);
        match next_robot.chain(next_release).min_by(f64::total_cmp) {
            Some(next) => t = next,
            None => {
                if let Some(&j) = instance.topo_order().iter().find(|&&j| done[j].is_none()) {
                    return Err(PlanError::Stalled { task: instance.task(j).id.clone() });
                }
                break;
            }
        }
    }

    let entries: Vec<ScheduleEntry> = done
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let s = s.as_ref().expect("all tasks scheduled");
            let mut e = ScheduleEntry::new(&instance.task(j).id, &instance.robot(s.robot).id, s.start, s.end);
            if let Some(meta) = &frozen_meta[j] {
                e.metadata = meta.clone();
            }
            e
        })
        .collect();
    let schedule = Schedule::new(entries, instance);
    let violations = check_schedule(&schedule, instance);
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(PlanError::Violations(text.join("; ")));
    }
    let prices = (0..m).map(|j| TaskPrice { task_id: instance.task(j).id.clone(), price: prices[j] }).collect();
    Ok(AuctionOutcome { schedule, prices, bids, decision_times })
}

/// One bidding round at time `t`; returns `(robot, task)` awards.
#[allow(clippy::too_many_arguments)]
fn bid_round(
    instance: &ProblemInstance,
    idle: &[usize],
    ready: &[usize],
    t: f64,
    alpha: f64,
    eps: f64,
    prices: &mut [f64],
    max_bids: u64,
    bids: &mut u64,
) -> Result<Vec<(usize, usize)>, PlanError> {
    let value = |i: usize, j: usize| -(instance.cost(i, j) + alpha * (t + instance.duration_on(i, j)));
    let mut arcs: Vec<Arcs> = idle
        .iter()
        .map(|&i| ready.iter().enumerate().filter(|&(_, &j)| instance.feasible(i, j)).map(|(o, &j)| (o, value(i, j))).collect())
        .collect();
    let (r, k) = (idle.len(), ready.len());
    let mut local: Vec<f64> = ready.iter().map(|&j| prices[j]).collect();

    let padded = !(r == k && has_perfect_matching(&arcs, k));
    if padded {
        let (lo, hi) = arcs
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| (lo.min(v), hi.max(v)));
        if !lo.is_finite() {
            return Ok(Vec::new());
        }
        let size = (r + k) as f64;
        let dummy = lo - size * (hi - lo + eps) - size * eps - 1.0;
        // objects: ready tasks, then one "stay idle" slot per robot
        for (p, row) in arcs.iter_mut().enumerate() {
            row.push((k + p, dummy));
        }
        // persons: robots, then one "wait" person per ready task
        for o in 0..k {
            let mut row: Arcs = vec![(o, dummy)];
            row.extend((0..r).map(|p| (k + p, 0.0)));
            arcs.push(row);
        }
        local.extend(std::iter::repeat_n(0.0, r));
    }
    let held = auction_assign(&arcs, local.len(), &mut local, eps, max_bids, bids).map_err(|_| PlanError::RoundLimit(max_bids))?;
    for (o, &j) in ready.iter().enumerate() {
        prices[j] = prices[j].max(local[o]);
    }
    Ok(idle
        .iter()
        .zip(&held)
        .filter_map(|(&i, h)| h.filter(|&o| o < k).map(|o| (i, ready[o])))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("expected a pure assignment instance (no precedence, as many robots as tasks); got {robots} robots, {tasks} tasks, {edges} edges")]
    ShapeMismatch { robots: usize, tasks: usize, edges: usize },
    #[error("schedule does not assign every task exactly once")]
    Incomplete,
    #[error("no perfect assignment respects the capability mask")]
    NoAssignment,
}

/// Assignment cost of `schedule` minus the best achievable assignment cost,
/// on an instance without precedence where robots and tasks pair up.
pub fn epsilon_optimality_gap(instance: &ProblemInstance, schedule: &Schedule) -> Result<f64, ShapeError> {
    let (n, m) = (instance.n_robots(), instance.n_tasks());
    if n != m || !instance.edges().is_empty() {
        return Err(ShapeError::ShapeMismatch { robots: n, tasks: m, edges: instance.edges().len() });
    }
    let mut seen = vec![false; m];
    for e in &schedule.entries {
        let j = instance.task_index(&e.task_id).ok_or(ShapeError::Incomplete)?;
        if std::mem::replace(&mut seen[j], true) {
            return Err(ShapeError::Incomplete);
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(ShapeError::Incomplete);
    }
    let cost: Vec<Vec<Option<f64>>> =
        (0..n).map(|i| (0..m).map(|j| instance.feasible(i, j).then(|| instance.cost(i, j))).collect()).collect();
    let best = brute_force_min_cost(&cost).ok_or(ShapeError::NoAssignment)?;
    Ok(schedule.assignment_cost(instance) - best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_instance, CostParams, FitnessMatrix, ObjectiveWeights, RobotProfile, Task, ValidateOptions};

    fn instance(tasks: Vec<Task>, n: usize, fitness: Option<Vec<Vec<f64>>>) -> ProblemInstance {
        let robots = (0..n).map(|i| RobotProfile::new(format!("r{i}"), Vec::<String>::new())).collect();
        validate_instance(
            tasks,
            robots,
            fitness.map(FitnessMatrix::from_rows),
            CostParams::default(),
            ObjectiveWeights::default(),
            ValidateOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn cheaper_robot_wins() {
        // fitness 1 gives cost 0.5, fitness 0 gives cost 1.0
        let inst = instance(vec![Task::new("t", 1.0)], 2, Some(vec![vec![1.0], vec![0.0]]));
        let s = auction_allocate(&inst, &AuctionConfig::default()).unwrap();
        assert_eq!(s.entry("t").unwrap().robot_id, "r0");
        let inst = instance(vec![Task::new("t", 1.0)], 2, Some(vec![vec![0.0], vec![1.0]]));
        let s = auction_allocate(&inst, &AuctionConfig::default()).unwrap();
        assert_eq!(s.entry("t").unwrap().robot_id, "r1");
    }

    #[test]
    fn ties_go_to_smaller_robot_id() {
        let inst = instance(vec![Task::new("t", 1.0)], 3, None);
        let s = auction_allocate(&inst, &AuctionConfig::default()).unwrap();
        assert_eq!(s.entry("t").unwrap().robot_id, "r0");
    }

    #[test]
    fn successor_waits_for_predecessor() {
        let inst = instance(vec![Task::new("a", 2.0), Task::new("b", 1.0).with_dependencies(["a"])], 2, None);
        let out = auction_run(&inst, &AuctionConfig::default(), None).unwrap();
        assert!(out.schedule.entry("b").unwrap().start >= out.schedule.entry("a").unwrap().end);
        assert_eq!(out.decision_times, vec![0.0, 2.0]);
    }

    #[test]
    fn more_tasks_than_robots() {
        let tasks = (0..5).map(|k| Task::new(format!("t{k}"), 1.0 + k as f64)).collect();
        let inst = instance(tasks, 2, None);
        let s = auction_allocate(&inst, &AuctionConfig::default()).unwrap();
        assert!(check_schedule(&s, &inst).is_empty());
        assert_eq!(s.entries.len(), 5);
    }

    #[test]
    fn gap_on_two_by_two() {
        let inst = instance(vec![Task::new("a", 1.0), Task::new("b", 1.0)], 2, Some(vec![vec![1.0, 0.0], vec![0.0, 1.0]]));
        let s = auction_allocate(&inst, &AuctionConfig::default()).unwrap();
        let gap = epsilon_optimality_gap(&inst, &s).unwrap();
        assert!(gap.abs() <= 1e-12, "{gap}");
    }

    #[test]
    fn gap_rejects_wrong_shape() {
        let inst = instance(vec![Task::new("a", 1.0)], 2, None);
        let s = auction_allocate(&inst, &AuctionConfig::default()).unwrap();
        assert!(matches!(epsilon_optimality_gap(&inst, &s), Err(ShapeError::ShapeMismatch { .. })));
    }

    #[test]
    fn epsilon_must_be_positive() {
        let inst = instance(vec![Task::new("a", 1.0)], 1, None);
        let cfg = AuctionConfig { epsilon: 0.0, ..AuctionConfig::default() };
        assert!(matches!(auction_allocate(&inst, &cfg), Err(PlanError::InvalidConfig(_))));
    }
}
