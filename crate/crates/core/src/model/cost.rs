use std::collections::BTreeMap;

use thiserror::Error;

use super::instance::ProblemInstance;
use super::schedule::Schedule;
use super::types::{CostParams, FitnessMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObjectiveError {
    #[error("task `{0}` is not assigned")]
    UnassignedTask(String),
    #[error("task `{0}` is assigned more than once")]
    DoubleAssignment(String),
    #[error("schedule references unknown {kind} `{id}`")]
    UnknownId { kind: &'static str, id: String },
}

/// `c_ij = 1 / (1 + gamma * f_ij) + tau * travel_ij`.
///
/// The travel term only applies in cost-term mode; in duration-augment mode
/// travel shows up in processing times instead.
pub fn assignment_cost(robot: usize, task: usize, fitness: &FitnessMatrix, params: &CostParams) -> f64 {
    1.0 / (1.0 + params.gamma * fitness.get(robot, task)) + params.travel_cost(robot, task)
}

/// Weighted objective `alpha * C_max + beta * sum_i C_i + lambda * sum c_ij`.
///
/// Completion times are recomputed from the entries; the cached fields on
/// the schedule are ignored.
pub fn objective_value(schedule: &Schedule, instance: &ProblemInstance) -> Result<f64, ObjectiveError> {
    let mut seen = vec![false; instance.n_tasks()];
    let mut completion = vec![0.0_f64; instance.n_robots()];
    let mut cost = 0.0;
    for e in &schedule.entries {
        let j = instance.task_index(&e.task_id).ok_or_else(|| ObjectiveError::UnknownId {
            kind: "task",
            id: e.task_id.clone(),
        })?;
        let i = instance.robot_index(&e.robot_id).ok_or_else(|| ObjectiveError::UnknownId {
            kind: "robot",
            id: e.robot_id.clone(),
        })?;
        if std::mem::replace(&mut seen[j], true) {
            return Err(ObjectiveError::DoubleAssignment(e.task_id.clone()));
        }
        completion[i] = completion[i].max(e.end);
        cost += instance.cost(i, j);
    }
    if let Some(j) = seen.iter().position(|s| !s) {
        return Err(ObjectiveError::UnassignedTask(instance.task(j).id.clone()));
    }
    Ok(weighted(instance, &completion, cost))
}

pub(crate) fn weighted(instance: &ProblemInstance, completion: &[f64], cost: f64) -> f64 {
    let w = instance.weights();
    let makespan = completion.iter().copied().fold(0.0, f64::max);
    let sum: f64 = completion.iter().sum();
    w.alpha * makespan + w.beta * sum + w.lambda * cost
}

/// Per-robot completion times keyed by robot id, over every robot of the
/// instance (zero for idle robots).
pub(crate) fn completion_by_robot(schedule_entries: &[super::ScheduleEntry], instance: &ProblemInstance) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = instance.robots().iter().map(|r| (r.id.clone(), 0.0)).collect();
    for e in schedule_entries {
        let slot = out.entry(e.robot_id.clone()).or_insert(0.0);
        *slot = slot.max(e.end);
    }
    out
}
