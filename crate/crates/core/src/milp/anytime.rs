use std::time::Instant;

use serde_json::Value;

use crate::allocator::{Allocator, PlanError};
use crate::model::{check_schedule, ProblemInstance, Schedule};

use super::bnb::solve_seeded;
use super::config::{SolveConfig, SolveResult, SolveStatus};

const FALLBACK: &str = "fallback";

fn tag_fallback(schedule: &mut Schedule) {
    for e in &mut schedule.entries {
        e.metadata.insert("source".into(), Value::from(FALLBACK));
    }
}

/// Exact search under `config` with `fallback` as a safety net.
///
/// The fallback plan is computed first and handed to the search as its
/// starting incumbent, so the returned objective never exceeds the
/// fallback's and only improves as the time limit grows. When the search
/// stops on a limit without beating that plan, the status is
/// [`SolveStatus::Fallback`] and every entry carries `"source": "fallback"`.
pub fn anytime_solve(
    instance: &ProblemInstance,
    config: &SolveConfig,
    fallback: &dyn Allocator,
) -> Result<SolveResult, PlanError> {
    let began = Instant::now();
    let backup = fallback.allocate(instance, config.warm_start.as_ref());
    let backup_schedule = backup.as_ref().ok().and_then(|r| r.schedule.clone());
    let seeds: Vec<_> = backup_schedule.iter().map(|s| (s.entries.as_slice(), FALLBACK)).collect();
    let (mut result, origin) = solve_seeded(instance, config, &seeds)?;

    match result.status {
        SolveStatus::TimeLimitIncumbent if origin == Some(FALLBACK) => {
            result.status = SolveStatus::Fallback;
            if let Some(s) = result.schedule.as_mut() {
                tag_fallback(s);
            }
        }
        SolveStatus::TimeLimitNoIncumbent => {
            let mut schedule = match (backup, backup_schedule) {
                (Ok(_), Some(s)) if check_schedule(&s, instance).is_empty() => s,
                (Err(e), _) => return Err(e),
                _ => return Err(PlanError::Infeasible("no incumbent and no usable fallback plan".into())),
            };
            tag_fallback(&mut schedule);
            result.objective = schedule.objective;
            result.lower_bound = result.lower_bound.min(schedule.objective);
            result.gap = super::config::relative_gap(result.objective, result.lower_bound);
            result.schedule = Some(schedule);
            result.status = SolveStatus::Fallback;
        }
        SolveStatus::Infeasible => {
            return Err(PlanError::Infeasible("search space exhausted without a feasible schedule".into()));
        }
        _ => {}
    }
    result.wall_time = began.elapsed().as_secs_f64();
    Ok(result)
}
