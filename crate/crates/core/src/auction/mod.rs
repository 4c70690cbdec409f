//! Heuristic allocators: the ε-auction and greedy list scheduling.

mod allocate;
mod eps;
mod greedy;

use std::time::Instant;

pub use allocate::{auction_allocate, auction_run, epsilon_optimality_gap, AuctionConfig, AuctionOutcome, ShapeError, TaskPrice};
pub use greedy::greedy_allocate;

use crate::allocator::{Allocator, PlanError};
use crate::milp::{SolveResult, WarmStart};
use crate::model::{check_schedule, ProblemInstance};

#[derive(Debug, Clone, Default)]
pub struct AuctionAllocator {
    pub config: AuctionConfig,
}

impl Allocator for AuctionAllocator {
    fn name(&self) -> &'static str {
        "auction"
    }

    fn allocate(&self, instance: &ProblemInstance, warm: Option<&WarmStart>) -> Result<SolveResult, PlanError> {
        let began = Instant::now();
        let out = auction_run(instance, &self.config, warm)?;
        Ok(SolveResult::heuristic(out.schedule, began.elapsed().as_secs_f64()))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyAllocator;

impl Allocator for GreedyAllocator {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn allocate(&self, instance: &ProblemInstance, warm: Option<&WarmStart>) -> Result<SolveResult, PlanError> {
        let began = Instant::now();
        let schedule = greedy::greedy_with(instance, warm);
        let violations = check_schedule(&schedule, instance);
        if !violations.is_empty() {
            let text: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(PlanError::Violations(text.join("; ")));
        }
        Ok(SolveResult::heuristic(schedule, began.elapsed().as_secs_f64()))
    }
}
