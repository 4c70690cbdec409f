//! The shared allocator interface: an instance goes in, a schedule
//! dictionary comes out.

use thiserror::Error;

use crate::auction::AuctionAllocator;
use crate::milp::{anytime_solve, SolveConfig, SolveError, SolveResult, WarmStart};
use crate::model::ProblemInstance;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("no feasible bidder for ready task `{task}`")]
    Stalled { task: String },
    #[error("auction did not settle within {0} bids")]
    RoundLimit(u64),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("allocator produced an invalid schedule: {0}")]
    Violations(String),
    #[error("invalid allocator configuration: {0}")]
    InvalidConfig(String),
}

pub trait Allocator: Send + Sync {
    fn name(&self) -> &'static str;

    /// Plans `instance`, honouring the pinned entries of `warm` when given.
    fn allocate(&self, instance: &ProblemInstance, warm: Option<&WarmStart>) -> Result<SolveResult, PlanError>;
}

/// Exact anytime search with the auction as its fallback.
#[derive(Debug, Clone, Default)]
pub struct ExactAllocator {
    pub config: SolveConfig,
    pub fallback: AuctionAllocator,
}

impl ExactAllocator {
    pub fn new(config: SolveConfig) -> Self {
        Self { config, fallback: AuctionAllocator::default() }
    }
}

impl Allocator for ExactAllocator {
    fn name(&self) -> &'static str {
        "milp"
    }

    fn allocate(&self, instance: &ProblemInstance, warm: Option<&WarmStart>) -> Result<SolveResult, PlanError> {
        let mut config = self.config.clone();
        if let Some(w) = warm {
            config.warm_start = Some(w.clone());
        }
        anytime_solve(instance, &config, &self.fallback)
    }
}
