use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::allocator::Allocator;
use crate::auction::{AuctionAllocator, GreedyAllocator};
use crate::frontend::{FitnessProvider, MockProvider};
use crate::milp::SolveConfig;
use crate::model::{check_schedule, ProblemInstance, TIME_TOL};
use crate::par::*;
use crate::sim::{run_episode, SimConfig};
use crate::ExactAllocator;

use super::family::{generate_instance, with_provider_fitness, FamilySpec};
use super::report::{BenchReport, CellResult};
use super::BenchError;

/// The four ablation rows: allocator crossed with fitness source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AblationArm {
    /// Greedy list scheduling, uniform fitness.
    Base,
    /// Exact solver, uniform fitness.
    MilpOnly,
    /// Auction, provider fitness.
    AuctionFitness,
    /// Exact solver, provider fitness.
    MilpFitness,
}

impl AblationArm {
    pub const ALL: [AblationArm; 4] = [Self::Base, Self::MilpOnly, Self::AuctionFitness, Self::MilpFitness];

    pub fn uses_fitness(self) -> bool {
        matches!(self, Self::AuctionFitness | Self::MilpFitness)
    }

    pub fn allocator(self, solve: &SolveConfig) -> Box<dyn Allocator> {
        match self {
            Self::Base => Box::new(GreedyAllocator),
            Self::AuctionFitness => Box::new(AuctionAllocator::default()),
            Self::MilpOnly | Self::MilpFitness => Box::new(ExactAllocator::new(solve.clone())),
        }
    }
}

impl fmt::Display for AblationArm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl std::str::FromStr for AblationArm {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.to_string() == s)
            .ok_or_else(|| BenchError::SpecInvalid(format!("unknown arm `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub families: Vec<FamilySpec>,
    #[serde(default = "GridSpec::default_arms")]
    pub arms: Vec<AblationArm>,
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Execution settings; the seed is replaced by the cell seed.
    #[serde(default = "GridSpec::default_sim")]
    pub sim: SimConfig,
    #[serde(default = "GridSpec::default_time_limit")]
    pub time_limit: f64,
    /// A run succeeds when every task completes by this multiple of the
    /// optimal planned makespan.
    #[serde(default = "GridSpec::default_multiplier")]
    pub success_multiplier: f64,
}

impl GridSpec {
    fn default_arms() -> Vec<AblationArm> {
        AblationArm::ALL.to_vec()
    }

    fn default_sim() -> SimConfig {
        SimConfig::default().with_noise(0.2)
    }

    fn default_time_limit() -> f64 {
        60.0
    }

    fn default_multiplier() -> f64 {
        1.5
    }

    /// Every category at `n_robots x n_tasks`, all four arms.
    pub fn standard(n_robots: usize, n_tasks: usize, repetitions: usize) -> Self {
        Self {
            families: super::Category::ALL.iter().map(|&c| FamilySpec::new(c, n_robots, n_tasks)).collect(),
            arms: Self::default_arms(),
            repetitions,
            base_seed: 0,
            sim: Self::default_sim(),
            time_limit: Self::default_time_limit(),
            success_multiplier: Self::default_multiplier(),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.families.is_empty() || self.arms.is_empty() {
            return Err(BenchError::SpecInvalid("a grid needs at least one family and one arm".into()));
        }
        if !(self.time_limit > 0.0) || !(self.success_multiplier >= 1.0) {
            return Err(BenchError::SpecInvalid("time_limit must be positive and success_multiplier at least 1".into()));
        }
        self.families.iter().try_for_each(FamilySpec::validate)
    }

    fn solve_config(&self) -> SolveConfig {
        SolveConfig::default().with_time_limit(self.time_limit).with_gap(0.0)
    }
}

/// Plans, simulates and scores every (family, seed, arm) cell. Cells run in
/// parallel; a failing cell is recorded and the grid carries on.
pub fn run_grid(spec: &GridSpec) -> Result<BenchReport, BenchError> {
    spec.validate()?;
    let jobs: Vec<(&FamilySpec, u64)> = spec
        .families
        .iter()
        .flat_map(|f| (0..spec.repetitions as u64).map(move |r| (f, spec.base_seed + r)))
        .collect();
    let rows: Vec<Vec<CellResult>> = jobs.par_iter().map(|&(family, seed)| run_instance(spec, family, seed)).collect();
    Ok(BenchReport { rows: rows.into_iter().flatten().collect() })
}

fn run_instance(spec: &GridSpec, family: &FamilySpec, seed: u64) -> Vec<CellResult> {
    let blank = |arm: AblationArm, error: String| CellResult::failed(family.category.label(), arm, seed, error);
    let plain = match generate_instance(family, seed) {
        Ok(i) => i,
        Err(e) => return spec.arms.iter().map(|&a| blank(a, e.to_string())).collect(),
    };
    let graded = with_provider_fitness(&plain);
    let solve = spec.solve_config();
    let reference = ExactAllocator::new(solve.clone())
        .allocate(&plain, None)
        .ok()
        .and_then(|r| r.schedule)
        .map(|s| s.makespan);
    spec.arms
        .iter()
        .map(|&arm| {
            let inst = if arm.uses_fitness() { &graded } else { &plain };
            run_cell(spec, arm, inst, &graded, reference, seed)
                .map(|mut c| {
                    c.family = family.category.label().to_string();
                    c
                })
                .unwrap_or_else(|e| blank(arm, e))
        })
        .collect()
}

fn run_cell(
    spec: &GridSpec,
    arm: AblationArm,
    inst: &ProblemInstance,
    graded: &ProblemInstance,
    reference: Option<f64>,
    seed: u64,
) -> Result<CellResult, String> {
    let allocator = arm.allocator(&spec.solve_config());
    let began = Instant::now();
    let planned = allocator.allocate(inst, None).map_err(|e| e.to_string())?;
    let wall_time = began.elapsed().as_secs_f64();
    let schedule = planned.schedule.ok_or_else(|| format!("no plan ({})", planned.status))?;
    if let Some(v) = check_schedule(&schedule, inst).first() {
        return Err(format!("invalid plan: {v}"));
    }
    let mock = MockProvider::default();
    let provider: Option<&dyn FitnessProvider> = if arm.uses_fitness() { Some(&mock) } else { None };
    let sim = SimConfig { seed, ..spec.sim.clone() };
    let out = run_episode(inst, &schedule, &sim, allocator.as_ref(), provider).map_err(|e| e.to_string())?;
    let m = &out.metrics;
    let limit = reference.ok_or("no reference makespan")? * spec.success_multiplier;
    Ok(CellResult {
        family: String::new(),
        arm,
        seed,
        success: m.success && m.realized_makespan <= limit + TIME_TOL,
        planned_makespan: schedule.makespan,
        realized_makespan: m.realized_makespan,
        idle_total: m.total_idle_time,
        replans: m.replan_count,
        solver_status: planned.status.to_string(),
        wall_time: Some(wall_time),
        assignment_cost: schedule.assignment_cost(graded),
        error: None,
    })
}
