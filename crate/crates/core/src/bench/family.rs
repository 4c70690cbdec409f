use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frontend::{mock_fitness, MockRules};
use crate::model::{
    normalize_fitness, validate_instance, CostParams, ObjectiveWeights, ProblemInstance, RobotProfile, Task,
    ValidateOptions,
};

use super::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    ConstraintFree,
    Temporal,
    Heterogeneous,
}

impl Category {
    pub const ALL: [Category; 3] = [Self::ConstraintFree, Self::Temporal, Self::Heterogeneous];

    pub fn label(self) -> &'static str {
        match self {
            Self::ConstraintFree => "constraint_free",
            Self::Temporal => "temporal",
            Self::Heterogeneous => "heterogeneous",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Generator settings for one instance category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub category: Category,
    pub n_robots: usize,
    pub n_tasks: usize,
    /// Inclusive integer duration range.
    #[serde(default = "FamilySpec::default_duration")]
    pub duration: (u32, u32),
    /// Chance that a task gets a parent. At 1.0 every task follows the
    /// previous one, giving a single chain.
    #[serde(default = "FamilySpec::default_density")]
    pub chain_density: f64,
    /// Specialist capabilities; the i-th one is held by robot i only.
    #[serde(default = "FamilySpec::default_capabilities")]
    pub capabilities: Vec<String>,
    /// Share of specialist tasks that any robot may run but one robot suits
    /// best. The rest strictly require the capability.
    #[serde(default = "FamilySpec::default_soft")]
    pub soft_fraction: f64,
}

impl FamilySpec {
    fn default_duration() -> (u32, u32) {
        (2, 9)
    }

    fn default_density() -> f64 {
        0.5
    }

    fn default_capabilities() -> Vec<String> {
        vec!["ir".into(), "rgb".into()]
    }

    fn default_soft() -> f64 {
        0.5
    }

    pub fn new(category: Category, n_robots: usize, n_tasks: usize) -> Self {
        Self {
            category,
            n_robots,
            n_tasks,
            duration: Self::default_duration(),
            chain_density: Self::default_density(),
            capabilities: Self::default_capabilities(),
            soft_fraction: Self::default_soft(),
        }
    }

    pub fn with_density(mut self, density: f64) -> Self {
        self.chain_density = density;
        self
    }

    pub fn with_capabilities<I: IntoIterator<Item = S>, S: Into<String>>(mut self, caps: I) -> Self {
        self.capabilities = caps.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_soft_fraction(mut self, fraction: f64) -> Self {
        self.soft_fraction = fraction;
        self
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::SpecInvalid(m));
        if self.n_robots == 0 || self.n_tasks == 0 {
            return bad("a family needs at least one robot and one task".into());
        }
        let (lo, hi) = self.duration;
        if lo == 0 || lo > hi {
            return bad(format!("duration range ({lo}, {hi}) must satisfy 1 <= lo <= hi"));
        }
        if !(0.0..=1.0).contains(&self.chain_density) || !(0.0..=1.0).contains(&self.soft_fraction) {
            return bad("chain_density and soft_fraction must lie in [0, 1]".into());
        }
        if self.category == Category::Temporal && self.n_tasks < 2 {
            return bad("temporal instances need at least two tasks".into());
        }
        if self.category == Category::Heterogeneous {
            if self.capabilities.is_empty() {
                return bad("heterogeneous instances need at least one capability".into());
            }
            if self.capabilities.len() > self.n_robots {
                return bad(format!(
                    "{} capabilities need at least as many robots, got {}",
                    self.capabilities.len(),
                    self.n_robots
                ));
            }
            if self.capabilities.iter().any(|c| c == "nav") {
                return bad("`nav` is shared by every robot and cannot be a specialist capability".into());
            }
        }
        Ok(())
    }
}

/// One seeded instance of `spec`, with uniform fitness.
pub fn generate_instance(spec: &FamilySpec, seed: u64) -> Result<ProblemInstance, BenchError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = spec.duration;
    let robots: Vec<RobotProfile> = (0..spec.n_robots)
        .map(|i| {
            let mut r = RobotProfile::new(format!("r{}", i + 1), ["nav"]);
            if spec.category == Category::Heterogeneous {
                if let Some(c) = spec.capabilities.get(i) {
                    r.capabilities.insert(c.clone());
                }
            }
            r
        })
        .collect();
    let mut tasks: Vec<Task> = (0..spec.n_tasks)
        .map(|j| Task::new(format!("t{}", j + 1), f64::from(rng.random_range(lo..=hi))))
        .collect();

    match spec.category {
        Category::ConstraintFree => {}
        Category::Temporal => {
            let mut edges = 0;
            for j in 1..tasks.len() {
                if rng.random_bool(spec.chain_density) {
                    let parent = if rng.random_bool(spec.chain_density) { j - 1 } else { rng.random_range(0..j) };
                    let id = tasks[parent].id.clone();
                    tasks[j].dependencies.push(id);
                    edges += 1;
                }
            }
            if edges == 0 {
                let id = tasks[0].id.clone();
                tasks[1].dependencies.push(id);
            }
        }
        Category::Heterogeneous => {
            for (j, t) in tasks.iter_mut().enumerate() {
                let cap = spec.capabilities[rng.random_range(0..spec.capabilities.len())].clone();
                let soft = j > 0 && rng.random_bool(spec.soft_fraction);
                if soft {
                    t.description = format!("survey zone {} with {cap}", j + 1);
                } else {
                    t.description = format!("inspect zone {} with {cap}", j + 1);
                    t.required_capabilities.insert(cap);
                }
            }
        }
    }
    validate_instance(
        tasks,
        robots,
        None,
        CostParams::default(),
        ObjectiveWeights::default(),
        ValidateOptions::default(),
    )
    .map_err(|e| BenchError::SpecInvalid(e.to_string()))
}

/// One instance per seed.
pub fn generate_family(spec: &FamilySpec, seeds: &[u64]) -> Result<Vec<ProblemInstance>, BenchError> {
    seeds.iter().map(|&s| generate_instance(spec, s)).collect()
}

/// `instance` with the mock grader's normalized fitness.
pub fn with_provider_fitness(instance: &ProblemInstance) -> ProblemInstance {
    let raw = mock_fitness(instance.robots(), instance.tasks(), &MockRules::default());
    let norm = normalize_fitness(&raw).expect("mock scores are finite and rectangular");
    instance.with_fitness(norm).expect("normalized fitness lies in [0, 1]")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constraint_free_shape() {
        let inst = generate_instance(&FamilySpec::new(Category::ConstraintFree, 2, 6), 7).unwrap();
        assert_eq!(inst.n_tasks(), 6);
        assert!(inst.edges().is_empty());
        assert!(inst.mask().rows().iter().flatten().all(|&g| g));
        assert!(inst.tasks().iter().all(|t| (2.0..=9.0).contains(&t.duration) && t.duration.fract() == 0.0));
    }

    #[test]
    fn full_density_is_one_chain() {
        let inst = generate_instance(&FamilySpec::new(Category::Temporal, 2, 4).with_density(1.0), 3).unwrap();
        assert_eq!(inst.edges(), &[(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn temporal_always_has_an_edge() {
        let spec = FamilySpec::new(Category::Temporal, 2, 5).with_density(0.0);
        assert_eq!(generate_instance(&spec, 1).unwrap().edges().len(), 1);
    }

    #[test]
    fn partition_rule() {
        let spec = FamilySpec::new(Category::Heterogeneous, 2, 8).with_capabilities(["ir", "rgb"]).with_soft_fraction(0.0);
        for seed in 0..5 {
            let inst = generate_instance(&spec, seed).unwrap();
            for (j, t) in inst.tasks().iter().enumerate() {
                let holders: Vec<usize> = inst.feasible_robots(j).collect();
                if t.required_capabilities.contains("ir") {
                    assert_eq!(holders, vec![0]);
                } else {
                    assert_eq!(holders, vec![1]);
                }
            }
        }
    }

    #[test]
    fn soft_tasks_prefer_their_specialist() {
        let spec = FamilySpec::new(Category::Heterogeneous, 2, 8).with_soft_fraction(1.0);
        let inst = with_provider_fitness(&generate_instance(&spec, 5).unwrap());
        assert!(!inst.tasks()[0].required_capabilities.is_empty());
        for (j, t) in inst.tasks().iter().enumerate().skip(1) {
            assert!(t.required_capabilities.is_empty());
            let best = if t.description.ends_with("ir") { 0 } else { 1 };
            assert_eq!(inst.fitness().get(best, j), 1.0);
            assert_eq!(inst.fitness().get(1 - best, j), 0.0);
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let spec = FamilySpec::new(Category::Temporal, 3, 7);
        assert_eq!(generate_instance(&spec, 9).unwrap(), generate_instance(&spec, 9).unwrap());
        assert_ne!(generate_instance(&spec, 9).unwrap(), generate_instance(&spec, 10).unwrap());
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_instance(&FamilySpec::new(Category::Heterogeneous, 1, 3), 0).is_err());
        let mut s = FamilySpec::new(Category::ConstraintFree, 2, 3);
        s.duration = (5, 2);
        assert!(matches!(generate_instance(&s, 0), Err(BenchError::SpecInvalid(_))));
    }
}
