use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::cmp::Reverse;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cost::assignment_cost;
use super::types::{
    CostParams, FeasibilityMask, FitnessMatrix, ObjectiveWeights, RobotProfile, Task, TravelMode,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("duplicate task id `{0}`")]
    DuplicateTaskId(String),
    #[error("duplicate robot id `{0}`")]
    DuplicateRobotId(String),
    #[error("task `{task}` depends on unknown task `{dependency}`")]
    UnknownDependency { task: String, dependency: String },
    #[error("cyclic dependency: {}", cycle.join(" -> "))]
    CyclicDependency { cycle: Vec<String> },
    #[error("no robot can perform task `{task}` (missing capabilities: {})", missing.join(", "))]
    NoFeasibleRobot { task: String, missing: Vec<String> },
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch { what: String, expected: String, found: String },
    #[error("non-finite value in {0}")]
    NonFiniteInput(String),
    #[error("fitness entry [{robot}][{task}] = {value} is outside [0, 1]")]
    FitnessOutOfRange { robot: usize, task: usize, value: f64 },
    #[error("task `{task}` has an invalid time window: {reason}")]
    InvalidTimeWindow { task: String, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Knobs applied while turning raw artifacts into a [`ProblemInstance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateOptions {
    /// Durations at or below zero are raised to this value.
    pub duration_floor: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { duration_floor: 1e-3 }
    }
}

/// The JSON instance document: raw robots, tasks and optional parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub robots: Vec<RobotProfile>,
    pub tasks: Vec<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitness: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_params: Option<CostParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<ObjectiveWeights>,
}

impl InstanceDoc {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn validate(self) -> Result<ProblemInstance, ModelError> {
        validate_instance(
            self.tasks,
            self.robots,
            self.fitness.map(FitnessMatrix::from_rows),
            self.cost_params.unwrap_or_default(),
            self.weights.unwrap_or_default(),
            ValidateOptions::default(),
        )
    }
}

/// A validated, immutable scheduling problem. Every allocator consumes one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    robots: Vec<RobotProfile>,
    tasks: Vec<Task>,
    edges: Vec<(usize, usize)>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    topo_order: Vec<usize>,
    mask: FeasibilityMask,
    fitness: FitnessMatrix,
    cost_params: CostParams,
    weights: ObjectiveWeights,
    big_m: f64,
    task_index: BTreeMap<String, usize>,
    robot_index: BTreeMap<String, usize>,
}

fn check_finite(v: f64, what: impl FnOnce() -> String) -> Result<(), ModelError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonFiniteInput(what()))
    }
}

/// Builds a [`ProblemInstance`] from raw tasks and robots.
///
/// Durations at or below zero are clamped to `options.duration_floor`, the
/// dependency graph is checked for unknown ids and cycles, the feasibility
/// mask is derived from capabilities, and a missing fitness matrix becomes a
/// uniform matrix of ones.
pub fn validate_instance(
    mut tasks: Vec<Task>,
    robots: Vec<RobotProfile>,
    fitness: Option<FitnessMatrix>,
    cost_params: CostParams,
    weights: ObjectiveWeights,
    options: ValidateOptions,
) -> Result<ProblemInstance, ModelError> {
    if !(options.duration_floor > 0.0 && options.duration_floor.is_finite()) {
        return Err(ModelError::InvalidParameter(format!(
            "duration floor must be positive, got {}",
            options.duration_floor
        )));
    }
    check_weights(&weights)?;
    check_cost_params(&cost_params)?;

    let mut task_index = BTreeMap::new();
    for (j, t) in tasks.iter().enumerate() {
        if task_index.insert(t.id.clone(), j).is_some() {
            return Err(ModelError::DuplicateTaskId(t.id.clone()));
        }
    }
    let mut robot_index = BTreeMap::new();
    for (i, r) in robots.iter().enumerate() {
        if robot_index.insert(r.id.clone(), i).is_some() {
            return Err(ModelError::DuplicateRobotId(r.id.clone()));
        }
        if let Some(speed) = r.speed {
            if !(speed > 0.0 && speed.is_finite()) {
                return Err(ModelError::InvalidParameter(format!(
                    "robot `{}` speed must be positive",
                    r.id
                )));
            }
        }
    }

    for t in tasks.iter_mut() {
        check_finite(t.duration, || format!("duration of task `{}`", t.id))?;
        if t.duration <= 0.0 {
            t.duration = options.duration_floor;
        }
    }

    let m = tasks.len();
    let n = robots.len();
    let mut preds = vec![Vec::new(); m];
    let mut succs = vec![Vec::new(); m];
    let mut edges = Vec::new();
    for (j, t) in tasks.iter().enumerate() {
        let mut seen = BTreeSet::new();
        for dep in &t.dependencies {
            let k = *task_index.get(dep).ok_or_else(|| ModelError::UnknownDependency {
                task: t.id.clone(),
                dependency: dep.clone(),
            })?;
            if seen.insert(k) {
                preds[j].push(k);
                succs[k].push(j);
                edges.push((k, j));
            }
        }
    }
    let topo_order = topological_order(&preds, &succs).map_err(|cycle| {
        ModelError::CyclicDependency {
            cycle: cycle.into_iter().map(|j| tasks[j].id.clone()).collect(),
        }
    })?;

    let mask = FeasibilityMask::from_profiles(&robots, &tasks);
    for (j, t) in tasks.iter().enumerate() {
        if !(0..n).any(|i| mask.get(i, j)) {
            let held: BTreeSet<&String> = robots.iter().flat_map(|r| &r.capabilities).collect();
            let mut missing: Vec<String> = t
                .required_capabilities
                .iter()
                .filter(|c| !held.contains(c))
                .cloned()
                .collect();
            if missing.is_empty() {
                missing = t.required_capabilities.iter().cloned().collect();
            }
            return Err(ModelError::NoFeasibleRobot { task: t.id.clone(), missing });
        }
    }

    for t in &tasks {
        if let Some(w) = t.time_window() {
            check_finite(w.release, || format!("release of task `{}`", t.id))?;
            if w.release < 0.0 {
                return Err(ModelError::InvalidTimeWindow {
                    task: t.id.clone(),
                    reason: "release must be nonnegative".into(),
                });
            }
            if let Some(dl) = w.deadline {
                check_finite(dl, || format!("deadline of task `{}`", t.id))?;
                if dl - w.release < t.duration - 1e-9 {
                    return Err(ModelError::InvalidTimeWindow {
                        task: t.id.clone(),
                        reason: format!(
                            "window [{}, {}] is shorter than duration {}",
                            w.release, dl, t.duration
                        ),
                    });
                }
            }
        }
    }

    let fitness = match fitness {
        None => FitnessMatrix::uniform(n, m, 1.0),
        Some(f) => {
            check_matrix_shape(f.rows(), n, m, "fitness matrix")?;
            for (i, row) in f.rows().iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    check_finite(v, || format!("fitness[{i}][{j}]"))?;
                    if !(0.0..=1.0).contains(&v) {
                        return Err(ModelError::FitnessOutOfRange { robot: i, task: j, value: v });
                    }
                }
            }
            f
        }
    };
    if let Some(travel) = &cost_params.travel {
        check_matrix_shape(travel, n, m, "travel matrix")?;
        for (i, row) in travel.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                check_finite(v, || format!("travel[{i}][{j}]"))?;
                if v < 0.0 {
                    return Err(ModelError::InvalidParameter(format!(
                        "travel[{i}][{j}] must be nonnegative"
                    )));
                }
            }
        }
    }

    let mut inst = ProblemInstance {
        robots,
        tasks,
        edges,
        preds,
        succs,
        topo_order,
        mask,
        fitness,
        cost_params,
        weights,
        big_m: 0.0,
        task_index,
        robot_index,
    };
    inst.big_m = inst.default_big_m();
    Ok(inst)
}

fn check_weights(w: &ObjectiveWeights) -> Result<(), ModelError> {
    for (name, v) in [("alpha", w.alpha), ("beta", w.beta), ("lambda", w.lambda)] {
        check_finite(v, || format!("weight {name}"))?;
    }
    if w.alpha <= 0.0 || w.beta < 0.0 || w.lambda < 0.0 {
        return Err(ModelError::InvalidParameter(format!(
            "weights need alpha > 0, beta >= 0, lambda >= 0 (got {}, {}, {})",
            w.alpha, w.beta, w.lambda
        )));
    }
    Ok(())
}

fn check_cost_params(p: &CostParams) -> Result<(), ModelError> {
    check_finite(p.gamma, || "gamma".into())?;
    check_finite(p.tau, || "tau".into())?;
    if p.gamma < 0.0 || p.tau < 0.0 {
        return Err(ModelError::InvalidParameter(format!(
            "gamma and tau must be nonnegative (got {}, {})",
            p.gamma, p.tau
        )));
    }
    Ok(())
}

fn check_matrix_shape(rows: &[Vec<f64>], n: usize, m: usize, what: &str) -> Result<(), ModelError> {
    let ok = rows.len() == n && rows.iter().all(|r| r.len() == m);
    if ok {
        return Ok(());
    }
    let found = format!(
        "{}x{}",
        rows.len(),
        rows.iter().map(Vec::len).max().unwrap_or(0)
    );
    Err(ModelError::DimensionMismatch {
        what: what.into(),
        expected: format!("{n}x{m}"),
        found,
    })
}

/// Kahn's algorithm, always releasing the smallest ready index first. On a
/// cycle, returns the task indices along one cycle.
fn topological_order(preds: &[Vec<usize>], succs: &[Vec<usize>]) -> Result<Vec<usize>, Vec<usize>> {
    let m = preds.len();
    let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..m).filter(|&j| indeg[j] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(m);
    while let Some(Reverse(j)) = ready.pop() {
        order.push(j);
        for &s in &succs[j] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                ready.push(Reverse(s));
            }
        }
    }
    if order.len() == m {
        return Ok(order);
    }
    // Every leftover node has a leftover predecessor, so walking predecessors
    // must revisit a node.
    let leftover: Vec<bool> = indeg.iter().map(|&d| d > 0).collect();
    let start = (0..m).find(|&j| leftover[j]).expect("leftover node");
    let mut pos = vec![usize::MAX; m];
    let mut walk = Vec::new();
    let mut cur = start;
    while pos[cur] == usize::MAX {
        pos[cur] = walk.len();
        walk.push(cur);
        cur = *preds[cur].iter().find(|&&k| leftover[k]).expect("leftover pred");
    }
    let mut cycle: Vec<usize> = walk[pos[cur]..].to_vec();
    cycle.reverse();
    cycle.push(cycle[0]);
    Err(cycle)
}

impl ProblemInstance {
    pub fn n_robots(&self) -> usize {
        self.robots.len()
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn robots(&self) -> &[RobotProfile] {
        &self.robots
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn robot(&self, i: usize) -> &RobotProfile {
        &self.robots[i]
    }

    pub fn task(&self, j: usize) -> &Task {
        &self.tasks[j]
    }

    /// Precedence edges `(k, j)`: `k` must finish before `j` starts.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn preds(&self, j: usize) -> &[usize] {
        &self.preds[j]
    }

    pub fn succs(&self, j: usize) -> &[usize] {
        &self.succs[j]
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo_order
    }

    pub fn mask(&self) -> &FeasibilityMask {
        &self.mask
    }

    #[inline]
    pub fn feasible(&self, robot: usize, task: usize) -> bool {
        self.mask.get(robot, task)
    }

    pub fn feasible_robots(&self, task: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_robots()).filter(move |&i| self.mask.get(i, task))
    }

    pub fn fitness(&self) -> &FitnessMatrix {
        &self.fitness
    }

    pub fn cost_params(&self) -> &CostParams {
        &self.cost_params
    }

    pub fn weights(&self) -> &ObjectiveWeights {
        &self.weights
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    pub fn task_index(&self, id: &str) -> Option<usize> {
        self.task_index.get(id).copied()
    }

    pub fn robot_index(&self, id: &str) -> Option<usize> {
        self.robot_index.get(id).copied()
    }

    /// Processing time of `task` when executed by `robot`.
    #[inline]
    pub fn duration_on(&self, robot: usize, task: usize) -> f64 {
        self.tasks[task].duration + self.cost_params.travel_time(robot, task)
    }

    /// Assignment cost `c_ij`.
    #[inline]
    pub fn cost(&self, robot: usize, task: usize) -> f64 {
        assignment_cost(robot, task, &self.fitness, &self.cost_params)
    }

    pub fn release(&self, task: usize) -> f64 {
        self.tasks[task].time_window().map_or(0.0, |w| w.release)
    }

    pub fn deadline(&self, task: usize) -> Option<f64> {
        self.tasks[task].time_window().and_then(|w| w.deadline)
    }

    pub fn travel_mode(&self) -> TravelMode {
        self.cost_params.travel_mode
    }

    /// `sum_j max_i p_ij` plus the latest release time. Without time windows
    /// or travel augmentation this is exactly the sum of durations.
    fn default_big_m(&self) -> f64 {
        let work: f64 = (0..self.n_tasks())
            .map(|j| {
                (0..self.n_robots())
                    .map(|i| self.duration_on(i, j))
                    .fold(self.tasks[j].duration, f64::max)
            })
            .sum();
        let max_release = (0..self.n_tasks()).map(|j| self.release(j)).fold(0.0, f64::max);
        work + max_release
    }

    /// Copy of this instance with a different big-M constant.
    pub fn with_big_m(&self, big_m: f64) -> Self {
        assert!(big_m > 0.0, "big-M must be positive");
        let mut inst = self.clone();
        inst.big_m = big_m;
        inst
    }

    /// Copy of this instance with a replacement fitness matrix.
    pub fn with_fitness(&self, fitness: FitnessMatrix) -> Result<Self, ModelError> {
        let mut doc = self.to_doc();
        doc.fitness = Some(fitness.rows().to_vec());
        doc.validate()
    }

    pub fn with_weights(&self, weights: ObjectiveWeights) -> Result<Self, ModelError> {
        check_weights(&weights)?;
        let mut inst = self.clone();
        inst.weights = weights;
        Ok(inst)
    }

    /// Serializable form. Re-validating it yields an identical instance.
    pub fn to_doc(&self) -> InstanceDoc {
        InstanceDoc {
            robots: self.robots.clone(),
            tasks: self.tasks.clone(),
            fitness: Some(self.fitness.rows().to_vec()),
            cost_params: Some(self.cost_params.clone()),
            weights: Some(self.weights),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TimeWindow;

    fn robots2() -> Vec<RobotProfile> {
        vec![
            RobotProfile::new("r1", ["nav"]),
            RobotProfile::new("r2", ["nav", "vlm_qa"]),
        ]
    }

    fn build(tasks: Vec<Task>, robots: Vec<RobotProfile>) -> Result<ProblemInstance, ModelError> {
        validate_instance(
            tasks,
            robots,
            None,
            CostParams::default(),
            ObjectiveWeights::default(),
            ValidateOptions::default(),
        )
    }

    #[test]
    fn chain_sets_big_m_and_edges() {
        let tasks = vec![
            Task::new("a", 3.0),
            Task::new("b", 4.0).with_dependencies(["a"]),
            Task::new("c", 5.0).with_dependencies(["b"]),
        ];
        let inst = build(tasks, robots2()).unwrap();
        assert_eq!(inst.big_m(), 12.0);
        assert_eq!(inst.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(inst.topo_order(), &[0, 1, 2]);
    }

    #[test]
    fn zero_duration_is_clamped_to_floor() {
        let opts = ValidateOptions { duration_floor: 0.001 };
        let inst = validate_instance(
            vec![Task::new("a", 0.0), Task::new("b", -2.0)],
            robots2(),
            None,
            CostParams::default(),
            ObjectiveWeights::default(),
            opts,
        )
        .unwrap();
        assert_eq!(inst.task(0).duration, 0.001);
        assert_eq!(inst.task(1).duration, 0.001);
    }

    #[test]
    fn missing_capability_is_rejected() {
        let tasks = vec![Task::new("scan", 2.0).with_capabilities(["thermal_qa"])];
        match build(tasks, robots2()) {
            Err(ModelError::NoFeasibleRobot { task, missing }) => {
                assert_eq!(task, "scan");
                assert_eq!(missing, vec!["thermal_qa".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cycle_is_named() {
        let tasks = vec![
            Task::new("a", 1.0).with_dependencies(["c"]),
            Task::new("b", 1.0).with_dependencies(["a"]),
            Task::new("c", 1.0).with_dependencies(["b"]),
            Task::new("d", 1.0),
        ];
        match build(tasks, robots2()) {
            Err(ModelError::CyclicDependency { cycle }) => {
                assert_eq!(cycle.first(), cycle.last());
                assert_eq!(cycle.len(), 4);
                for id in ["a", "b", "c"] {
                    assert!(cycle.contains(&id.to_string()));
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn self_dependency_is_a_cycle() {
        let tasks = vec![Task::new("a", 1.0).with_dependencies(["a"])];
        assert!(matches!(build(tasks, robots2()), Err(ModelError::CyclicDependency { .. })));
    }

    #[test]
    fn unknown_dependency() {
        let tasks = vec![Task::new("a", 1.0).with_dependencies(["zz"])];
        assert_eq!(
            build(tasks, robots2()).unwrap_err(),
            ModelError::UnknownDependency { task: "a".into(), dependency: "zz".into() }
        );
    }

    #[test]
    fn duplicate_ids() {
        let tasks = vec![Task::new("a", 1.0), Task::new("a", 2.0)];
        assert_eq!(build(tasks, robots2()).unwrap_err(), ModelError::DuplicateTaskId("a".into()));
        let robots = vec![RobotProfile::new("r", ["x"]), RobotProfile::new("r", ["y"])];
        assert_eq!(
            build(vec![Task::new("a", 1.0)], robots).unwrap_err(),
            ModelError::DuplicateRobotId("r".into())
        );
    }

    #[test]
    fn fitness_shape_is_checked() {
        let err = validate_instance(
            vec![Task::new("a", 1.0)],
            robots2(),
            Some(FitnessMatrix::from_rows(vec![vec![0.5]])),
            CostParams::default(),
            ObjectiveWeights::default(),
            ValidateOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::DimensionMismatch { .. }));
    }

    #[test]
    fn missing_fitness_defaults_to_ones() {
        let inst = build(vec![Task::new("a", 1.0), Task::new("b", 1.0)], robots2()).unwrap();
        assert!(inst.fitness().rows().iter().flatten().all(|&v| v == 1.0));
    }

    #[test]
    fn window_shorter_than_duration_is_rejected() {
        let tasks = vec![Task::new("a", 5.0).with_time_window(TimeWindow::new(1.0, Some(4.0)))];
        assert!(matches!(build(tasks, robots2()), Err(ModelError::InvalidTimeWindow { .. })));
    }

    #[test]
    fn big_m_covers_release_times() {
        let tasks = vec![
            Task::new("a", 2.0).with_time_window(TimeWindow::release_only(10.0)),
            Task::new("b", 3.0),
        ];
        let inst = build(tasks, robots2()).unwrap();
        assert_eq!(inst.big_m(), 15.0);
    }

    #[test]
    fn mask_follows_capabilities() {
        let tasks = vec![Task::new("a", 1.0).with_capabilities(["vlm_qa"]), Task::new("b", 1.0)];
        let inst = build(tasks, robots2()).unwrap();
        assert!(!inst.feasible(0, 0));
        assert!(inst.feasible(1, 0));
        assert!(inst.feasible(0, 1) && inst.feasible(1, 1));
    }
}
