use std::collections::BTreeMap;

use crate::model::{ProblemInstance, Schedule, TravelMode, TIME_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    /// Task `task` runs on robot `robot`.
    Assign { robot: usize, task: usize },
    /// On robot `robot`, task `first` precedes task `second` (`first < second`).
    Order { robot: usize, first: usize, second: usize },
    Start(usize),
    RobotCompletion(usize),
    Makespan,
}

impl Var {
    /// LP column name.
    pub fn name(&self) -> String {
        match *self {
            Var::Assign { robot, task } => format!("x_{robot}_{task}"),
            Var::Order { robot, first, second } => format!("y_{robot}_{first}_{second}"),
            Var::Start(j) => format!("s_{j}"),
            Var::RobotCompletion(i) => format!("Ci_{i}"),
            Var::Makespan => "Cmax".to_string(),
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, Var::Assign { .. } | Var::Order { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowKind {
    Assignment,
    Precedence,
    NoOverlapForward,
    NoOverlapBackward,
    RobotCompletion,
    Makespan,
    Deadline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub kind: RowKind,
    /// `(column index, coefficient)`, sorted by column, no zeros.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub lower: f64,
    pub upper: f64,
}

/// The explicit mixed-integer program for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub n_robots: usize,
    pub n_tasks: usize,
    pub big_m: f64,
    pub vars: Vec<Var>,
    pub bounds: Vec<Bound>,
    /// Objective coefficients, one per column.
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

/// Closed-form counts for a model with `n` robots, `m` tasks.
pub fn expected_var_count(n: usize, m: usize) -> usize {
    n * m + n * m * m.saturating_sub(1) / 2 + m + n + 1
}

pub fn expected_row_count(n: usize, m: usize, n_edges: usize, n_deadline_rows: usize) -> usize {
    m + n_edges + n * m * m.saturating_sub(1) + n * m + m + n_deadline_rows
}

struct Layout {
    n: usize,
    m: usize,
    pairs: usize,
}

impl Layout {
    fn x(&self, i: usize, j: usize) -> usize {
        i * self.m + j
    }

    fn pair(&self, j: usize, k: usize) -> usize {
        debug_assert!(j < k);
        // row-major index into the strict upper triangle
        j * (2 * self.m - j - 1) / 2 + (k - j - 1)
    }

    fn y(&self, i: usize, j: usize, k: usize) -> usize {
        self.n * self.m + i * self.pairs + self.pair(j, k)
    }

    fn s(&self, j: usize) -> usize {
        self.n * self.m + self.n * self.pairs + j
    }

    fn c(&self, i: usize) -> usize {
        self.s(self.m) + i
    }

    fn cmax(&self) -> usize {
        self.c(self.n)
    }
}

#[derive(Default)]
struct Expr(BTreeMap<usize, f64>);

impl Expr {
    fn add(&mut self, col: usize, coef: f64) -> &mut Self {
        *self.0.entry(col).or_insert(0.0) += coef;
        self
    }

    fn into_terms(self) -> Vec<(usize, f64)> {
        self.0.into_iter().filter(|&(_, c)| c != 0.0).collect()
    }
}

/// Builds the model using the instance's own big-M.
pub fn build_model(instance: &ProblemInstance) -> MilpModel {
    build_model_with_big_m(instance, instance.big_m())
}

/// Builds the model with an explicit big-M constant.
pub fn build_model_with_big_m(instance: &ProblemInstance, big_m: f64) -> MilpModel {
    let n = instance.n_robots();
    let m = instance.n_tasks();
    let lay = Layout { n, m, pairs: m * m.saturating_sub(1) / 2 };
    let augment = instance.travel_mode() == TravelMode::DurationAugment && instance.cost_params().travel.is_some();
    let w = *instance.weights();

    let mut vars = Vec::with_capacity(expected_var_count(n, m));
    let mut bounds = Vec::with_capacity(vars.capacity());
    for i in 0..n {
        for j in 0..m {
            vars.push(Var::Assign { robot: i, task: j });
            let upper = if instance.feasible(i, j) { 1.0 } else { 0.0 };
            bounds.push(Bound { lower: 0.0, upper });
        }
    }
    for i in 0..n {
        for j in 0..m {
            for k in j + 1..m {
                vars.push(Var::Order { robot: i, first: j, second: k });
                bounds.push(Bound { lower: 0.0, upper: 1.0 });
            }
        }
    }
    for j in 0..m {
        vars.push(Var::Start(j));
        let upper = match instance.deadline(j) {
            Some(dl) if !augment => dl - instance.task(j).duration,
            _ => f64::INFINITY,
        };
        bounds.push(Bound { lower: instance.release(j), upper });
    }
    for i in 0..n {
        vars.push(Var::RobotCompletion(i));
        bounds.push(Bound { lower: 0.0, upper: f64::INFINITY });
    }
    vars.push(Var::Makespan);
    bounds.push(Bound { lower: 0.0, upper: f64::INFINITY });
    debug_assert_eq!(vars.len(), expected_var_count(n, m));

    let mut objective = vec![0.0; vars.len()];
    objective[lay.cmax()] = w.alpha;
    for i in 0..n {
        objective[lay.c(i)] = w.beta;
        for j in 0..m {
            if instance.feasible(i, j) {
                objective[lay.x(i, j)] = w.lambda * instance.cost(i, j);
            }
        }
    }

    // Processing time of task j as (constant, travel terms over x_.j).
    let travel_terms = |expr: &mut Expr, j: usize, sign: f64| {
        if augment {
            for i in 0..n {
                let t = instance.cost_params().travel_time(i, j);
                if t != 0.0 {
                    expr.add(lay.x(i, j), sign * t);
                }
            }
        }
    };
    let d = |j: usize| instance.task(j).duration;

    let mut rows = Vec::new();
    for j in 0..m {
        let mut e = Expr::default();
        for i in 0..n {
            e.add(lay.x(i, j), 1.0);
        }
        rows.push(Row { name: format!("assign_{j}"), kind: RowKind::Assignment, terms: e.into_terms(), sense: Sense::Eq, rhs: 1.0 });
    }
    for &(k, j) in instance.edges() {
        let mut e = Expr::default();
        e.add(lay.s(j), 1.0).add(lay.s(k), -1.0);
        travel_terms(&mut e, k, -1.0);
        rows.push(Row { name: format!("prec_{k}_{j}"), kind: RowKind::Precedence, terms: e.into_terms(), sense: Sense::Ge, rhs: d(k) });
    }
    for i in 0..n {
        for j in 0..m {
            for k in j + 1..m {
                let y = lay.y(i, j, k);
                let mut fwd = Expr::default();
                fwd.add(lay.s(j), 1.0).add(lay.s(k), -1.0).add(y, big_m).add(lay.x(i, j), big_m).add(lay.x(i, k), big_m);
                travel_terms(&mut fwd, j, 1.0);
                rows.push(Row {
                    name: format!("noov1_{i}_{j}_{k}"),
                    kind: RowKind::NoOverlapForward,
                    terms: fwd.into_terms(),
                    sense: Sense::Le,
                    rhs: 3.0 * big_m - d(j),
                });
                let mut bwd = Expr::default();
                bwd.add(lay.s(k), 1.0).add(lay.s(j), -1.0).add(y, -big_m).add(lay.x(i, j), big_m).add(lay.x(i, k), big_m);
                travel_terms(&mut bwd, k, 1.0);
                rows.push(Row {
                    name: format!("noov2_{i}_{j}_{k}"),
                    kind: RowKind::NoOverlapBackward,
                    terms: bwd.into_terms(),
                    sense: Sense::Le,
                    rhs: 2.0 * big_m - d(k),
                });
            }
        }
    }
    for i in 0..n {
        for j in 0..m {
            let mut e = Expr::default();
            e.add(lay.c(i), 1.0).add(lay.s(j), -1.0).add(lay.x(i, j), -big_m);
            travel_terms(&mut e, j, -1.0);
            rows.push(Row {
                name: format!("comp_{i}_{j}"),
                kind: RowKind::RobotCompletion,
                terms: e.into_terms(),
                sense: Sense::Ge,
                rhs: d(j) - big_m,
            });
        }
    }
    for j in 0..m {
        let mut e = Expr::default();
        e.add(lay.cmax(), 1.0).add(lay.s(j), -1.0);
        travel_terms(&mut e, j, -1.0);
        rows.push(Row { name: format!("mksp_{j}"), kind: RowKind::Makespan, terms: e.into_terms(), sense: Sense::Ge, rhs: d(j) });
    }
    if augment {
        for j in 0..m {
            if let Some(dl) = instance.deadline(j) {
                let mut e = Expr::default();
                e.add(lay.s(j), 1.0);
                travel_terms(&mut e, j, 1.0);
                rows.push(Row { name: format!("dl_{j}"), kind: RowKind::Deadline, terms: e.into_terms(), sense: Sense::Le, rhs: dl - d(j) });
            }
        }
    }

    MilpModel { n_robots: n, n_tasks: m, big_m, vars, bounds, objective, rows }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointViolation {
    pub what: String,
    pub amount: f64,
}

impl MilpModel {
    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.is_binary()).count()
    }

    pub fn rows_of(&self, kind: RowKind) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(move |r| r.kind == kind)
    }

    /// Fixings implied by the feasibility mask (`x_ij` with upper bound 0).
    pub fn fixed_zero(&self) -> impl Iterator<Item = Var> + '_ {
        self.vars
            .iter()
            .zip(&self.bounds)
            .filter(|(v, b)| v.is_binary() && b.upper == 0.0)
            .map(|(v, _)| *v)
    }

    pub fn objective_at(&self, point: &[f64]) -> f64 {
        self.objective.iter().zip(point).map(|(c, v)| c * v).sum()
    }

    /// Lists every bound, integrality and row violated by `point`, using a
    /// tolerance scaled to the row's big-M magnitude.
    pub fn check_point(&self, point: &[f64]) -> Vec<PointViolation> {
        assert_eq!(point.len(), self.vars.len());
        let mut out = Vec::new();
        for ((var, b), &v) in self.vars.iter().zip(&self.bounds).zip(point) {
            if v < b.lower - TIME_TOL || v > b.upper + TIME_TOL {
                out.push(PointViolation { what: format!("bound {}", var.name()), amount: (b.lower - v).max(v - b.upper) });
            }
            if var.is_binary() && (v - v.round()).abs() > 1e-9 {
                out.push(PointViolation { what: format!("integrality {}", var.name()), amount: (v - v.round()).abs() });
            }
        }
        for row in &self.rows {
            let lhs: f64 = row.terms.iter().map(|&(c, a)| a * point[c]).sum();
            let scale = 1.0 + row.terms.iter().map(|(_, a)| a.abs()).fold(0.0, f64::max);
            let tol = TIME_TOL * scale;
            let excess = match row.sense {
                Sense::Le => lhs - row.rhs,
                Sense::Ge => row.rhs - lhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            if excess > tol {
                out.push(PointViolation { what: format!("row {}", row.name), amount: excess });
            }
        }
        out
    }
}

/// Maps a complete schedule to a point of `model`'s variable space.
///
/// Order variables for pairs sharing a robot follow the schedule; all other
/// order variables are set by start time, which is free for those pairs.
pub fn schedule_to_point(model: &MilpModel, instance: &ProblemInstance, schedule: &Schedule) -> Vec<f64> {
    let m = instance.n_tasks();
    let mut robot_of = vec![usize::MAX; m];
    let mut start = vec![0.0; m];
    for e in &schedule.entries {
        if let (Some(j), Some(i)) = (instance.task_index(&e.task_id), instance.robot_index(&e.robot_id)) {
            robot_of[j] = i;
            start[j] = e.start;
        }
    }
    let completion: Vec<f64> = instance
        .robots()
        .iter()
        .map(|r| schedule.robot_entries(&r.id).map(|e| e.end).fold(0.0, f64::max))
        .collect();
    model
        .vars
        .iter()
        .map(|v| match *v {
            Var::Assign { robot, task } => f64::from(u8::from(robot_of[task] == robot)),
            Var::Order { first, second, .. } => f64::from(u8::from(start[first] <= start[second])),
            Var::Start(j) => start[j],
            Var::RobotCompletion(i) => completion[i],
            Var::Makespan => completion.iter().copied().fold(0.0, f64::max),
        })
        .collect()
}
