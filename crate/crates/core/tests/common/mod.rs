//! Random instance generation and brute-force oracles shared by the
//! integration tests. Nothing here calls a solver from the library.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robosched::model::{
    validate_instance, CostParams, FitnessMatrix, ObjectiveWeights, ProblemInstance, RobotProfile, Task, TimeWindow,
    TravelMode, ValidateOptions,
};

pub const TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Free,
    Temporal,
    Heterogeneous,
    Windows,
    Travel,
}

pub const KINDS: [Kind; 5] = [Kind::Free, Kind::Temporal, Kind::Heterogeneous, Kind::Windows, Kind::Travel];

/// A seeded instance of the given kind. Durations are multiples of 0.5 and
/// fitness is random.
pub fn random_instance(seed: u64, n: usize, m: usize, kind: Kind) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let robots: Vec<RobotProfile> = (0..n)
        .map(|i| {
            let mut caps = vec!["nav".to_string()];
            if kind == Kind::Heterogeneous && i < 2 {
                caps.push(["ir", "arm"][i].to_string());
            }
            RobotProfile::new(format!("r{i}"), caps)
        })
        .collect();
    let mut tasks: Vec<Task> = (0..m)
        .map(|j| Task::new(format!("t{j}"), f64::from(rng.random_range(1..=12u32)) * 0.5))
        .collect();
    if matches!(kind, Kind::Temporal | Kind::Windows | Kind::Travel) {
        for j in 1..m {
            if rng.random_bool(0.4) {
                let k = rng.random_range(0..j);
                let id = tasks[k].id.clone();
                tasks[j].dependencies.push(id);
            }
        }
    }
    if kind == Kind::Heterogeneous {
        for t in tasks.iter_mut() {
            if rng.random_bool(0.5) {
                t.required_capabilities.insert(["ir", "arm"][rng.random_range(0..2)].to_string());
            }
        }
    }
    if kind == Kind::Windows {
        let total: f64 = tasks.iter().map(|t| t.duration).sum();
        for t in tasks.iter_mut() {
            if rng.random_bool(0.5) {
                let release = f64::from(rng.random_range(0..=6u32)) * 0.5;
                let deadline = rng.random_bool(0.5).then(|| release + t.duration + rng.random_range(0.0..total));
                *t = t.clone().with_time_window(TimeWindow::new(release, deadline));
            }
        }
    }
    let fitness: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(0.0..=1.0)).collect()).collect();
    let mut params = CostParams { gamma: rng.random_range(0.0..3.0), ..CostParams::default() };
    if kind == Kind::Travel {
        params.travel = Some((0..n).map(|_| (0..m).map(|_| f64::from(rng.random_range(0..=4u32)) * 0.5).collect()).collect());
        params.tau = 0.1;
        if rng.random_bool(0.5) {
            params.travel_mode = TravelMode::DurationAugment;
        }
    }
    validate_instance(
        tasks,
        robots,
        Some(FitnessMatrix::from_rows(fitness)),
        params,
        ObjectiveWeights::default(),
        ValidateOptions::default(),
    )
    .expect("generated instance is valid")
}

/// Processing time from the raw fields.
pub fn processing(inst: &ProblemInstance, i: usize, j: usize) -> f64 {
    let p = inst.cost_params();
    let extra = match (&p.travel, p.travel_mode) {
        (Some(t), TravelMode::DurationAugment) => t[i][j],
        _ => 0.0,
    };
    inst.tasks()[j].duration + extra
}

/// `1 / (1 + gamma f) + tau travel` from the raw fields.
pub fn pair_cost(inst: &ProblemInstance, i: usize, j: usize) -> f64 {
    let p = inst.cost_params();
    let travel = match (&p.travel, p.travel_mode) {
        (Some(t), TravelMode::CostTerm) => p.tau * t[i][j],
        _ => 0.0,
    };
    1.0 / (1.0 + p.gamma * inst.fitness().get(i, j)) + travel
}

fn capable(inst: &ProblemInstance, i: usize, j: usize) -> bool {
    inst.tasks()[j].required_capabilities.is_subset(&inst.robots()[i].capabilities)
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for k in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(k);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Earliest-start labelling of one assignment with fixed robot sequences.
/// `None` when the sequences deadlock against precedence or a deadline is
/// missed.
fn label(inst: &ProblemInstance, assign: &[usize], orders: &[Vec<usize>]) -> Option<f64> {
    let m = assign.len();
    let mut before: Vec<Vec<usize>> = vec![Vec::new(); m];
    for t in inst.tasks() {
        let j = inst.task_index(&t.id).unwrap();
        for d in &t.dependencies {
            before[j].push(inst.task_index(d).unwrap());
        }
    }
    for seq in orders {
        for w in seq.windows(2) {
            before[w[1]].push(w[0]);
        }
    }
    let mut end: Vec<Option<f64>> = vec![None; m];
    for _ in 0..m {
        let mut progressed = false;
        for j in 0..m {
            if end[j].is_some() || before[j].iter().any(|&k| end[k].is_none()) {
                continue;
            }
            let window = inst.tasks()[j].time_window();
            let release = window.map_or(0.0, |w| w.release);
            let start = before[j].iter().map(|&k| end[k].unwrap()).fold(release, f64::max);
            let finish = start + processing(inst, assign[j], j);
            if window.and_then(|w| w.deadline).is_some_and(|d| finish > d + TOL) {
                return None;
            }
            end[j] = Some(finish);
            progressed = true;
        }
        if !progressed {
            break;
        }
    }
    let end: Vec<f64> = end.into_iter().collect::<Option<_>>()?;
    let w = inst.weights();
    let mut completion = vec![0.0_f64; inst.n_robots()];
    let mut cost = 0.0;
    for j in 0..m {
        completion[assign[j]] = completion[assign[j]].max(end[j]);
        cost += pair_cost(inst, assign[j], j);
    }
    let cmax = completion.iter().copied().fold(0.0, f64::max);
    Some(w.alpha * cmax + w.beta * completion.iter().sum::<f64>() + w.lambda * cost)
}

/// Minimum objective over every capability-feasible assignment and every
/// per-robot task order, or `None` if nothing is feasible.
pub fn brute_force_objective(inst: &ProblemInstance) -> Option<f64> {
    let (n, m) = (inst.n_robots(), inst.n_tasks());
    let mut best: Option<f64> = None;
    let mut assign = vec![0usize; m];
    let total = n.pow(m as u32);
    'outer: for code in 0..total {
        let mut c = code;
        for a in assign.iter_mut() {
            *a = c % n;
            c /= n;
        }
        for j in 0..m {
            if !capable(inst, assign[j], j) {
                continue 'outer;
            }
        }
        let per_robot: Vec<Vec<Vec<usize>>> = (0..n)
            .map(|i| permutations(&(0..m).filter(|&j| assign[j] == i).collect::<Vec<_>>()))
            .collect();
        let mut idx = vec![0usize; n];
        loop {
            let orders: Vec<Vec<usize>> = (0..n).map(|i| per_robot[i][idx[i]].clone()).collect();
            if let Some(v) = label(inst, &assign, &orders) {
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
            let mut r = 0;
            while r < n {
                idx[r] += 1;
                if idx[r] < per_robot[r].len() {
                    break;
                }
                idx[r] = 0;
                r += 1;
            }
            if r == n {
                break;
            }
        }
    }
    best
}

/// Cheapest perfect matching of robots to tasks, by enumeration.
pub fn brute_force_assignment(cost: &[Vec<Option<f64>>]) -> Option<f64> {
    let n = cost.len();
    permutations(&(0..n).collect::<Vec<_>>())
        .into_iter()
        .filter_map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<Option<f64>>())
        .min_by(f64::total_cmp)
}
