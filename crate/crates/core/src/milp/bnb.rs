//! Depth-first branch-and-bound over (robot, insertion position) decisions.
//!
//! Tasks are placed in topological order. For a fixed set of per-robot
//! sequences the earliest-start labels over precedence and sequence arcs are
//! the optimal start times, so enumerating sequences optimizes the model
//! exactly. Nodes are pruned with a combinatorial bound built from heads,
//! tails and machine loads.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde_json::Value;

use crate::model::{ProblemInstance, Schedule, ScheduleEntry, TIME_TOL};
use crate::par::*;

use super::config::{relative_gap, BoundSample, SolveConfig, SolveError, SolveResult, SolveStatus};
use super::warm::WarmStart;

const NONE: usize = usize::MAX;
const CLOCK_STRIDE: u64 = 32;

/// Decision rank: (robot rank in the task's candidate list, position rank
/// counted from the back of the sequence).
type Decision = (u32, u32);

fn obj_tol(v: f64) -> f64 {
    1e-9 * v.abs().max(1.0)
}

fn ceil_int(v: f64) -> f64 {
    (v - 1e-9).ceil()
}

fn is_int(v: f64) -> bool {
    (v - v.round()).abs() <= 1e-9
}

struct Prep<'a> {
    inst: &'a ProblemInstance,
    n: usize,
    m: usize,
    order: Vec<usize>,
    depth_of: Vec<usize>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    /// `ancestors[j]` holds every task with a path to `j`.
    ancestors: Vec<Vec<bool>>,
    p: Vec<Vec<f64>>,
    pmin: Vec<f64>,
    tail: Vec<f64>,
    cmin: Vec<f64>,
    candidates: Vec<Vec<usize>>,
    fixed: Vec<Option<(usize, f64)>>,
    frozen_meta: Vec<Option<BTreeMap<String, Value>>>,
    twins: Vec<Vec<usize>>,
    free: bool,
    integral: bool,
    release: Vec<f64>,
    deadline: Vec<f64>,
}

impl<'a> Prep<'a> {
    fn new(inst: &'a ProblemInstance, warm: Option<&WarmStart>) -> Result<Self, SolveError> {
        let n = inst.n_robots();
        let m = inst.n_tasks();
        let order = inst.topo_order().to_vec();
        let mut depth_of = vec![0; m];
        for (d, &j) in order.iter().enumerate() {
            depth_of[j] = d;
        }

        // reachability in reverse topological order, then transitive reduction
        let mut reach = vec![vec![false; m]; m];
        for &k in order.iter().rev() {
            for &j in inst.succs(k) {
                reach[k][j] = true;
                for t in 0..m {
                    if reach[j][t] {
                        reach[k][t] = true;
                    }
                }
            }
        }
        let mut preds = vec![Vec::new(); m];
        let mut succs = vec![Vec::new(); m];
        for j in 0..m {
            let direct = inst.preds(j);
            for &k in direct {
                let implied = direct.iter().any(|&k2| k2 != k && reach[k][k2]);
                if !implied {
                    preds[j].push(k);
                    succs[k].push(j);
                }
            }
        }
        let ancestors: Vec<Vec<bool>> = (0..m).map(|j| (0..m).map(|k| reach[k][j]).collect()).collect();

        let mut fixed = vec![None; m];
        let mut frozen_meta = vec![None; m];
        if let Some(w) = warm {
            for e in &w.frozen {
                let err = |reason: &str| SolveError::FrozenInfeasible { task: e.task_id.clone(), reason: reason.into() };
                let j = inst.task_index(&e.task_id).ok_or_else(|| err("unknown task"))?;
                let i = inst.robot_index(&e.robot_id).ok_or_else(|| err("unknown robot"))?;
                if !inst.feasible(i, j) {
                    return Err(err("robot cannot perform the task"));
                }
                fixed[j] = Some((i, e.start));
                frozen_meta[j] = Some(e.metadata.clone());
            }
        }

        let p: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..m).map(|j| if inst.feasible(i, j) { inst.duration_on(i, j) } else { f64::INFINITY }).collect())
            .collect();
        let mut candidates = Vec::with_capacity(m);
        for j in 0..m {
            let mut c: Vec<usize> = match fixed[j] {
                Some((i, _)) => vec![i],
                None => inst.feasible_robots(j).collect(),
            };
            c.sort_by(|&a, &b| inst.cost(a, j).total_cmp(&inst.cost(b, j)).then(a.cmp(&b)));
            candidates.push(c);
        }
        let pmin: Vec<f64> = (0..m).map(|j| candidates[j].iter().map(|&i| p[i][j]).fold(f64::INFINITY, f64::min)).collect();
        let cmin: Vec<f64> =
            (0..m).map(|j| candidates[j].iter().map(|&i| inst.cost(i, j)).fold(f64::INFINITY, f64::min)).collect();
        let mut tail = vec![0.0; m];
        for &k in order.iter().rev() {
            tail[k] = inst.succs(k).iter().map(|&j| pmin[j] + tail[j]).fold(0.0, f64::max);
        }

        let holds_frozen: Vec<bool> = (0..n).map(|i| fixed.iter().any(|f| matches!(f, Some((r, _)) if *r == i))).collect();
        let same = |a: usize, b: usize| {
            (0..m).all(|j| {
                inst.feasible(a, j) == inst.feasible(b, j)
                    && p[a][j].to_bits() == p[b][j].to_bits()
                    && inst.cost(a, j).to_bits() == inst.cost(b, j).to_bits()
            })
        };
        let twins: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                if holds_frozen[i] {
                    return Vec::new();
                }
                (0..i).filter(|&k| !holds_frozen[k] && same(k, i)).collect()
            })
            .collect();

        let release: Vec<f64> = (0..m).map(|j| inst.release(j)).collect();
        let deadline: Vec<f64> = (0..m).map(|j| inst.deadline(j).unwrap_or(f64::INFINITY)).collect();
        let free = inst.edges().is_empty()
            && release.iter().all(|&r| r == 0.0)
            && deadline.iter().all(|d| d.is_infinite())
            && fixed.iter().all(Option::is_none);
        let integral = (0..m).all(|j| {
            is_int(release[j])
                && fixed[j].is_none_or(|(_, s)| is_int(s))
                && candidates[j].iter().all(|&i| is_int(p[i][j]))
        });

        Ok(Self {
            inst,
            n,
            m,
            order,
            depth_of,
            preds,
            succs,
            ancestors,
            p,
            pmin,
            tail,
            cmin,
            candidates,
            fixed,
            frozen_meta,
            twins,
            free,
            integral,
            release,
            deadline,
        })
    }
}

/// Worker-local search state plus scratch buffers.
#[derive(Clone)]
struct State {
    seqs: Vec<Vec<usize>>,
    robot_of: Vec<usize>,
    key: Vec<Decision>,
    start: Vec<f64>,
    fin: Vec<f64>,
    head: Vec<f64>,
    indeg: Vec<usize>,
    next: Vec<usize>,
    queue: Vec<usize>,
}

impl State {
    fn new(n: usize, m: usize) -> Self {
        Self {
            seqs: vec![Vec::new(); n],
            robot_of: vec![NONE; m],
            key: Vec::with_capacity(m),
            start: vec![0.0; m],
            fin: vec![0.0; m],
            head: vec![0.0; m],
            indeg: vec![0; m],
            next: vec![NONE; m],
            queue: Vec::with_capacity(m),
        }
    }

    fn place(&mut self, task: usize, robot: usize, pos: usize, d: Decision) {
        self.seqs[robot].insert(pos, task);
        self.robot_of[task] = robot;
        self.key.push(d);
    }

    fn unplace(&mut self, task: usize, robot: usize, pos: usize) {
        self.seqs[robot].remove(pos);
        self.robot_of[task] = NONE;
        self.key.pop();
    }
}

enum Eval {
    Infeasible,
    Node { lb: f64 },
    Leaf { obj: f64 },
}

struct Incumbent {
    obj: f64,
    key: Vec<Decision>,
    robot_of: Vec<usize>,
    start: Vec<f64>,
    origin: Option<&'static str>,
    trace: Vec<BoundSample>,
}

struct Search<'a> {
    prep: Prep<'a>,
    gap_rel: f64,
    node_limit: Option<u64>,
    began: Instant,
    deadline: Instant,
    nodes: AtomicU64,
    stop: AtomicBool,
    inc_bits: AtomicU64,
    relaxed_bits: AtomicU64,
    root_lb: f64,
    inc: Mutex<Incumbent>,
}

impl<'a> Search<'a> {
    fn stopped(&self) -> bool {
        self.stop.load(Ordering::Relaxed)
    }

    /// Counts a node; returns true when the search must stop.
    fn tick(&self) -> bool {
        if self.stopped() {
            return true;
        }
        if let Some(limit) = self.node_limit {
            if self.nodes.load(Ordering::Relaxed) >= limit {
                self.stop.store(true, Ordering::Relaxed);
                return true;
            }
        }
        let k = self.nodes.fetch_add(1, Ordering::Relaxed);
        if k % CLOCK_STRIDE == 0 && Instant::now() >= self.deadline {
            self.stop.store(true, Ordering::Relaxed);
            return true;
        }
        false
    }

    fn incumbent(&self) -> f64 {
        f64::from_bits(self.inc_bits.load(Ordering::Acquire))
    }

    /// Earliest-start labels for the first `depth` tasks, then the bound.
    fn evaluate(&self, st: &mut State, depth: usize) -> Eval {
        let pr = &self.prep;
        let placed = &pr.order[..depth];
        for &j in placed {
            st.indeg[j] = pr.preds[j].len();
            st.start[j] = pr.release[j];
            st.next[j] = NONE;
        }
        for seq in &st.seqs {
            for w in seq.windows(2) {
                st.indeg[w[1]] += 1;
                st.next[w[0]] = w[1];
            }
        }
        st.queue.clear();
        st.queue.extend(placed.iter().copied().filter(|&j| st.indeg[j] == 0));
        let mut done = 0;
        while let Some(j) = st.queue.pop() {
            done += 1;
            let i = st.robot_of[j];
            let mut s = st.start[j];
            if let Some((_, fs)) = pr.fixed[j] {
                if s > fs + TIME_TOL {
                    return Eval::Infeasible;
                }
                s = fs;
            }
            st.start[j] = s;
            let f = s + pr.p[i][j];
            if f > pr.deadline[j] + TIME_TOL {
                return Eval::Infeasible;
            }
            st.fin[j] = f;
            for &k in &pr.succs[j] {
                if pr.depth_of[k] < depth {
                    st.start[k] = st.start[k].max(f);
                    st.indeg[k] -= 1;
                    if st.indeg[k] == 0 {
                        st.queue.push(k);
                    }
                }
            }
            let k = st.next[j];
            if k != NONE {
                st.start[k] = st.start[k].max(f);
                st.indeg[k] -= 1;
                if st.indeg[k] == 0 {
                    st.queue.push(k);
                }
            }
        }
        if done < depth {
            return Eval::Infeasible;
        }

        let w = pr.inst.weights();
        let cost_sum: f64 = placed.iter().map(|&j| pr.inst.cost(st.robot_of[j], j)).sum();
        let mut ends = vec![0.0; pr.n];
        let mut busy = vec![0.0; pr.n];
        for (i, seq) in st.seqs.iter().enumerate() {
            if let Some(&last) = seq.last() {
                ends[i] = st.fin[last];
            }
            busy[i] = seq.iter().map(|&j| pr.p[i][j]).sum();
        }
        if depth == pr.m {
            let cmax = ends.iter().copied().fold(0.0, f64::max);
            let sum: f64 = ends.iter().sum();
            return Eval::Leaf { obj: w.alpha * cmax + w.beta * sum + w.lambda * cost_sum };
        }

        let mut cmax_lb = ends.iter().copied().fold(0.0, f64::max);
        for &j in placed {
            cmax_lb = cmax_lb.max(st.fin[j] + pr.tail[j]);
        }
        let mut rem_work = 0.0;
        let mut rem_cost = 0.0;
        let mut min_head = f64::INFINITY;
        let mut forced = vec![0.0; pr.n];
        for &j in &pr.order[depth..] {
            let mut h = pr.release[j];
            if let Some((_, fs)) = pr.fixed[j] {
                h = h.max(fs);
            }
            for &k in &pr.preds[j] {
                let ready = if pr.depth_of[k] < depth { st.fin[k] } else { st.head[k] + pr.pmin[k] };
                h = h.max(ready);
            }
            if h + pr.pmin[j] > pr.deadline[j] + TIME_TOL {
                return Eval::Infeasible;
            }
            st.head[j] = h;
            cmax_lb = cmax_lb.max(h + pr.pmin[j] + pr.tail[j]);
            min_head = min_head.min(h);
            rem_work += pr.pmin[j];
            rem_cost += pr.cmin[j];
            if let [only] = pr.candidates[j][..] {
                forced[only] += pr.pmin[j];
            }
        }
        let n = pr.n as f64;
        let total_busy: f64 = busy.iter().sum();
        cmax_lb = cmax_lb.max((total_busy + rem_work) / n).max(min_head + rem_work / n);
        let mut sum_own = 0.0;
        for i in 0..pr.n {
            let own = ends[i].max(busy[i] + forced[i]);
            cmax_lb = cmax_lb.max(busy[i] + forced[i]);
            sum_own += own;
        }
        let mut sum_lb = sum_own.max(total_busy + rem_work).max(cmax_lb);
        if pr.integral {
            cmax_lb = ceil_int(cmax_lb);
            sum_lb = ceil_int(sum_lb.max(cmax_lb));
        }
        Eval::Node { lb: w.alpha * cmax_lb + w.beta * sum_lb + w.lambda * (cost_sum + rem_cost) }
    }

    fn offer(&self, st: &State, obj: f64, origin: Option<&'static str>) {
        let mut g = self.inc.lock().expect("incumbent lock");
        let tol = obj_tol(g.obj);
        let better = !g.obj.is_finite() || obj < g.obj - tol || ((obj - g.obj).abs() <= tol && st.key < g.key);
        if !better {
            return;
        }
        g.obj = obj;
        g.key.clone_from(&st.key);
        g.robot_of.clone_from(&st.robot_of);
        g.start.clone_from(&st.start);
        g.origin = origin;
        let sample = BoundSample {
            nodes: self.nodes.load(Ordering::Relaxed),
            elapsed: self.began.elapsed().as_secs_f64(),
            incumbent: obj,
            lower_bound: self.root_lb.min(obj),
        };
        g.trace.push(sample);
        self.inc_bits.store(obj.to_bits(), Ordering::Release);
    }

    fn prune(&self, lb: f64, key: &[Decision]) -> bool {
        let inc = self.incumbent();
        if !inc.is_finite() {
            return false;
        }
        let tol = obj_tol(inc);
        if lb > inc + tol {
            return true;
        }
        if lb >= inc - tol {
            let g = self.inc.lock().expect("incumbent lock");
            let tol = obj_tol(g.obj);
            if lb > g.obj + tol {
                return true;
            }
            return lb >= g.obj - tol && key > &g.key[..key.len()];
        }
        if self.gap_rel > 0.0 && inc - lb <= self.gap_rel * inc.abs() {
            self.relaxed_bits.fetch_min(lb.max(0.0).to_bits(), Ordering::AcqRel);
            return true;
        }
        false
    }

    fn skip_twin(&self, st: &State, robot: usize) -> bool {
        st.seqs[robot].is_empty() && self.prep.twins[robot].iter().any(|&k| st.seqs[k].is_empty())
    }

    fn min_pos(&self, st: &State, robot: usize, task: usize) -> usize {
        let anc = &self.prep.ancestors[task];
        st.seqs[robot].iter().rposition(|&k| anc[k]).map_or(0, |p| p + 1)
    }

    /// Children of the node at `depth`, in branching order.
    fn children(&self, st: &State, depth: usize) -> Vec<(usize, usize, Decision)> {
        let j = self.prep.order[depth];
        let mut out = Vec::new();
        for (rr, &i) in self.prep.candidates[j].iter().enumerate() {
            if self.skip_twin(st, i) {
                continue;
            }
            let len = st.seqs[i].len();
            let lo = if self.prep.free { len } else { self.min_pos(st, i, j) };
            for pos in (lo..=len).rev() {
                out.push((i, pos, (rr as u32, (len - pos) as u32)));
            }
        }
        out
    }

    /// Evaluates a node; returns false when it is a leaf, infeasible or
    /// pruned, true when its children must be explored.
    fn expand(&self, st: &mut State, depth: usize) -> bool {
        if self.tick() {
            return false;
        }
        match self.evaluate(st, depth) {
            Eval::Infeasible => false,
            Eval::Leaf { obj } => {
                self.offer(st, obj, None);
                false
            }
            Eval::Node { lb } => !self.prune(lb, &st.key),
        }
    }

    fn dfs(&self, st: &mut State, depth: usize) {
        if !self.expand(st, depth) {
            return;
        }
        let j = self.prep.order[depth];
        for (i, pos, d) in self.children(st, depth) {
            st.place(j, i, pos, d);
            self.dfs(st, depth + 1);
            st.unplace(j, i, pos);
            if self.stopped() {
                return;
            }
        }
    }

    /// Breadth-first expansion until there are enough subtrees to share out.
    fn frontier(&self, target: usize) -> (Vec<State>, usize) {
        let mut level = vec![State::new(self.prep.n, self.prep.m)];
        let mut depth = 0;
        while level.len() < target && depth < self.prep.m && !level.is_empty() {
            let mut next = Vec::new();
            let j = self.prep.order[depth];
            for mut st in level {
                if !self.expand(&mut st, depth) {
                    continue;
                }
                for (i, pos, d) in self.children(&st, depth) {
                    let mut child = st.clone();
                    child.place(j, i, pos, d);
                    next.push(child);
                }
            }
            level = next;
            depth += 1;
        }
        (level, depth)
    }

    /// Replays a complete schedule as a decision path and offers it.
    fn offer_seed(&self, entries: &[ScheduleEntry], origin: &'static str) {
        let pr = &self.prep;
        let mut at = vec![None; pr.m];
        for e in entries {
            if let (Some(j), Some(i)) = (pr.inst.task_index(&e.task_id), pr.inst.robot_index(&e.robot_id)) {
                at[j] = Some((i, e.start));
            }
        }
        let mut st = State::new(pr.n, pr.m);
        let mut seed_start = vec![0.0; pr.m];
        for &j in &pr.order {
            let Some((i, s)) = at[j] else { return };
            let Some(rr) = pr.candidates[j].iter().position(|&c| c == i) else { return };
            seed_start[j] = s;
            let seq = &st.seqs[i];
            let pos = seq.iter().filter(|&&k| (seed_start[k], k) < (s, j)).count();
            let len = seq.len();
            st.place(j, i, pos, (rr as u32, (len - pos) as u32));
        }
        if let Eval::Leaf { obj } = self.evaluate(&mut st, pr.m) {
            self.offer(&st, obj, Some(origin));
        }
    }
}

/// Exact solve with no external seed beyond the config's warm start.
pub fn solve_exact(instance: &ProblemInstance, config: &SolveConfig) -> Result<SolveResult, SolveError> {
    solve_seeded(instance, config, &[]).map(|(r, _)| r)
}

/// Exact solve with extra seed incumbents. Also returns the origin label of
/// the final incumbent when it came from a seed rather than the search.
pub(crate) fn solve_seeded(
    instance: &ProblemInstance,
    config: &SolveConfig,
    seeds: &[(&[ScheduleEntry], &'static str)],
) -> Result<(SolveResult, Option<&'static str>), SolveError> {
    config.validate()?;
    let began = Instant::now();
    let prep = Prep::new(instance, config.warm_start.as_ref())?;
    let (n, m) = (prep.n, prep.m);
    let deadline = began + Duration::try_from_secs_f64(config.time_limit).unwrap_or(Duration::MAX / 4);
    let mut search = Search {
        prep,
        gap_rel: config.gap_rel,
        node_limit: config.node_limit,
        began,
        deadline,
        nodes: AtomicU64::new(0),
        stop: AtomicBool::new(false),
        inc_bits: AtomicU64::new(f64::INFINITY.to_bits()),
        relaxed_bits: AtomicU64::new(f64::INFINITY.to_bits()),
        root_lb: 0.0,
        inc: Mutex::new(Incumbent {
            obj: f64::INFINITY,
            key: Vec::new(),
            robot_of: Vec::new(),
            start: Vec::new(),
            origin: None,
            trace: Vec::new(),
        }),
    };
    let mut root = State::new(n, m);
    let root_eval = search.evaluate(&mut root, 0);
    let root_feasible = !matches!(root_eval, Eval::Infeasible);
    search.root_lb = match root_eval {
        Eval::Node { lb } => lb,
        Eval::Leaf { obj } => obj,
        Eval::Infeasible => f64::INFINITY,
    };

    if root_feasible {
        if let Some(seed) = config.warm_start.as_ref().and_then(|w| w.seed.as_deref()) {
            search.offer_seed(seed, "warm_start");
        }
        for (entries, origin) in seeds {
            search.offer_seed(entries, origin);
        }
        if Instant::now() >= search.deadline {
            search.stop.store(true, Ordering::Relaxed);
        }
        let workers = config.workers.max(1);
        if workers == 1 {
            search.dfs(&mut root, 0);
        } else {
            let (level, depth) = search.frontier(workers * 8);
            run_parallel(workers, || {
                level.into_par_iter().for_each(|mut st| {
                    if !search.stopped() {
                        search.dfs(&mut st, depth);
                    }
                })
            });
        }
    }

    let stopped = search.stopped();
    let nodes = search.nodes.load(Ordering::Relaxed);
    let relaxed = f64::from_bits(search.relaxed_bits.load(Ordering::Acquire));
    let root_lb = search.root_lb;
    let prep = &search.prep;
    let inc = search.inc.into_inner().expect("incumbent lock");
    let has_inc = inc.obj.is_finite();

    let schedule = has_inc.then(|| {
        let entries = (0..m)
            .map(|j| {
                let i = inc.robot_of[j];
                let s = inc.start[j];
                let mut e = ScheduleEntry::new(&instance.task(j).id, &instance.robot(i).id, s, s + prep.p[i][j]);
                if let Some(meta) = &prep.frozen_meta[j] {
                    e.metadata = meta.clone();
                }
                e
            })
            .collect();
        Schedule::new(entries, instance)
    });
    let (status, lower_bound) = match (stopped, has_inc) {
        (true, true) => (SolveStatus::TimeLimitIncumbent, root_lb.min(inc.obj)),
        (true, false) => (SolveStatus::TimeLimitNoIncumbent, root_lb),
        (false, false) => (SolveStatus::Infeasible, root_lb),
        (false, true) if relaxed < inc.obj - obj_tol(inc.obj) => (SolveStatus::GapStop, relaxed),
        (false, true) => (SolveStatus::Optimal, inc.obj),
    };
    let objective = schedule.as_ref().map_or(f64::INFINITY, |s| s.objective);
    let lower_bound = if has_inc { lower_bound.min(objective) } else { lower_bound };
    let gap = if has_inc { relative_gap(objective, lower_bound) } else { 1.0 };
    let result = SolveResult {
        schedule,
        objective,
        lower_bound,
        gap: if status == SolveStatus::Optimal { 0.0 } else { gap },
        status,
        nodes_explored: nodes,
        wall_time: began.elapsed().as_secs_f64(),
        bound_trace: inc.trace,
    };
    Ok((result, inc.origin))
}

#[cfg(feature = "parallel")]
fn run_parallel(workers: usize, f: impl FnOnce() + Send) {
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_parallel(_workers: usize, f: impl FnOnce() + Send) {
    f()
}
