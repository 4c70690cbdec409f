use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::Serialize;

use crate::allocator::Allocator;
use crate::frontend::FitnessProvider;
use crate::milp::{warm_start, SolveStatus};
use crate::model::{
    check_schedule, normalize_fitness, validate_instance, FitnessMatrix, ProblemInstance, RobotProfile, Schedule,
    ScheduleEntry, Task, TimeWindow, ValidateOptions, FROZEN_KEY, TIME_TOL,
};

use super::config::SimConfig;
use super::trace::{idle_time, TraceEvent, TraceRecord};
use super::world::{detect_triggers, RobotState, TaskState, TriggerEvent, TriggerKind, WorldModel};
use super::SimError;

/// Capability given to working robots and required by unstarted tasks once
/// some robot has failed, so that failed robots keep their finished work but
/// receive nothing new.
pub const OPERATIONAL_TAG: &str = "@operational";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeFailure {
    /// No valid plan exists for the remaining work.
    ReplanInfeasible(String),
    /// A task used up its attempts.
    TaskFailed(String),
    /// Work remains but nothing can move.
    Stalled,
    /// The simulation-time cap was reached.
    TimeCap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub realized_makespan: f64,
    pub total_idle_time: f64,
    pub replan_count: usize,
    /// Every task that was not invalidated completed.
    pub success: bool,
    pub triggers: BTreeMap<TriggerKind, usize>,
    pub completed: usize,
    pub invalidated: usize,
    pub failed: usize,
    pub failure: Option<EpisodeFailure>,
}

/// A schedule the executor switched to, with the instance it was built for.
#[derive(Debug, Clone)]
pub struct AdoptedPlan {
    pub version: u64,
    pub time: f64,
    pub instance: ProblemInstance,
    pub schedule: Schedule,
    pub status: SolveStatus,
    pub triggers: Vec<TriggerKind>,
    pub rescored: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub metrics: EpisodeMetrics,
    pub trace: Vec<TraceRecord>,
    pub plans: Vec<AdoptedPlan>,
    pub task_states: BTreeMap<String, TaskState>,
}

impl EpisodeOutcome {
    /// Realized `(robot, start, end)` of every completed task.
    pub fn realized(&self) -> BTreeMap<String, (String, f64, f64)> {
        self.trace
            .iter()
            .filter_map(|r| match &r.event {
                TraceEvent::Finish { task, robot, start, ok: true } => Some((task.clone(), (robot.clone(), *start, r.t))),
                _ => None,
            })
            .collect()
    }
}

/// Heap classes at equal times: outcomes, delay checks, scripted events,
/// dispatch wake-ups.
const FINISH: u8 = 0;
const DELAY: u8 = 1;
const SCRIPT: u8 = 2;
const DISPATCH: u8 = 3;

#[derive(Debug, Clone)]
struct Event {
    time: f64,
    class: u8,
    key: String,
    seq: u64,
    token: Option<u64>,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.class.cmp(&other.class))
            .then_with(|| self.key.cmp(&other.key))
            .then(self.seq.cmp(&other.seq))
    }
}

struct Episode<'a> {
    cfg: &'a SimConfig,
    allocator: &'a dyn Allocator,
    fitness: Option<&'a dyn FitnessProvider>,
    inst: ProblemInstance,
    plan: Schedule,
    version: u64,
    world: WorldModel,
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
    rng: ChaCha8Rng,
    noise: Option<LogNormal<f64>>,
    plans: Vec<AdoptedPlan>,
    /// Task definitions as given, before any replanning edits.
    defs: BTreeMap<String, Task>,
    /// Robot profiles as given.
    team: Vec<RobotProfile>,
    /// Travel rows of discovered tasks.
    extra_travel: BTreeMap<String, Vec<f64>>,
    attempts: BTreeMap<String, u32>,
    realized: BTreeMap<String, (String, f64, f64)>,
    failure: Option<EpisodeFailure>,
}

/// Executes `initial` on a simulated team and replans on triggers.
///
/// Robots follow their planned order and start each task at its planned time
/// or as soon as the robot is free and all predecessors have completed,
/// whichever is later. Realized durations are the planned ones scaled by
/// noise and scripted slowdowns. A replan freezes completed and running
/// work, drops invalidated and abandoned tasks, adds discoveries, re-scores
/// fitness of the impacted tasks through `fitness` when given, and re-runs
/// `allocator`. Running tasks are never preempted by a replan.
pub fn run_episode(
    instance: &ProblemInstance,
    initial: &Schedule,
    config: &SimConfig,
    allocator: &dyn Allocator,
    fitness: Option<&dyn FitnessProvider>,
) -> Result<EpisodeOutcome, SimError> {
    config.validate(instance)?;
    let violations = check_schedule(initial, instance);
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(SimError::InitialSchedule(text.join("; ")));
    }
    let noise = (config.duration_noise > 0.0)
        .then(|| LogNormal::new(0.0, config.duration_noise).map_err(|e| SimError::InvalidConfig(e.to_string())))
        .transpose()?;
    let mut ep = Episode {
        cfg: config,
        allocator,
        fitness,
        inst: instance.clone(),
        plan: initial.clone(),
        version: 0,
        world: WorldModel::new(instance, config),
        heap: BinaryHeap::new(),
        seq: 0,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        noise,
        plans: Vec::new(),
        defs: instance.tasks().iter().map(|t| (t.id.clone(), t.clone())).collect(),
        team: instance.robots().to_vec(),
        extra_travel: BTreeMap::new(),
        attempts: BTreeMap::new(),
        realized: BTreeMap::new(),
        failure: None,
    };
    for ev in &config.events {
        ep.push(ev.time, SCRIPT, String::new(), None);
    }
    ep.adopt(initial.clone(), SolveStatus::Heuristic, Vec::new(), Vec::new());
    Ok(ep.run())
}

impl Episode<'_> {
    fn push(&mut self, time: f64, class: u8, key: String, token: Option<u64>) {
        self.seq += 1;
        self.heap.push(Reverse(Event { time, class, key, seq: self.seq, token }));
    }

    fn run(mut self) -> EpisodeOutcome {
        self.dispatch();
        loop {
            if self.world.all_terminal() {
                break;
            }
            let Some(Reverse(first)) = self.heap.peek() else {
                self.failure.get_or_insert(EpisodeFailure::Stalled);
                break;
            };
            let now = first.time;
            if self.cfg.max_time.is_some_and(|cap| now > cap) {
                self.failure = Some(EpisodeFailure::TimeCap);
                break;
            }
            self.world.advance(now);
            while let Some(Reverse(ev)) = self.heap.peek().filter(|Reverse(e)| e.time == now).cloned() {
                self.heap.pop();
                if let (FINISH, Some(token)) = (ev.class, ev.token) {
                    self.finish(&ev.key, token);
                }
            }
            let triggers = detect_triggers(&mut self.world, self.cfg);
            self.cascade_failures();
            let needs_replan = triggers
                .iter()
                .any(|t| t.kind != TriggerKind::Completion || self.cfg.replan_on_completion);
            if needs_replan && !self.world.all_terminal() {
                if let Err(cause) = self.replan(&triggers) {
                    self.world.record(TraceEvent::ReplanFailed { cause: cause.clone() });
                    self.failure = Some(EpisodeFailure::ReplanInfeasible(cause));
                    break;
                }
            }
            self.dispatch();
        }
        self.finish_episode()
    }

    fn finish_episode(mut self) -> EpisodeOutcome {
        let count = |w: &WorldModel, s: TaskState| w.task_states.values().filter(|&&x| x == s).count();
        let completed = count(&self.world, TaskState::Completed);
        let invalidated = count(&self.world, TaskState::Invalidated);
        let failed = count(&self.world, TaskState::Failed);
        if self.failure.is_none() && failed > 0 {
            let first = self.world.task_states.iter().find(|(_, s)| **s == TaskState::Failed).map(|(k, _)| k.clone());
            self.failure = first.map(EpisodeFailure::TaskFailed);
        }
        let success = self.failure.is_none() && completed + invalidated == self.world.task_states.len();
        self.world.record(TraceEvent::End { success });

        let trace = std::mem::take(&mut self.world.log);
        let mut triggers = BTreeMap::new();
        let mut realized_makespan: f64 = 0.0;
        let mut replan_count = 0;
        for r in &trace {
            match &r.event {
                TraceEvent::Trigger { trigger, .. } => *triggers.entry(*trigger).or_insert(0) += 1,
                TraceEvent::Finish { ok: true, .. } => realized_makespan = realized_makespan.max(r.t),
                TraceEvent::Plan { version, .. } if *version > 0 => replan_count += 1,
                _ => {}
            }
        }
        let metrics = EpisodeMetrics {
            realized_makespan,
            total_idle_time: idle_time(&trace).values().sum(),
            replan_count,
            success,
            triggers,
            completed,
            invalidated,
            failed,
            failure: self.failure,
        };
        EpisodeOutcome { metrics, trace, plans: self.plans, task_states: self.world.task_states }
    }

    fn finish(&mut self, task: &str, token: u64) {
        if self.world.running.get(task).is_none_or(|r| r.token != token) {
            return;
        }
        let run = self.world.running.remove(task).expect("run present");
        self.world.robot_states.insert(run.robot.clone(), RobotState::Idle);
        let now = self.world.clock;
        self.world.record(TraceEvent::Finish {
            task: task.to_string(),
            robot: run.robot.clone(),
            start: run.start,
            ok: run.ok,
        });
        let kind = if run.ok {
            self.world.task_states.insert(task.to_string(), TaskState::Completed);
            self.realized.insert(task.to_string(), (run.robot, run.start, now));
            TriggerKind::Completion
        } else {
            let tries = self.attempts.entry(task.to_string()).or_insert(0);
            *tries += 1;
            let state = if *tries < self.cfg.max_attempts { TaskState::Pending } else { TaskState::Failed };
            self.world.task_states.insert(task.to_string(), state);
            if state == TaskState::Failed {
                self.world.record(TraceEvent::TaskFailed { task: task.to_string() });
            }
            TriggerKind::PerceptionContradiction
        };
        self.world.inbox.push(TriggerEvent { kind, subjects: vec![task.to_string()], time: now });
    }

    /// Marks every unfinished task that depends on a failed one as failed.
    fn cascade_failures(&mut self) {
        loop {
            let doomed: Vec<String> = self
                .defs
                .values()
                .filter(|t| self.world.state(&t.id).is_some_and(|s| !s.is_terminal()))
                .filter(|t| t.dependencies.iter().any(|d| self.world.state(d) == Some(TaskState::Failed)))
                .map(|t| t.id.clone())
                .collect();
            if doomed.is_empty() {
                return;
            }
            for id in doomed {
                self.world.task_states.insert(id.clone(), TaskState::Failed);
                self.world.record(TraceEvent::TaskFailed { task: id });
            }
        }
    }

    /// Starts every robot's next planned task that is due and ready, and
    /// schedules wake-ups for the ones planned later.
    fn dispatch(&mut self) {
        let now = self.world.clock;
        let robots: Vec<String> = self.inst.robots().iter().map(|r| r.id.clone()).collect();
        for robot in robots {
            if self.world.robot_states.get(&robot) != Some(&RobotState::Idle) {
                continue;
            }
            let next = self
                .plan
                .robot_entries(&robot)
                .find(|e| self.world.state(&e.task_id) == Some(TaskState::Pending))
                .cloned();
            let Some(entry) = next else { continue };
            let j = self.inst.task_index(&entry.task_id).expect("planned task is in the instance");
            if !self.inst.preds(j).iter().all(|&k| self.world.state(&self.inst.task(k).id) == Some(TaskState::Completed)) {
                continue;
            }
            if entry.start > now {
                self.push(entry.start, DISPATCH, robot, None);
                continue;
            }
            self.begin(&entry);
        }
    }

    fn begin(&mut self, entry: &ScheduleEntry) {
        let planned = entry.duration();
        let mut factor = self.cfg.slowdowns.get(&entry.task_id).copied().unwrap_or(1.0);
        if let Some(noise) = &self.noise {
            factor *= noise.sample(&mut self.rng);
        }
        let ok = self.cfg.failure_prob <= 0.0 || !self.rng.random_bool(self.cfg.failure_prob);
        let token = self.world.begin(&entry.task_id, &entry.robot_id, planned, ok);
        self.world.record(TraceEvent::Start {
            task: entry.task_id.clone(),
            robot: entry.robot_id.clone(),
            planned_start: entry.start,
            planned_end: entry.end,
        });
        let now = self.world.clock;
        self.push(now + planned * factor, FINISH, entry.task_id.clone(), Some(token));
        let limit = self.world.running[&entry.task_id].delay_limit(self.cfg.delay_threshold);
        self.push(limit.next_up(), DELAY, entry.task_id.clone(), None);
    }

    fn adopt(&mut self, schedule: Schedule, status: SolveStatus, triggers: Vec<TriggerKind>, rescored: Vec<String>) {
        self.world.record(TraceEvent::Plan {
            version: self.version,
            status,
            rescored: rescored.clone(),
            entries: schedule.entries.clone(),
        });
        self.plans.push(AdoptedPlan {
            version: self.version,
            time: self.world.clock,
            instance: self.inst.clone(),
            schedule: schedule.clone(),
            status,
            triggers,
            rescored,
        });
        self.plan = schedule;
    }

    /// Builds the instance for the remaining work, warm-starts the allocator
    /// with everything already done or underway, and adopts the result.
    fn replan(&mut self, triggers: &[TriggerEvent]) -> Result<(), String> {
        if self.plans.len() > self.cfg.max_replans {
            return Err(format!("more than {} replans", self.cfg.max_replans));
        }
        let now = self.world.clock;
        for (task, travel) in std::mem::take(&mut self.world.discovered) {
            if let Some(row) = travel {
                self.extra_travel.insert(task.id.clone(), row);
            }
            self.defs.insert(task.id.clone(), task);
        }
        self.cascade_failures();

        let mut order: Vec<String> = self.inst.tasks().iter().map(|t| t.id.clone()).collect();
        let known: BTreeSet<String> = order.iter().cloned().collect();
        let fresh: Vec<String> = self
            .world
            .detections
            .iter()
            .map(|d| d.task_id.clone())
            .filter(|id| !known.contains(id))
            .collect();
        order.extend(fresh.iter().cloned());
        let keep: Vec<String> = order
            .into_iter()
            .filter(|id| !matches!(self.world.state(id), Some(TaskState::Invalidated | TaskState::Failed)))
            .collect();
        let kept: BTreeSet<&str> = keep.iter().map(String::as_str).collect();

        let failed_robots: BTreeSet<&str> = self
            .world
            .robot_states
            .iter()
            .filter(|(_, s)| **s == RobotState::Failed)
            .map(|(r, _)| r.as_str())
            .collect();
        for id in &keep {
            if self.world.state(id) == Some(TaskState::Pending) {
                let def = &self.defs[id];
                if !self.team.iter().any(|r| !failed_robots.contains(r.id.as_str()) && r.can_perform(def)) {
                    return Err(format!("no operational robot can perform task `{id}`"));
                }
            }
        }

        // Travel, then frozen intervals, then task definitions.
        let params = self.inst.cost_params().clone();
        let n = self.team.len();
        let travel_col = |id: &str| -> Vec<f64> {
            match (&params.travel, self.inst.task_index(id)) {
                (Some(t), Some(j)) => (0..n).map(|i| t[i][j]).collect(),
                (Some(_), None) => self.extra_travel.get(id).cloned().unwrap_or_else(|| vec![0.0; n]),
                (None, _) => vec![0.0; n],
            }
        };
        let cols: Vec<Vec<f64>> = keep.iter().map(|id| travel_col(id)).collect();
        let mut new_params = params.clone();
        if params.travel.is_some() {
            new_params.travel = Some((0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect());
        }

        let mut frozen = Vec::new();
        let mut tasks = Vec::with_capacity(keep.len());
        for (col, id) in keep.iter().enumerate() {
            let mut t = self.defs[id].clone();
            t.dependencies.retain(|d| kept.contains(d.as_str()));
            let pinned = match self.world.state(id) {
                Some(TaskState::Completed) => Some(self.realized[id].clone()),
                Some(TaskState::Running) => {
                    let run = &self.world.running[id];
                    Some((run.robot.clone(), run.start, (run.start + run.planned).max(now)))
                }
                _ => None,
            };
            match pinned {
                Some((robot, start, end)) => {
                    let i = self.inst.robot_index(&robot).expect("known robot");
                    let augment = new_params.travel_time(i, col);
                    t.duration = end - start - augment;
                    t.constraints.time_window = None;
                    frozen.push(ScheduleEntry::new(id.clone(), robot, start, end).with_meta(FROZEN_KEY, true));
                }
                None => {
                    let w = t.time_window().unwrap_or(TimeWindow::release_only(0.0));
                    t.constraints.time_window = Some(TimeWindow::new(w.release.max(now), w.deadline));
                    if !failed_robots.is_empty() {
                        t.required_capabilities.insert(OPERATIONAL_TAG.to_string());
                    }
                }
            }
            tasks.push(t);
        }
        let mut robots = self.team.clone();
        if !failed_robots.is_empty() {
            for r in robots.iter_mut().filter(|r| !failed_robots.contains(r.id.as_str())) {
                r.capabilities.insert(OPERATIONAL_TAG.to_string());
            }
        }

        // Fitness: carried over, re-scored for impacted tasks.
        let mut fit: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                keep.iter()
                    .map(|id| self.inst.task_index(id).map_or(1.0, |j| self.inst.fitness().get(i, j)))
                    .collect()
            })
            .collect();
        let mut impacted: BTreeSet<String> = fresh.into_iter().collect();
        for t in triggers.iter().filter(|t| t.kind != TriggerKind::Completion) {
            impacted.extend(t.subjects.iter().filter(|s| kept.contains(s.as_str())).cloned());
        }
        for e in &self.plan.entries {
            if failed_robots.contains(e.robot_id.as_str()) && self.world.state(&e.task_id) == Some(TaskState::Pending) {
                impacted.insert(e.task_id.clone());
            }
        }
        impacted.retain(|id| self.world.state(id) == Some(TaskState::Pending));
        let mut rescored = Vec::new();
        if let (Some(provider), false) = (self.fitness, impacted.is_empty()) {
            let defs: Vec<Task> = keep.iter().filter(|id| impacted.contains(*id)).map(|id| self.defs[id].clone()).collect();
            if let Ok(scores) = provider.fitness(&self.team, &defs) {
                if let Ok(norm) = normalize_fitness(&scores.value) {
                    for (k, t) in defs.iter().enumerate() {
                        let col = keep.iter().position(|id| *id == t.id).expect("kept");
                        for (i, row) in fit.iter_mut().enumerate() {
                            row[col] = norm.get(i, k);
                        }
                        rescored.push(t.id.clone());
                    }
                }
            }
        }

        let inst = validate_instance(
            tasks,
            robots,
            Some(FitnessMatrix::from_rows(fit)),
            new_params,
            *self.inst.weights(),
            ValidateOptions::default(),
        )
        .map_err(|e| e.to_string())?;

        let mut partial = frozen.clone();
        partial.extend(
            self.plan
                .entries
                .iter()
                .filter(|e| self.world.state(&e.task_id) == Some(TaskState::Pending))
                .map(|e| {
                    let mut e = e.clone();
                    e.metadata.remove(FROZEN_KEY);
                    e
                }),
        );
        let warm = warm_start(&inst, &Schedule::from_entries_unchecked(partial)).map_err(|e| e.to_string())?;
        let result = self.allocator.allocate(&inst, Some(&warm)).map_err(|e| e.to_string())?;
        let schedule = result.schedule.ok_or_else(|| format!("allocator returned no plan ({})", result.status))?;
        let violations = check_schedule(&schedule, &inst);
        if let Some(v) = violations.first() {
            return Err(format!("allocator returned an invalid plan: {v}"));
        }
        for f in &frozen {
            let moved = schedule
                .entry(&f.task_id)
                .is_none_or(|e| e.robot_id != f.robot_id || (e.start - f.start).abs() > TIME_TOL);
            if moved {
                return Err(format!("allocator moved pinned task `{}`", f.task_id));
            }
        }
        self.inst = inst;
        self.version += 1;
        let kinds: Vec<TriggerKind> = triggers.iter().map(|t| t.kind).collect();
        self.adopt(schedule, result.status, kinds, rescored);
        Ok(())
    }
}
