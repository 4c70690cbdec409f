//! The `robosched` command line: plan, check, gantt, simulate, bench, LP
//! export and instance generation.

pub mod gantt;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use robosched::bench::{generate_instance, run_grid, with_provider_fitness, BenchReport, Category, FamilySpec, GridSpec};
use robosched::frontend::{EndpointConfig, FitnessProvider, HttpProvider, MockProvider};
use robosched::milp::{build_model_with_big_m, check_lp_text, export_lp, SolveConfig, SolveError, SolveResult};
use robosched::model::{check_schedule, normalize_fitness, InstanceDoc, ProblemInstance, Schedule, ScheduleFile};
use robosched::sim::{load_scenario, run_episode, to_jsonl, ScenarioError};
use robosched::{Allocator, AuctionAllocator, ExactAllocator, GreedyAllocator, PlanError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_VIOLATIONS: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot access `{path}`: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse `{path}`: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{0} violation(s) found")]
    Violations(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Parse { .. } => EXIT_USAGE,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Violations(_) => EXIT_VIOLATIONS,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Infeasible(_) => "infeasible",
            CliError::Violations(_) => "verification",
        }
    }

    /// The single-line diagnostic written to stderr.
    pub fn to_json_line(&self) -> String {
        json!({ "error": self.kind(), "exit": self.exit_code(), "message": self.to_string() }).to_string()
    }
}

#[derive(Debug, Parser)]
#[command(name = "robosched", version, about = "Multi-robot task scheduler")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Allocator for planning and replanning.
    #[arg(long, global = true, value_enum, default_value_t = AllocatorKind::Milp)]
    pub allocator: AllocatorKind,
    /// Wall-clock cap for the exact solver, in seconds.
    #[arg(long, global = true, default_value_t = 120.0)]
    pub time_limit: f64,
    /// Relative gap at which the exact solver stops.
    #[arg(long, global = true, default_value_t = 0.01)]
    pub gap_rel: f64,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output format; the accepted values depend on the subcommand.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Output file. Defaults to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print solver telemetry to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AllocatorKind {
    Milp,
    Auction,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitnessSource {
    /// Keep the instance's own fitness.
    Instance,
    /// Capability-rule scores.
    Mock,
    /// A chat-completion endpoint; the token is read from the environment.
    Http,
}

#[derive(Debug, Args)]
pub struct FitnessArgs {
    /// Where fitness scores come from.
    #[arg(long, value_enum, default_value_t = FitnessSource::Instance)]
    pub fitness: FitnessSource,
    #[arg(long)]
    pub llm_url: Option<String>,
    #[arg(long)]
    pub llm_model: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan an instance and write the schedule.
    Plan {
        instance: PathBuf,
        #[command(flatten)]
        fitness: FitnessArgs,
    },
    /// Verify a schedule against an instance.
    Check { instance: PathBuf, schedule: PathBuf },
    /// Render a schedule as an ASCII or SVG Gantt chart.
    Gantt {
        schedule: PathBuf,
        /// Instance whose robots all get a lane, busy or not.
        #[arg(long)]
        instance: Option<PathBuf>,
        /// ASCII chart width in columns.
        #[arg(long, default_value_t = 72)]
        width: usize,
    },
    /// Execute a scenario in closed loop.
    Simulate {
        scenario: PathBuf,
        /// Write the event trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Re-score impacted tasks on replanning with this source.
        #[arg(long, value_enum, default_value_t = FitnessSource::Instance)]
        rescore: FitnessSource,
        #[arg(long)]
        llm_url: Option<String>,
        #[arg(long)]
        llm_model: Option<String>,
    },
    /// Run the ablation grid, or re-render a stored CSV.
    Bench {
        /// Grid definition file. Without it the standard grid is used.
        grid: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        robots: usize,
        #[arg(long, default_value_t = 8)]
        tasks: usize,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Render a CSV written by an earlier run instead of running.
        #[arg(long)]
        from_csv: Option<PathBuf>,
        /// Also write the CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Keep wall-clock times in the CSV.
        #[arg(long)]
        timing: bool,
    },
    /// Write the MILP model in LP format.
    ExportLp {
        instance: PathBuf,
        /// Override the big-M constant.
        #[arg(long)]
        big_m: Option<f64>,
    },
    /// Check LP text with the bundled grammar checker.
    CheckLp { file: PathBuf },
    /// Write a synthetic instance from one of the benchmark families.
    Generate {
        #[arg(long, value_enum)]
        category: CategoryArg,
        #[arg(long, default_value_t = 2)]
        robots: usize,
        #[arg(long, default_value_t = 8)]
        tasks: usize,
        /// Attach the mock provider's fitness scores.
        #[arg(long)]
        with_fitness: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CategoryArg {
    ConstraintFree,
    Temporal,
    Heterogeneous,
}

impl From<CategoryArg> for Category {
    fn from(c: CategoryArg) -> Self {
        match c {
            CategoryArg::ConstraintFree => Category::ConstraintFree,
            CategoryArg::Temporal => Category::Temporal,
            CategoryArg::Heterogeneous => Category::Heterogeneous,
        }
    }
}

/// Parses `args`, runs the command and returns the exit code. Errors go to
/// `err` as one JSON line.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let _ = writeln!(err, "{}", CliError::Usage(first.to_string()).to_json_line());
            return EXIT_USAGE;
        }
    };
    match execute(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "{}", e.to_json_line());
            e.exit_code()
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn io(e: std::io::Error) -> CliError {
    CliError::Io { path: PathBuf::from("<stdout>"), source: e }
}

fn emit(cli: &Cli, out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    match &cli.out {
        Some(p) => write_file(p, text),
        None => out.write_all(text.as_bytes()).map_err(io),
    }
}

fn format<'a>(cli: &'a Cli, allowed: &[&'a str]) -> Result<&'a str, CliError> {
    match cli.format.as_deref() {
        None => Ok(allowed[0]),
        Some(f) if allowed.contains(&f) => Ok(f),
        Some(f) => Err(CliError::Usage(format!("unknown format `{f}`; expected one of {}", allowed.join(", ")))),
    }
}

pub fn load_instance(path: &Path) -> Result<ProblemInstance, CliError> {
    let doc = InstanceDoc::from_json(&read(path)?)
        .map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    doc.validate().map_err(|e| CliError::Infeasible(e.to_string()))
}

fn load_schedule(path: &Path, instance: Option<&ProblemInstance>) -> Result<Schedule, CliError> {
    let file = ScheduleFile::from_json(&read(path)?)
        .map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    Ok(match (file, instance) {
        (f, Some(inst)) => f.into_schedule(inst),
        (ScheduleFile::Entries(e), None) => Schedule::from_entries_unchecked(e),
        (ScheduleFile::Full(s), None) => s,
    })
}

fn solve_config(cli: &Cli) -> Result<SolveConfig, CliError> {
    let mut cfg = SolveConfig::default().with_time_limit(cli.time_limit).with_gap(cli.gap_rel);
    if let Some(s) = cli.seed {
        cfg.rng_seed = s;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn allocator(cli: &Cli) -> Result<Box<dyn Allocator>, CliError> {
    Ok(match cli.allocator {
        AllocatorKind::Milp => Box::new(ExactAllocator::new(solve_config(cli)?)),
        AllocatorKind::Auction => Box::new(AuctionAllocator::default()),
        AllocatorKind::Greedy => Box::new(GreedyAllocator),
    })
}

fn provider(source: FitnessSource, url: &Option<String>, model: &Option<String>) -> Option<Box<dyn FitnessProvider>> {
    match source {
        FitnessSource::Instance => None,
        FitnessSource::Mock => Some(Box::new(MockProvider::default())),
        FitnessSource::Http => {
            let mut endpoint = EndpointConfig::default();
            if let Some(u) = url {
                endpoint.base_url = u.clone();
            }
            if let Some(m) = model {
                endpoint.model = m.clone();
            }
            Some(Box::new(HttpProvider::new(endpoint)))
        }
    }
}

fn plan_error(e: PlanError) -> CliError {
    match e {
        PlanError::Infeasible(_) | PlanError::Stalled { .. } => CliError::Infeasible(e.to_string()),
        PlanError::Solve(SolveError::FrozenInfeasible { .. }) => CliError::Infeasible(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

fn telemetry(cli: &Cli, err: &mut dyn Write, result: &SolveResult) {
    if cli.verbose == 0 {
        return;
    }
    let _ = writeln!(
        err,
        "{}",
        json!({
            "telemetry": "solve",
            "nodes": result.nodes_explored,
            "wall_time": result.wall_time,
            "lower_bound": result.lower_bound,
            "gap": result.gap,
            "bound_trace": result.bound_trace,
        })
    );
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::Plan { instance, fitness } => cmd_plan(cli, instance, fitness, out, err),
        Command::Check { instance, schedule } => cmd_check(cli, instance, schedule, out),
        Command::Gantt { schedule, instance, width } => cmd_gantt(cli, schedule, instance.as_deref(), *width, out),
        Command::Simulate { scenario, trace, rescore, llm_url, llm_model } => {
            let provider = provider(*rescore, llm_url, llm_model);
            cmd_simulate(cli, scenario, trace.as_deref(), provider.as_deref(), out, err)
        }
        Command::Bench { grid, robots, tasks, repetitions, from_csv, csv, timing } => {
            cmd_bench(cli, grid.as_deref(), (*robots, *tasks, *repetitions), from_csv.as_deref(), csv.as_deref(), *timing, out)
        }
        Command::ExportLp { instance, big_m } => {
            let inst = load_instance(instance)?;
            let m = big_m.unwrap_or(inst.big_m());
            if !(m >= inst.big_m()) {
                return Err(CliError::Usage(format!("big-M {m} is below the sum of durations {}", inst.big_m())));
            }
            emit(cli, out, &export_lp(&build_model_with_big_m(&inst, m)))?;
            Ok(EXIT_OK)
        }
        Command::Generate { category, robots, tasks, with_fitness } => {
            let spec = FamilySpec::new((*category).into(), *robots, *tasks);
            let mut inst = generate_instance(&spec, cli.seed.unwrap_or(0)).map_err(|e| CliError::Usage(e.to_string()))?;
            if *with_fitness {
                inst = with_provider_fitness(&inst);
            }
            emit(cli, out, &(serde_json::to_string_pretty(&inst.to_doc()).expect("instance serializes") + "\n"))?;
            Ok(EXIT_OK)
        }
        Command::CheckLp { file } => {
            let summary = check_lp_text(&read(file)?)
                .map_err(|e| CliError::Parse { path: file.clone(), message: e.to_string() })?;
            let text = format!(
                "variables: {}\nbinaries: {}\nconstraints: {}\n",
                summary.variables().len(),
                summary.binaries.len(),
                summary.rows.len()
            );
            emit(cli, out, &text)?;
            Ok(EXIT_OK)
        }
    }
}

fn cmd_plan(
    cli: &Cli,
    path: &Path,
    fitness: &FitnessArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let fmt = format(cli, &["text", "json"])?;
    let mut inst = load_instance(path)?;
    let mut degraded = None;
    if let Some(p) = provider(fitness.fitness, &fitness.llm_url, &fitness.llm_model) {
        let scores = p.fitness(inst.robots(), inst.tasks()).map_err(|e| CliError::Usage(e.to_string()))?;
        degraded = scores.degraded;
        let norm = normalize_fitness(&scores.value).map_err(|e| CliError::Usage(e.to_string()))?;
        inst = inst.with_fitness(norm).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let result = allocator(cli)?.allocate(&inst, None).map_err(plan_error)?;
    telemetry(cli, err, &result);
    let schedule = result
        .schedule
        .as_ref()
        .ok_or_else(|| CliError::Infeasible(format!("no schedule ({})", result.status)))?;
    if let Some(p) = &cli.out {
        write_file(p, &(serde_json::to_string_pretty(schedule).expect("schedule serializes") + "\n"))?;
    }
    let summary = json!({
        "status": result.status,
        "makespan": schedule.makespan,
        "objective": result.objective,
        "lower_bound": result.lower_bound,
        "gap": result.gap,
        "tasks": schedule.entries.len(),
        "degraded": degraded,
    });
    let text = if fmt == "json" {
        summary.to_string() + "\n"
    } else {
        let mut t = format!(
            "status: {}\nmakespan: {}\nobjective: {}\ngap: {}\n",
            result.status, schedule.makespan, result.objective, result.gap
        );
        if let Some(d) = &degraded {
            t.push_str(&format!("degraded: {d}\n"));
        }
        t
    };
    out.write_all(text.as_bytes()).map_err(io)?;
    Ok(EXIT_OK)
}

fn cmd_check(cli: &Cli, instance: &Path, schedule: &Path, out: &mut dyn Write) -> Result<i32, CliError> {
    let fmt = format(cli, &["text", "json"])?;
    let inst = load_instance(instance)?;
    let sched = load_schedule(schedule, Some(&inst))?;
    let violations = check_schedule(&sched, &inst);
    let text = if fmt == "json" {
        serde_json::to_string(&violations).expect("violations serialize") + "\n"
    } else if violations.is_empty() {
        "ok: no violations\n".to_string()
    } else {
        violations.iter().map(|v| format!("{v}\n")).collect()
    };
    emit(cli, out, &text)?;
    if violations.is_empty() {
        Ok(EXIT_OK)
    } else {
        Err(CliError::Violations(violations.len()))
    }
}

fn cmd_gantt(cli: &Cli, schedule: &Path, instance: Option<&Path>, width: usize, out: &mut dyn Write) -> Result<i32, CliError> {
    let fmt = format(cli, &["ascii", "svg"])?;
    let inst = instance.map(load_instance).transpose()?;
    let sched = load_schedule(schedule, inst.as_ref())?;
    let robots: Vec<String> = inst.iter().flat_map(|i| i.robots().iter().map(|r| r.id.clone())).collect();
    let text = match fmt {
        "svg" => gantt::render_svg(&sched, &robots),
        _ => gantt::render_ascii(&sched, &robots, width),
    };
    emit(cli, out, &text)?;
    Ok(EXIT_OK)
}

fn scenario_error(path: &Path, e: ScenarioError) -> CliError {
    match e {
        ScenarioError::Io { path, source } => CliError::Io { path, source },
        ScenarioError::Parse { path, message } => CliError::Parse { path, message },
        ScenarioError::Model(m) => CliError::Infeasible(format!("{}: {m}", path.display())),
    }
}

fn cmd_simulate(
    cli: &Cli,
    scenario: &Path,
    trace: Option<&Path>,
    provider: Option<&dyn FitnessProvider>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    format(cli, &["json"])?;
    let (inst, mut cfg) = load_scenario(scenario).map_err(|e| scenario_error(scenario, e))?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let alloc = allocator(cli)?;
    let initial = alloc.allocate(&inst, None).map_err(plan_error)?;
    telemetry(cli, err, &initial);
    let schedule = initial
        .schedule
        .ok_or_else(|| CliError::Infeasible(format!("no initial schedule ({})", initial.status)))?;
    let outcome = run_episode(&inst, &schedule, &cfg, alloc.as_ref(), provider)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(p) = trace {
        write_file(p, &to_jsonl(&outcome.trace))?;
    }
    let text = serde_json::to_string_pretty(&outcome.metrics).expect("metrics serialize") + "\n";
    emit(cli, out, &text)?;
    Ok(EXIT_OK)
}

fn cmd_bench(
    cli: &Cli,
    grid: Option<&Path>,
    (robots, tasks, repetitions): (usize, usize, Option<usize>),
    from_csv: Option<&Path>,
    csv: Option<&Path>,
    timing: bool,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let fmt = format(cli, &["markdown", "csv"])?;
    let report = if let Some(path) = from_csv {
        BenchReport::from_csv(&read(path)?).map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })?
    } else {
        let mut spec = match grid {
            Some(p) => serde_json::from_str::<GridSpec>(&read(p)?)
                .map_err(|e| CliError::Parse { path: p.to_path_buf(), message: e.to_string() })?,
            None => GridSpec::standard(robots, tasks, 30),
        };
        spec.time_limit = cli.time_limit;
        if let Some(r) = repetitions {
            spec.repetitions = r;
        }
        if let Some(s) = cli.seed {
            spec.base_seed = s;
        }
        run_grid(&spec).map_err(|e| CliError::Usage(e.to_string()))?
    };
    if let Some(p) = csv {
        write_file(p, &report.to_csv(timing))?;
    }
    let text = match fmt {
        "csv" => report.to_csv(timing),
        _ => report.to_markdown(),
    };
    emit(cli, out, &text)?;
    Ok(EXIT_OK)
}
