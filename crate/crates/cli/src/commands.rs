//! Command-line entry points.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use predlearn::agent::{read_log, run_training, AgentError, Bundle, BundleError, LogEvent, Session};
use predlearn::dsl::PredicateSource;
use predlearn::eval::{bootstrap_experiment, evaluate, full_experiment, ExperimentConfig, RunReport};
use predlearn::oracle::{FeedbackOracle, VariantMode};
use predlearn::pddl::{parse_problem, plan, validate, Heuristic};
use predlearn::tasks::{generate_suite, training_tasks, SuiteFamily};
use predlearn::teacher::{build_teacher, Backend, Naming, TeacherError};
use predlearn::world::{DomainId, GroundedAction};
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::server::{self, AppState};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("bundle: {0}")]
    Bundle(#[from] BundleError),
    #[error("{0}")]
    BelowThreshold(String),
    #[error("teacher: {0}")]
    Teacher(TeacherError),
    #[error(transparent)]
    Agent(AgentError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl From<AgentError> for CliError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Teacher(t) => CliError::Teacher(t),
            AgentError::Bundle(b) => CliError::Bundle(b),
            other => CliError::Agent(other),
        }
    }
}

impl From<TeacherError> for CliError {
    fn from(e: TeacherError) -> Self {
        CliError::Teacher(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Bundle(_) => 2,
            CliError::BelowThreshold(_) => 3,
            CliError::Teacher(_) => 4,
            CliError::Agent(_) | CliError::Io { .. } => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Parser)]
#[command(name = "predlearn", version, about = "Learn predicates and operators from interactive feedback")]
pub struct Cli {
    /// TOML configuration file; PREDLEARN_* variables override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TeacherArg {
    Scripted,
    Remote,
}

impl From<TeacherArg> for Backend {
    fn from(t: TeacherArg) -> Self {
        match t {
            TeacherArg::Scripted => Backend::Scripted,
            TeacherArg::Remote => Backend::Remote,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on the domain's training tasks and write a bundle.
    Train(TrainArgs),
    /// Evaluate a bundle on one or all test suites.
    Eval(EvalArgs),
    /// Plan for a PDDL problem with a bundle's learned domain.
    Plan(PlanArgs),
    /// Print a session log step by step.
    Replay(ReplayArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
    /// Train and evaluate over several seeds.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub domain: DomainId,
    #[arg(long, default_value_t = 10)]
    pub tasks: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = TeacherArg::Scripted)]
    pub teacher: TeacherArg,
    /// Synonym-varied feedback; new predicates are named after the phrasing.
    #[arg(long)]
    pub varied: bool,
    /// Pre-register the predicates of this bundle.
    #[arg(long)]
    pub bootstrap: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Suite family, or `all`.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = TeacherArg::Scripted)]
    pub teacher: TeacherArg,
    /// Write the report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with code 3 if any suite scores below this rate.
    #[arg(long = "assert")]
    pub assert_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub heuristic: Option<Heuristic>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub log: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub domain: DomainId,
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2])]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 10)]
    pub tasks: usize,
    #[arg(long, value_enum, default_value_t = TeacherArg::Scripted)]
    pub teacher: TeacherArg,
    #[arg(long)]
    pub varied: bool,
    /// Compare from-scratch training against bootstrapping from this bundle.
    #[arg(long)]
    pub bootstrap_from: Option<PathBuf>,
    /// Directory for report.json and report.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "assert")]
    pub assert_rate: Option<f64>,
}

/// Runs a parsed command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let config = Config::from_env(cli.config.as_deref())?;
    let text = match cli.command {
        Command::Train(a) => train(&config, a)?,
        Command::Eval(a) => eval(&config, a)?,
        Command::Plan(a) => plan_cmd(&config, a)?,
        Command::Replay(a) => replay(a)?,
        Command::Serve(a) => serve(config, a)?,
        Command::Experiment(a) => experiment(&config, a)?,
    };
    out.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")))
}

fn naming(varied: bool) -> Naming {
    if varied {
        Naming::ByPhrase
    } else {
        Naming::Canonical
    }
}

fn load_bundle(dir: &Path) -> Result<Bundle, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("no bundle at {}", dir.display())));
    }
    Ok(Bundle::load(dir)?)
}

pub fn train(config: &Config, a: TrainArgs) -> Result<String, CliError> {
    if a.tasks == 0 {
        return Err(CliError::Usage("--tasks must be positive".into()));
    }
    let backend: Backend = a.teacher.into();
    let teacher = build_teacher(&config.teacher(backend, naming(a.varied)))?;
    let source = match backend {
        Backend::Scripted => PredicateSource::Scripted,
        Backend::Remote => PredicateSource::Remote,
    };
    let mut session = Session::new(a.domain, config.agent(), teacher, source, a.seed);
    if let Some(dir) = &a.bootstrap {
        session.bootstrap(&load_bundle(dir)?.registry)?;
    }
    std::fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let log_path = a.out.join("session.jsonl");
    session.log_mut().attach(&log_path).map_err(io_err(&log_path))?;
    let tasks = training_tasks(a.domain, a.tasks, a.seed).map_err(AgentError::from)?;
    let mode = if a.varied { VariantMode::Varied { seed: a.seed } } else { VariantMode::Canonical };
    let run = run_training(session, tasks, FeedbackOracle::new(a.domain, mode), a.seed)?;
    run.bundle.save(&a.out)?;
    let c = run.session.counters();
    let mut s = String::new();
    let _ = writeln!(s, "trained {} (seed {}) in {:.2}s", a.domain, a.seed, run.wall_seconds);
    let _ = writeln!(s, "  predicates: {}", run.bundle.registry.positive_names().join(", "));
    let _ = writeln!(s, "  operators:  {}", run.session.operators().len());
    let _ = writeln!(s, "  feedback:   {} counted, {} transitions", c.counted_feedback, c.transitions);
    let _ = writeln!(s, "  bundle:     {}", a.out.display());
    Ok(s)
}

fn families(suite: &str) -> Result<Vec<SuiteFamily>, CliError> {
    if suite == "all" {
        return Ok(SuiteFamily::ALL.to_vec());
    }
    suite.parse::<SuiteFamily>().map(|f| vec![f]).map_err(CliError::Usage)
}

fn check_threshold(report: &RunReport, threshold: Option<f64>) -> Result<(), CliError> {
    let Some(t) = threshold else { return Ok(()) };
    let failing: Vec<String> =
        report.success.iter().filter(|(_, s)| s.mean < t).map(|(f, s)| format!("{f} {:.2}", s.mean)).collect();
    if failing.is_empty() {
        Ok(())
    } else {
        Err(CliError::BelowThreshold(format!("below {t}: {}", failing.join(", "))))
    }
}

fn write_report(dir: &Path, report: &impl serde::Serialize, csv: Option<&str>) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let json = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    let p = dir.join("report.json");
    std::fs::write(&p, json).map_err(io_err(&p))?;
    if let Some(csv) = csv {
        let p = dir.join("report.csv");
        std::fs::write(&p, csv).map_err(io_err(&p))?;
    }
    Ok(())
}

pub fn eval(config: &Config, a: EvalArgs) -> Result<String, CliError> {
    let fams = families(&a.suite)?;
    let bundle = load_bundle(&a.bundle)?;
    let domain = bundle.domain_id().ok_or_else(|| CliError::Usage("bundle manifest names no domain".into()))?;
    let mut teacher = build_teacher(&config.teacher(a.teacher.into(), Naming::Canonical))?;
    let mut suites = Vec::new();
    for f in fams {
        let suite = generate_suite(domain, f, &bundle.manifest.training, a.seed).map_err(AgentError::from)?;
        suites.push(evaluate(&bundle, &suite, teacher.as_mut(), &config.agent())?);
    }
    let report = RunReport::for_bundle(&a.bundle.display().to_string(), &bundle, domain, suites);
    if let Some(dir) = &a.out {
        write_report(dir, &report, Some(&report.to_csv()))?;
    }
    check_threshold(&report, a.assert_rate)?;
    Ok(report.to_text())
}

pub fn plan_cmd(config: &Config, a: PlanArgs) -> Result<String, CliError> {
    let bundle = load_bundle(&a.bundle)?;
    let text =
        std::fs::read_to_string(&a.problem).map_err(|e| CliError::Usage(format!("{}: {e}", a.problem.display())))?;
    let problem = parse_problem(&text).map_err(|e| CliError::Usage(format!("{}: {e}", a.problem.display())))?;
    let heuristic = a.heuristic.unwrap_or(config.agent().heuristic);
    let result = plan(&bundle.domain, &problem, heuristic, config.max_expansions)
        .map_err(|e| CliError::BelowThreshold(format!("planning failed: {e}")))?;
    validate(&bundle.domain, &problem, &result.steps).map_err(|e| {
        CliError::Agent(AgentError::Bundle(BundleError::Format {
            file: "domain.pddl".into(),
            message: format!("plan failed validation: {e}"),
        }))
    })?;
    let mut s = String::new();
    for step in &result.steps {
        let _ = writeln!(s, "({} {})", step.schema, step.args.join(" "));
    }
    let _ = writeln!(s, "; {} steps, {} expansions", result.steps.len(), result.expansions);
    Ok(s)
}

fn action(p: &serde_json::Value) -> String {
    serde_json::from_value::<GroundedAction>(p.get("action").cloned().unwrap_or_default())
        .map(|a| a.to_string())
        .unwrap_or_default()
}

fn render_event(e: &LogEvent) -> String {
    let p = &e.payload;
    let field =
        |k: &str| p.get(k).map(|v| v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string())).unwrap_or_default();
    let body = match e.kind.as_str() {
        "episode_start" => format!("task {}", field("task")),
        "feedback" => format!("{}: \"{}\"", field("kind"), field("text")),
        "proposal" => format!("{} {}", field("kind"), action(p)),
        "executed" | "execution_refused" => action(p),
        "predicate_registered" | "predicate_corrected" | "predicate_removed" => field("name"),
        _ => {
            let s = p.to_string();
            if s.len() > 120 {
                format!("{}...", &s[..s.char_indices().nth(117).map(|(i, _)| i).unwrap_or(s.len())])
            } else {
                s
            }
        }
    };
    format!("[ep {:>2} step {:>3}] {:<22} {}", e.episode, e.step, e.kind, body)
}

pub fn replay(a: ReplayArgs) -> Result<String, CliError> {
    let events = read_log(&a.log).map_err(|e| CliError::Usage(format!("{}: {e}", a.log.display())))?;
    Ok(events.iter().map(|e| render_event(e) + "\n").collect())
}

pub fn serve(config: Config, a: ServeArgs) -> Result<String, CliError> {
    let log_dir = config.data_dir.join("sessions");
    let state = AppState::new(config, Some(log_dir));
    let rt = tokio::runtime::Runtime::new().map_err(io_err(Path::new("<runtime>")))?;
    rt.block_on(server::serve(&a.addr, state)).map_err(|e| CliError::Usage(format!("{}: {e}", a.addr)))?;
    Ok(String::new())
}

pub fn experiment(config: &Config, a: ExperimentArgs) -> Result<String, CliError> {
    if a.seeds.is_empty() {
        return Err(CliError::Usage("--seeds is empty".into()));
    }
    let mut ec = ExperimentConfig::new(a.domain);
    ec.seeds = a.seeds;
    ec.training_tasks = a.tasks;
    ec.agent = config.agent();
    ec.teacher = config.teacher(a.teacher.into(), naming(a.varied));
    ec.varied_feedback = a.varied;
    if let Some(src) = &a.bootstrap_from {
        let source = load_bundle(src)?;
        let report = bootstrap_experiment(&source, &ec)?;
        if let Some(dir) = &a.out {
            write_report(dir, &report, None)?;
        }
        check_threshold(&report.bootstrapped, a.assert_rate)?;
        return Ok(report.to_text());
    }
    let report = full_experiment(&ec)?;
    if let Some(dir) = &a.out {
        write_report(dir, &report, Some(&report.to_csv()))?;
    }
    check_threshold(&report, a.assert_rate)?;
    Ok(report.to_text())
}
