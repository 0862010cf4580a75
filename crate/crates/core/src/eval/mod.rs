//! Train-then-test experiments and their reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::agent::{run_test, run_training, AgentConfig, AgentError, Bundle, Session, TestOutcome, TrainingRun};
use crate::dsl::{PredicateSource, Registry};
use crate::oracle::{FeedbackOracle, VariantMode};
use crate::tasks::{generate_suite, training_tasks, SuiteFamily, TestSuite};
use crate::teacher::{build_teacher, Backend, TeacherBackendConfig, TeacherModules};
use crate::world::DomainId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub family: SuiteFamily,
    pub seed: u64,
    pub successes: usize,
    pub total: usize,
    pub rate: f64,
    pub outcomes: Vec<TestOutcome>,
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len();
        if n == 0 {
            return Stat { mean: 0.0, std: 0.0, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std =
            if n > 1 { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        Stat { mean, std, n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Quantiles> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
        Some(Quantiles { median, min: v[0], max: v[n - 1], count: n })
    }
}

/// One training run and its four suite evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub train_seconds: f64,
    pub counts: BTreeMap<String, u64>,
    pub suites: Vec<SuiteResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub domain: DomainId,
    pub runs: Vec<SeedRun>,
    pub success: BTreeMap<String, Stat>,
    /// Seconds per stage: reason, code, correct, learn (training) and plan
    /// (testing).
    pub runtimes: BTreeMap<String, Quantiles>,
    pub counts: BTreeMap<String, Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub domain: DomainId,
    pub seeds: Vec<u64>,
    pub training_tasks: usize,
    pub families: Vec<SuiteFamily>,
    pub agent: AgentConfig,
    pub teacher: TeacherBackendConfig,
    pub varied_feedback: bool,
}

impl ExperimentConfig {
    pub fn new(domain: DomainId) -> Self {
        ExperimentConfig {
            domain,
            seeds: vec![0, 1, 2],
            training_tasks: 10,
            families: SuiteFamily::ALL.to_vec(),
            agent: AgentConfig::default(),
            teacher: TeacherBackendConfig::default(),
            varied_feedback: false,
        }
    }

    fn source(&self) -> PredicateSource {
        match self.teacher.backend {
            Backend::Scripted => PredicateSource::Scripted,
            Backend::Remote => PredicateSource::Remote,
        }
    }
}

/// Runs every task of `suite` with goal sentences from the canonical
/// templates.
pub fn evaluate(
    bundle: &Bundle,
    suite: &TestSuite,
    teacher: &mut dyn TeacherModules,
    config: &AgentConfig,
) -> Result<SuiteResult, AgentError> {
    let mut oracle = FeedbackOracle::new(suite.domain, VariantMode::Canonical);
    let mut outcomes = Vec::with_capacity(suite.tasks.len());
    for task in &suite.tasks {
        let text = oracle.goal_sentence(&task.goal);
        outcomes.push(run_test(bundle, task, &text, teacher, config)?);
    }
    let successes = outcomes.iter().filter(|o| o.success).count();
    let total = outcomes.len();
    let rate = if total == 0 { 0.0 } else { successes as f64 / total as f64 };
    Ok(SuiteResult { family: suite.family, seed: suite.seed, successes, total, rate, outcomes })
}

/// Trains one session, optionally starting from `bootstrap` predicates.
pub fn train_seed(
    config: &ExperimentConfig,
    seed: u64,
    bootstrap: Option<&Registry>,
) -> Result<TrainingRun, AgentError> {
    let teacher = build_teacher(&config.teacher)?;
    let mut session = Session::new(config.domain, config.agent.clone(), teacher, config.source(), seed);
    if let Some(r) = bootstrap {
        session.bootstrap(r)?;
    }
    let tasks = training_tasks(config.domain, config.training_tasks, seed)?;
    let mode = if config.varied_feedback { VariantMode::Varied { seed } } else { VariantMode::Canonical };
    run_training(session, tasks, FeedbackOracle::new(config.domain, mode), seed)
}

/// Evaluates a trained bundle on the configured suite families.
pub fn evaluate_bundle(config: &ExperimentConfig, bundle: &Bundle, seed: u64) -> Result<Vec<SuiteResult>, AgentError> {
    let mut teacher = build_teacher(&config.teacher)?;
    let mut out = Vec::new();
    for &family in &config.families {
        let suite = generate_suite(config.domain, family, &bundle.manifest.training, seed)?;
        out.push(evaluate(bundle, &suite, teacher.as_mut(), &config.agent)?);
    }
    Ok(out)
}

fn run_all(config: &ExperimentConfig, label: &str, bootstrap: Option<&Registry>) -> Result<RunReport, AgentError> {
    let mut runs = Vec::new();
    let mut stages: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for &seed in &config.seeds {
        let run = train_seed(config, seed, bootstrap)?;
        let suites = evaluate_bundle(config, &run.bundle, seed)?;
        let t = run.session.timings();
        for (name, v) in [("reason", &t.reason), ("code", &t.code), ("correct", &t.correct), ("learn", &t.learn)] {
            stages.entry(name.to_string()).or_default().extend(v);
        }
        let plan = stages.entry("plan".to_string()).or_default();
        plan.extend(suites.iter().flat_map(|s| s.outcomes.iter().map(|o| o.plan_seconds)));
        runs.push(SeedRun { seed, train_seconds: run.wall_seconds, counts: run.session.counters().as_map(), suites });
    }
    Ok(RunReport::new(label, config.domain, runs, &stages))
}

impl RunReport {
    fn new(label: &str, domain: DomainId, runs: Vec<SeedRun>, stages: &BTreeMap<String, Vec<f64>>) -> Self {
        let mut per_family: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut per_count: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in &runs {
            for s in &r.suites {
                per_family.entry(s.family.as_str().to_string()).or_default().push(s.rate);
            }
            for (k, v) in &r.counts {
                per_count.entry(k.clone()).or_default().push(*v as f64);
            }
        }
        RunReport {
            label: label.to_string(),
            domain,
            runs,
            success: per_family.iter().map(|(k, v)| (k.clone(), Stat::of(v))).collect(),
            runtimes: stages.iter().filter_map(|(k, v)| Quantiles::of(v).map(|q| (k.clone(), q))).collect(),
            counts: per_count.iter().map(|(k, v)| (k.clone(), Stat::of(v))).collect(),
        }
    }

    /// Report for one already trained bundle.
    pub fn for_bundle(label: &str, bundle: &Bundle, domain: DomainId, suites: Vec<SuiteResult>) -> Self {
        let plan: Vec<f64> = suites.iter().flat_map(|s| s.outcomes.iter().map(|o| o.plan_seconds)).collect();
        let stages = BTreeMap::from([("plan".to_string(), plan)]);
        let seed = bundle.manifest.seed;
        let run = SeedRun { seed, train_seconds: 0.0, counts: bundle.manifest.counts.clone(), suites };
        RunReport::new(label, domain, vec![run], &stages)
    }

    /// Success rate of `family` in each run, in seed order.
    pub fn rates(&self, family: SuiteFamily) -> Vec<f64> {
        self.runs.iter().flat_map(|r| r.suites.iter().filter(|s| s.family == family).map(|s| s.rate)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} ({}, {} runs)", self.label, self.domain, self.runs.len());
        let _ = writeln!(s, "  {:<14} {:>12}", "suite", "success");
        for f in SuiteFamily::ALL {
            if let Some(st) = self.success.get(f.as_str()) {
                let _ = writeln!(s, "  {:<14} {:>5.2} ± {:.2}", f.as_str(), st.mean, st.std);
            }
        }
        if !self.runtimes.is_empty() {
            let _ = writeln!(s, "  {:<14} {:>10} {:>10} {:>10} {:>6}", "stage (ms)", "median", "min", "max", "n");
            for (k, q) in &self.runtimes {
                let _ = writeln!(
                    s,
                    "  {:<14} {:>10.3} {:>10.3} {:>10.3} {:>6}",
                    k,
                    q.median * 1e3,
                    q.min * 1e3,
                    q.max * 1e3,
                    q.count
                );
            }
        }
        let _ = writeln!(s, "  {:<28} {:>14}", "count", "mean ± std");
        for k in ["teacher_calls", "transitions", "counted_feedback"] {
            if let Some(st) = self.counts.get(k) {
                let _ = writeln!(s, "  {:<28} {:>7.1} ± {:.1}", k, st.mean, st.std);
            }
        }
        s
    }

    /// One row per (seed, suite).
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "label,domain,seed,suite,successes,total,rate,train_seconds,counted_feedback,transitions,teacher_calls\n",
        );
        for r in &self.runs {
            let c = |k: &str| r.counts.get(k).copied().unwrap_or(0);
            for suite in &r.suites {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{:.4},{:.4},{},{},{}",
                    self.label,
                    self.domain,
                    r.seed,
                    suite.family.as_str(),
                    suite.successes,
                    suite.total,
                    suite.rate,
                    r.train_seconds,
                    c("counted_feedback"),
                    c("transitions"),
                    c("teacher_calls")
                );
            }
        }
        s
    }
}

/// Trains and tests once per configured seed.
pub fn full_experiment(config: &ExperimentConfig) -> Result<RunReport, AgentError> {
    run_all(config, "from_scratch", None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub source_domain: Option<DomainId>,
    pub from_scratch: RunReport,
    pub bootstrapped: RunReport,
}

impl BootstrapReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let src = self.source_domain.map(|d| d.to_string()).unwrap_or_else(|| "?".into());
        let _ = writeln!(s, "{} <- {}", self.bootstrapped.domain, src);
        let _ = writeln!(s, "  {:<14} {:>14} {:>14}", "suite", "from scratch", "bootstrapped");
        for f in SuiteFamily::ALL {
            let a = self.from_scratch.success.get(f.as_str());
            let b = self.bootstrapped.success.get(f.as_str());
            if let (Some(a), Some(b)) = (a, b) {
                let _ =
                    writeln!(s, "  {:<14} {:>7.2} ± {:.2} {:>7.2} ± {:.2}", f.as_str(), a.mean, a.std, b.mean, b.std);
            }
        }
        s
    }
}

/// Runs the target domain from scratch and again with the source bundle's
/// predicates pre-registered.
pub fn bootstrap_experiment(source: &Bundle, config: &ExperimentConfig) -> Result<BootstrapReport, AgentError> {
    Ok(BootstrapReport {
        source_domain: source.domain_id(),
        from_scratch: run_all(config, "from_scratch", None)?,
        bootstrapped: run_all(config, "bootstrapped", Some(&source.registry))?,
    })
}
