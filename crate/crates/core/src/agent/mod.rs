//! The interactive learning loop: receive a goal, propose actions or a
//! success declaration, turn the teacher's verdicts into predicates, labels
//! and preconditions, and keep the operator set in step with everything
//! learned so far.

mod bundle;
mod log;
mod train;

use std::collections::BTreeMap;
use web_time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::dsl::{ordered_tuples, print_expr, DslError, ItemKind, Literal, PredicateSource, Registry, SymbolicState};
use crate::learn::{learn_operators, Operator, Transition};
use crate::pddl::{compile, compile_problem, plan, to_world_action, Domain, Heuristic};
use crate::tasks::TaskError;
use crate::teacher::concepts::{self, IN_CONTEXT_EXAMPLE};
use crate::teacher::{
    classify_text, consistent_with_labels, Awaiting, FeedbackEvent, FeedbackKind, LabeledSnapshot, PreconditionLedger,
    PredicateSpec, ReasonContext, TeacherError, TeacherModules,
};
use crate::world::{DomainId, GroundedAction, PerceptionSnapshot, WorldError, WorldState};

pub use bundle::{Bundle, BundleError, BundleManifest};
pub use log::{read_log, EventLog, LogEvent};
pub use train::{run_test, run_training, Curriculum, TestOutcome, TrainingRun};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub plan_probability: f64,
    pub max_episode_steps: u32,
    pub heuristic: Heuristic,
    pub max_expansions: u64,
    pub max_correction_iterations: u32,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            plan_probability: 0.5,
            max_episode_steps: 30,
            heuristic: Heuristic::LmCut,
            max_expansions: 100_000,
            max_correction_iterations: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    AwaitingGoal,
    Running,
    AwaitingFeedback,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSource {
    Plan,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Proposal {
    Action { action: GroundedAction, source: ActionSource },
    DeclareSuccess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum StepOutcome {
    EpisodeStarted {
        task: String,
        goal: String,
    },
    /// Awaiting a verdict on `action` (human-driven sessions).
    Proposed {
        action: GroundedAction,
    },
    /// Awaiting a verdict on a success declaration (human-driven sessions).
    GoalDeclared,
    Executed {
        action: GroundedAction,
    },
    Rejected {
        action: GroundedAction,
    },
    GoalConfirmed,
    GoalCorrected,
    Stalled,
    Aborted {
        reason: String,
    },
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeEnd {
    GoalConfirmed,
    StepLimit,
    Stalled,
    Aborted,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("no active episode")]
    NoEpisode,
    #[error("an episode is already active")]
    EpisodeActive,
    #[error("a proposal is awaiting feedback")]
    AwaitingFeedback,
    #[error("no proposal is pending")]
    NothingPending,
    #[error("{0} feedback does not answer the pending proposal")]
    UnexpectedFeedback(&'static str),
    #[error(transparent)]
    Teacher(#[from] TeacherError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub feedback: BTreeMap<String, u64>,
    /// Goal specifications plus infeasible-action and unsatisfied-goal
    /// explanations.
    pub counted_feedback: u64,
    pub transitions: u64,
    pub teacher_calls: u64,
    pub rejections: u64,
    pub episodes: u64,
    pub goals_confirmed: u64,
}

impl Counters {
    pub fn as_map(&self) -> BTreeMap<String, u64> {
        let mut m = BTreeMap::new();
        m.insert("counted_feedback".to_string(), self.counted_feedback);
        m.insert("transitions".to_string(), self.transitions);
        m.insert("teacher_calls".to_string(), self.teacher_calls);
        m.insert("rejections".to_string(), self.rejections);
        m.insert("episodes".to_string(), self.episodes);
        m.insert("goals_confirmed".to_string(), self.goals_confirmed);
        for (k, v) in &self.feedback {
            m.insert(format!("feedback.{k}"), *v);
        }
        m
    }
}

/// Seconds spent per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub reason: Vec<f64>,
    pub code: Vec<f64>,
    pub correct: Vec<f64>,
    pub learn: Vec<f64>,
    pub plan: Vec<f64>,
}

#[derive(Debug, Clone)]
struct RawTransition {
    pre: usize,
    action: GroundedAction,
    post: usize,
    step: u64,
}

pub struct Session {
    domain: DomainId,
    config: AgentConfig,
    teacher: Box<dyn TeacherModules>,
    source: PredicateSource,
    registry: Registry,
    ledger: PreconditionLedger,
    snapshots: Vec<PerceptionSnapshot>,
    raw: Vec<RawTransition>,
    parsed: BTreeMap<usize, SymbolicState>,
    parsed_version: u64,
    transitions: Vec<Transition>,
    operators: Vec<Operator>,
    pddl: Domain,
    labels: Vec<LabeledSnapshot>,
    world: Option<WorldState>,
    objects: Vec<String>,
    task_id: String,
    goal_text: Option<String>,
    goal: Option<Vec<Literal>>,
    rng: ChaCha8Rng,
    step: u64,
    episode: u32,
    episode_step: u32,
    status: SessionStatus,
    pending: Option<Proposal>,
    dirty: bool,
    log: EventLog,
    counters: Counters,
    timings: Timings,
}

impl Session {
    /// A fresh session with the in-context example predicate registered.
    pub fn new(
        domain: DomainId,
        config: AgentConfig,
        teacher: Box<dyn TeacherModules>,
        source: PredicateSource,
        seed: u64,
    ) -> Self {
        let mut registry = Registry::new();
        let c = concepts::by_key(IN_CONTEXT_EXAMPLE).expect("library has the in-context example");
        registry
            .add_pair(c.name, c.params, c.description, concepts::parse_body(c.body), PredicateSource::InContextExample)
            .expect("in-context example registers");
        let pddl = compile(domain.as_str(), &registry, &[]);
        let mut s = Session {
            domain,
            config,
            teacher,
            source,
            registry,
            ledger: PreconditionLedger::new(),
            snapshots: Vec::new(),
            raw: Vec::new(),
            parsed: BTreeMap::new(),
            parsed_version: 0,
            transitions: Vec::new(),
            operators: Vec::new(),
            pddl,
            labels: Vec::new(),
            world: None,
            objects: Vec::new(),
            task_id: String::new(),
            goal_text: None,
            goal: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            step: 0,
            episode: 0,
            episode_step: 0,
            status: SessionStatus::AwaitingGoal,
            pending: None,
            dirty: false,
            log: EventLog::new(),
            counters: Counters::default(),
            timings: Timings::default(),
        };
        s.record("session_start", json!({"domain": domain, "seed": seed, "predicates": s.registry.positive_names()}));
        s
    }

    /// Pre-registers the predicates of another registry.
    pub fn bootstrap(&mut self, source: &Registry) -> Result<Vec<String>, AgentError> {
        let added = self.registry.absorb(source).map_err(TeacherError::from)?;
        self.record("bootstrap", json!({"predicates": added}));
        self.dirty = true;
        self.refresh()?;
        Ok(added)
    }

    pub fn domain(&self) -> DomainId {
        self.domain
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn ledger(&self) -> &PreconditionLedger {
        &self.ledger
    }

    pub fn operators(&self) -> &[Operator] {
        &self.operators
    }

    pub fn pddl_domain(&self) -> &Domain {
        &self.pddl
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn labels(&self) -> &[LabeledSnapshot] {
        &self.labels
    }

    pub fn world(&self) -> Option<&WorldState> {
        self.world.as_ref()
    }

    pub fn goal(&self) -> Option<&[Literal]> {
        self.goal.as_deref()
    }

    pub fn goal_text(&self) -> Option<&str> {
        self.goal_text.as_deref()
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn pending(&self) -> Option<&Proposal> {
        self.pending.as_ref()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn episode(&self) -> u32 {
        self.episode
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn log_mut(&mut self) -> &mut EventLog {
        &mut self.log
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn timings(&self) -> &Timings {
        &self.timings
    }

    /// Current symbolic state under the learned predicates.
    pub fn symbolic_state(&self) -> Option<SymbolicState> {
        self.world.as_ref().and_then(|w| self.registry.parse_state(&w.perceive()).ok())
    }

    pub fn bundle(&self, mut manifest: BundleManifest) -> Bundle {
        manifest.domain = Some(self.domain);
        manifest.counts = self.counters.as_map();
        Bundle::new(self.registry.clone(), &self.operators, self.ledger.clone(), self.transitions.clone(), manifest)
    }

    fn record(&mut self, kind: &str, payload: Value) {
        self.log.record(self.step, self.episode, kind, payload);
    }

    pub fn finish(&mut self) {
        if self.status != SessionStatus::Finished {
            self.status = SessionStatus::Finished;
            self.record("session_end", json!({"counts": self.counters.as_map()}));
        }
    }

    /// Starts an episode in `world` and processes the goal utterance.
    pub fn begin_episode(
        &mut self,
        task_id: &str,
        world: WorldState,
        goal_text: &str,
    ) -> Result<StepOutcome, AgentError> {
        match self.status {
            SessionStatus::Running | SessionStatus::AwaitingFeedback => return Err(AgentError::EpisodeActive),
            SessionStatus::Finished => return Err(AgentError::NoEpisode),
            SessionStatus::AwaitingGoal => {}
        }
        self.episode += 1;
        self.episode_step = 0;
        self.counters.episodes += 1;
        self.objects = world.object_names();
        self.task_id = task_id.to_string();
        self.goal_text = Some(goal_text.to_string());
        self.goal = None;
        self.world = Some(world);
        self.status = SessionStatus::Running;
        self.record("episode_start", json!({"task": task_id, "objects": self.objects, "world": self.world}));
        let event =
            FeedbackEvent { kind: FeedbackKind::GoalSpec, text: goal_text.to_string(), action: None, step: self.step };
        let snapshot = self.world.as_ref().expect("set above").perceive();
        if let Err(e) = self.handle_feedback(&event, &snapshot) {
            return self.fail_episode(e);
        }
        self.refresh_or_abort()?;
        Ok(StepOutcome::EpisodeStarted { task: task_id.to_string(), goal: goal_text.to_string() })
    }

    fn end_episode(&mut self, how: EpisodeEnd) {
        self.record("episode_end", json!({"task": self.task_id, "end": how}));
        self.pending = None;
        self.goal = None;
        self.status = SessionStatus::AwaitingGoal;
    }

    /// Aborts on a failed correction; other teacher errors are fatal.
    fn fail_episode(&mut self, e: TeacherError) -> Result<StepOutcome, AgentError> {
        match e {
            TeacherError::Transport(_) => Err(AgentError::Teacher(e)),
            e => {
                let reason = e.to_string();
                self.record("episode_aborted", json!({"reason": reason}));
                self.end_episode(EpisodeEnd::Aborted);
                Ok(StepOutcome::Aborted { reason })
            }
        }
    }

    fn refresh_or_abort(&mut self) -> Result<(), AgentError> {
        if let Err(e) = self.refresh() {
            match e {
                AgentError::Teacher(t) if !matches!(t, TeacherError::Transport(_)) => {
                    self.fail_episode(t)?;
                }
                other => return Err(other),
            }
        }
        Ok(())
    }

    /// Chooses the next proposal: a success declaration when the goal holds
    /// symbolically, otherwise a planned action with probability
    /// `plan_probability` or a random action allowed by the ledger.
    pub fn propose(&mut self) -> Result<Option<Proposal>, AgentError> {
        match self.status {
            SessionStatus::Running => {}
            SessionStatus::AwaitingFeedback => return Err(AgentError::AwaitingFeedback),
            _ => return Err(AgentError::NoEpisode),
        }
        let snapshot = self.world.as_ref().expect("episode has a world").perceive();
        let state = match self.parse_repairing(&snapshot) {
            Ok(s) => s,
            Err(e) => {
                self.fail_episode(e)?;
                return Ok(None);
            }
        };
        if let Some(goal) = &self.goal {
            if goal.iter().all(|l| state.satisfies(l)) {
                return Ok(Some(self.set_pending(Proposal::DeclareSuccess)));
            }
        }
        let u: f64 = self.rng.gen();
        if u < self.config.plan_probability {
            if let Some(a) = self.plan_first_action(&state) {
                return Ok(Some(self.set_pending(Proposal::Action { action: a, source: ActionSource::Plan })));
            }
        }
        let candidates = self.feasible_actions(&state);
        match candidates.choose(&mut self.rng) {
            Some(a) => {
                let a = a.clone();
                Ok(Some(self.set_pending(Proposal::Action { action: a, source: ActionSource::Random })))
            }
            None => {
                self.record("stalled", json!({"state": state}));
                self.end_episode(EpisodeEnd::Stalled);
                Ok(None)
            }
        }
    }

    fn set_pending(&mut self, p: Proposal) -> Proposal {
        self.record("proposal", serde_json::to_value(&p).expect("proposal serializes"));
        self.pending = Some(p.clone());
        self.status = SessionStatus::AwaitingFeedback;
        p
    }

    /// Grounded actions whose recorded preconditions hold in `state`.
    pub fn feasible_actions(&self, state: &SymbolicState) -> Vec<GroundedAction> {
        let objects: Vec<&str> = self.objects.iter().map(String::as_str).collect();
        let mut out = Vec::new();
        for (schema, arity) in self.domain.schemas() {
            for args in ordered_tuples(&objects, *arity) {
                let a = GroundedAction::new(*schema, &args);
                if self.ledger.holds(&a, state) {
                    out.push(a);
                }
            }
        }
        out
    }

    fn plan_first_action(&mut self, state: &SymbolicState) -> Option<GroundedAction> {
        let goal = self.goal.as_ref()?;
        if self.operators.is_empty() {
            return None;
        }
        let (problem, names) = compile_problem("explore", self.domain.as_str(), &self.objects, state, goal);
        let t0 = Instant::now();
        let result = plan(&self.pddl, &problem, self.config.heuristic, self.config.max_expansions);
        self.timings.plan.push(t0.elapsed().as_secs_f64());
        let first = result.ok()?.steps.into_iter().next()?;
        let arity = self.domain.arity(crate::pddl::schema_of(&first.schema))?;
        Some(to_world_action(&first, arity, &names))
    }

    /// Routes a teacher verdict on the pending proposal.
    pub fn respond(&mut self, event: FeedbackEvent) -> Result<StepOutcome, AgentError> {
        let pending = self.pending.clone().ok_or(AgentError::NothingPending)?;
        let world = self.world.clone().expect("episode has a world");
        let snapshot = world.perceive();
        let outcome = match (&pending, event.kind) {
            (Proposal::Action { action, .. }, FeedbackKind::FeasibleActionSignal) => {
                let next = match world.execute(action) {
                    Ok(n) => n,
                    Err(e) => {
                        // Approved but physically impossible: nothing is executed or learned.
                        self.record("execution_refused", json!({"action": action, "error": e.to_string()}));
                        self.finish_step();
                        return Ok(StepOutcome::Rejected { action: action.clone() });
                    }
                };
                let post = next.perceive();
                self.world = Some(next);
                let pre_id = self.store_snapshot(snapshot.clone());
                let post_id = self.store_snapshot(post);
                self.raw.push(RawTransition { pre: pre_id, action: action.clone(), post: post_id, step: self.step });
                self.counters.transitions += 1;
                self.dirty = true;
                self.record("executed", json!({"action": action}));
                let ev = FeedbackEvent { action: Some(action.clone()), ..event };
                match self.handle_feedback(&ev, &snapshot) {
                    Ok(()) => StepOutcome::Executed { action: action.clone() },
                    Err(e) => return self.fail_after_step(e),
                }
            }
            (Proposal::Action { action, .. }, FeedbackKind::InfeasibleActionExplanation) => {
                self.counters.rejections += 1;
                let ev = FeedbackEvent { action: Some(action.clone()), ..event };
                match self.handle_feedback(&ev, &snapshot) {
                    Ok(()) => StepOutcome::Rejected { action: action.clone() },
                    Err(e) => return self.fail_after_step(e),
                }
            }
            (Proposal::DeclareSuccess, FeedbackKind::GoalAchievedSignal) => {
                if let Err(e) = self.handle_feedback(&event, &snapshot) {
                    return self.fail_after_step(e);
                }
                StepOutcome::GoalConfirmed
            }
            (Proposal::DeclareSuccess, FeedbackKind::UnsatisfiedGoalExplanation) => {
                if let Err(e) = self.handle_feedback(&event, &snapshot) {
                    return self.fail_after_step(e);
                }
                StepOutcome::GoalCorrected
            }
            (_, kind) => return Err(AgentError::UnexpectedFeedback(kind.as_str())),
        };
        self.finish_step();
        if let Err(e) = self.refresh() {
            match e {
                AgentError::Teacher(t) if !matches!(t, TeacherError::Transport(_)) => return self.fail_episode(t),
                other => return Err(other),
            }
        }
        if outcome == StepOutcome::GoalConfirmed {
            self.counters.goals_confirmed += 1;
            self.end_episode(EpisodeEnd::GoalConfirmed);
        } else if self.episode_step >= self.config.max_episode_steps {
            self.end_episode(EpisodeEnd::StepLimit);
        }
        Ok(outcome)
    }

    fn finish_step(&mut self) {
        self.pending = None;
        self.status = SessionStatus::Running;
        self.step += 1;
        self.episode_step += 1;
    }

    fn fail_after_step(&mut self, e: TeacherError) -> Result<StepOutcome, AgentError> {
        self.finish_step();
        self.fail_episode(e)
    }

    /// Free-form teacher text answering the pending proposal.
    pub fn feedback_text(&mut self, text: &str) -> Result<StepOutcome, AgentError> {
        let pending = self.pending.as_ref().ok_or(AgentError::NothingPending)?;
        let (awaiting, action) = match pending {
            Proposal::Action { action, .. } => (Awaiting::ActionVerdict, Some(action.clone())),
            Proposal::DeclareSuccess => (Awaiting::SuccessVerdict, None),
        };
        let kind = classify_text(text, awaiting);
        self.respond(FeedbackEvent { kind, text: text.to_string(), action, step: self.step })
    }

    fn store_snapshot(&mut self, s: PerceptionSnapshot) -> usize {
        self.snapshots.push(s);
        self.snapshots.len() - 1
    }

    fn drain_exchanges(&mut self) {
        for x in self.teacher.take_exchanges() {
            self.record("teacher_exchange", serde_json::to_value(&x).expect("exchange serializes"));
        }
    }

    fn count_call(&mut self, stage: fn(&mut Timings) -> &mut Vec<f64>, t0: Instant) {
        self.counters.teacher_calls += 1;
        stage(&mut self.timings).push(t0.elapsed().as_secs_f64());
        self.drain_exchanges();
    }

    /// Reason over one piece of feedback and apply everything it implies.
    fn handle_feedback(&mut self, event: &FeedbackEvent, snapshot: &PerceptionSnapshot) -> Result<(), TeacherError> {
        *self.counters.feedback.entry(event.kind.as_str().to_string()).or_default() += 1;
        if event.kind.is_counted() {
            self.counters.counted_feedback += 1;
        }
        self.record("feedback", serde_json::to_value(event).expect("feedback serializes"));
        let t0 = Instant::now();
        let out = {
            let ctx = ReasonContext {
                domain: self.domain,
                objects: &self.objects,
                registry: &self.registry,
                ledger: &self.ledger,
                goal: self.goal.as_deref(),
            };
            self.teacher.reason(event, &ctx)
        };
        self.count_call(|t| &mut t.reason, t0);
        let out = match out {
            Ok(o) => o,
            Err(e @ (TeacherError::Transport(_) | TeacherError::CorrectionFailed { .. })) => return Err(e),
            Err(e) => {
                self.record("teacher_error", json!({"stage": "reason", "error": e.to_string()}));
                return Ok(());
            }
        };
        self.record("reasoned", serde_json::to_value(&out).expect("reasoner output serializes"));

        if !out.new_predicate_descriptions.is_empty() {
            self.register_new(&out.new_predicate_descriptions, snapshot)?;
        }
        for l in out.literal_labels {
            let Some(literal) = self.positive_literal(l) else { continue };
            self.labels.push(LabeledSnapshot { snapshot: snapshot.clone(), literal, step: self.step });
        }
        if let Some(np) = out.new_action_preconditions {
            for l in np.literals {
                if self.registry.contains(&l.atom.predicate) && self.ledger.add(&np.schema, l.clone()) {
                    self.record("precondition_added", json!({"schema": np.schema, "literal": l}));
                    self.dirty = true;
                }
            }
        }
        if let Some(goal) = out.symbolic_goal {
            let known = goal.iter().all(|l| self.registry.contains(&l.atom.predicate));
            if known {
                self.record("goal_set", json!({"goal": goal}));
                self.goal = Some(goal);
            } else {
                self.record(
                    "teacher_error",
                    json!({"stage": "goal", "error": "goal mentions an unregistered predicate"}),
                );
            }
        }
        self.align_all()
    }

    /// A label over a positive predicate; labels on complements are flipped.
    fn positive_literal(&self, l: Literal) -> Option<Literal> {
        let p = self.registry.get(&l.atom.predicate)?;
        if p.negated {
            let mut atom = l.atom;
            atom.predicate = p.partner.clone();
            Some(Literal::new(atom, !l.value))
        } else {
            Some(l)
        }
    }

    fn register_new(&mut self, specs: &[PredicateSpec], snapshot: &PerceptionSnapshot) -> Result<(), TeacherError> {
        let t0 = Instant::now();
        let program = self.teacher.code(specs, &self.registry);
        self.count_call(|t| &mut t.code, t0);
        let program = match program {
            Ok(p) => p,
            Err(e @ TeacherError::Transport(_)) => return Err(e),
            Err(e) => {
                self.record("teacher_error", json!({"stage": "code", "error": e.to_string()}));
                return Ok(());
            }
        };
        let mut added = Vec::new();
        for item in program.items.iter().filter(|i| i.kind == ItemKind::Util) {
            if self.registry.utility_def(&item.name).is_some() {
                continue;
            }
            let params: Vec<&str> = item.params.iter().map(String::as_str).collect();
            if let Err(e) = self.registry.add_utility(&item.name, &params, item.description(), item.body.clone()) {
                self.record("teacher_error", json!({"stage": "register", "name": item.name, "error": e.to_string()}));
            }
        }
        for item in program.items.iter().filter(|i| i.kind == ItemKind::Pred) {
            if !specs.iter().any(|s| s.name == item.name) || self.registry.contains(&item.name) {
                continue;
            }
            let params: Vec<&str> = item.params.iter().map(String::as_str).collect();
            match self.registry.add_pair(&item.name, &params, item.description(), item.body.clone(), self.source) {
                Ok(()) => {
                    self.record(
                        "predicate_registered",
                        json!({"name": item.name, "params": item.params, "description": item.description(), "body": print_expr(&item.body), "source": self.source}),
                    );
                    added.push(item.name.clone());
                }
                Err(e) => self
                    .record("teacher_error", json!({"stage": "register", "name": item.name, "error": e.to_string()})),
            }
        }
        self.dirty |= !added.is_empty();
        for name in added {
            self.execution_check(&name, snapshot)?;
        }
        Ok(())
    }

    /// Runs `name` on every stored snapshot, repairing runtime errors with
    /// the execution corrector.
    fn execution_check(&mut self, name: &str, current: &PerceptionSnapshot) -> Result<(), TeacherError> {
        let mut iterations = 0;
        loop {
            let error = {
                let p = self.registry.get(name).expect("registered");
                let snaps = self
                    .snapshots
                    .iter()
                    .chain(self.labels.iter().map(|l| &l.snapshot))
                    .chain(std::iter::once(current));
                let mut found = None;
                'outer: for s in snaps {
                    let objects: Vec<&str> = s.object_names().collect();
                    for args in ordered_tuples(&objects, p.arity()) {
                        if let Err(e) = self.registry.evaluate(name, s, &args) {
                            found = Some(e);
                            break 'outer;
                        }
                    }
                }
                found
            };
            let Some(err) = error else { return Ok(()) };
            self.repair_execution(name, err, &mut iterations)?;
        }
    }

    fn repair_execution(&mut self, name: &str, err: DslError, iterations: &mut u32) -> Result<(), TeacherError> {
        let positive =
            self.registry.get(name).map(|p| p.positive_name().to_string()).unwrap_or_else(|| name.to_string());
        let exec = match err.exec_error() {
            Some(e) if *iterations < self.config.max_correction_iterations => e.clone(),
            _ => {
                let reason = err.to_string();
                return Err(self.drop_predicate(&positive, &reason));
            }
        };
        *iterations += 1;
        let t0 = Instant::now();
        let pred = self.registry.get(&positive).expect("registered").clone();
        let fixed = self.teacher.correct_execution(&pred, &self.registry, &exec);
        self.count_call(|t| &mut t.correct, t0);
        match fixed.and_then(|body| {
            let text = print_expr(&body);
            self.registry.set_body(&positive, body).map(|_| text).map_err(TeacherError::from)
        }) {
            Ok(text) => {
                self.record(
                    "predicate_corrected",
                    json!({"name": positive, "kind": "execution", "error": exec, "body": text}),
                );
                self.dirty = true;
                Ok(())
            }
            Err(e @ TeacherError::Transport(_)) => Err(e),
            Err(e) => Err(self.drop_predicate(&positive, &e.to_string())),
        }
    }

    /// Removes a predicate pair with its labels and ledger entries.
    fn drop_predicate(&mut self, positive: &str, reason: &str) -> TeacherError {
        let neg = self.registry.get(positive).map(|p| p.partner.clone());
        let _ = self.registry.remove_pair(positive);
        self.labels.retain(|l| l.literal.atom.predicate != positive);
        self.ledger.remove_predicate(positive);
        if let Some(n) = &neg {
            self.ledger.remove_predicate(n);
        }
        if self.goal.as_ref().is_some_and(|g| g.iter().any(|l| l.atom.predicate == positive)) {
            self.goal = None;
        }
        self.dirty = true;
        self.record("predicate_removed", json!({"name": positive, "reason": reason}));
        TeacherError::CorrectionFailed { predicate: positive.to_string(), reason: reason.to_string() }
    }

    /// Brings every labelled predicate into agreement with its labels.
    fn align_all(&mut self) -> Result<(), TeacherError> {
        let mut names: Vec<String> = self.labels.iter().map(|l| l.literal.atom.predicate.clone()).collect();
        names.sort();
        names.dedup();
        for name in names {
            let mut iterations = 0;
            while let Some(pred) = self.registry.get(&name).cloned() {
                let labels: Vec<LabeledSnapshot> =
                    self.labels.iter().filter(|l| l.literal.atom.predicate == name).cloned().collect();
                if consistent_with_labels(&self.registry, &pred, &pred.body, &labels) {
                    break;
                }
                if iterations >= self.config.max_correction_iterations {
                    return Err(self.drop_predicate(&name, "disagrees with teacher labels after correction"));
                }
                iterations += 1;
                let t0 = Instant::now();
                let fixed = self.teacher.correct_alignment(&pred, &self.registry, &labels);
                self.count_call(|t| &mut t.correct, t0);
                match fixed {
                    Ok(body) => {
                        let text = print_expr(&body);
                        if let Err(e) = self.registry.set_body(&name, body) {
                            self.record("teacher_error", json!({"stage": "correct_alignment", "error": e.to_string()}));
                            continue;
                        }
                        self.record("predicate_corrected", json!({"name": name, "kind": "alignment", "body": text}));
                        self.dirty = true;
                    }
                    Err(e @ TeacherError::Transport(_)) => return Err(e),
                    Err(e) => return Err(self.drop_predicate(&name, &e.to_string())),
                }
            }
        }
        Ok(())
    }

    /// Parses a snapshot, repairing predicates that fail at runtime.
    fn parse_repairing(&mut self, s: &PerceptionSnapshot) -> Result<SymbolicState, TeacherError> {
        let mut attempts: BTreeMap<String, u32> = BTreeMap::new();
        loop {
            match self.registry.parse_state(s) {
                Ok(state) => return Ok(state),
                Err(e @ DslError::Exec { .. }) => {
                    let DslError::Exec { atom, .. } = &e else { unreachable!() };
                    let name = atom.predicate.clone();
                    let n = attempts.entry(name.clone()).or_default();
                    let mut it = *n;
                    let r = self.repair_execution(&name, e, &mut it);
                    *attempts.get_mut(&name).expect("inserted") = it;
                    r?;
                }
                Err(e) => return Err(TeacherError::from(e)),
            }
        }
    }

    /// Re-parses stored transitions and relearns operators after a change.
    fn refresh(&mut self) -> Result<(), AgentError> {
        if !self.dirty {
            return Ok(());
        }
        self.dirty = false;
        if self.parsed_version != self.registry.version() {
            self.parsed.clear();
            self.parsed_version = self.registry.version();
        }
        let mut transitions = Vec::with_capacity(self.raw.len());
        for i in 0..self.raw.len() {
            let (pre, post) = (self.raw[i].pre, self.raw[i].post);
            let s_pre = self.parsed_state(pre)?;
            let s_post = self.parsed_state(post)?;
            let r = &self.raw[i];
            transitions.push(Transition {
                s_pre,
                action: r.action.clone(),
                s_post,
                step: r.step,
                registry_version: self.parsed_version,
                objects: self.snapshots[r.pre].object_names().map(str::to_string).collect(),
            });
        }
        self.transitions = transitions;
        let t0 = Instant::now();
        let result = learn_operators(&self.transitions, &self.ledger);
        self.timings.learn.push(t0.elapsed().as_secs_f64());
        self.operators = result.operators;
        self.pddl = compile(self.domain.as_str(), &self.registry, &self.operators);
        let ops: Vec<String> = self.operators.iter().map(|o| o.to_string()).collect();
        self.record("operators_learned", json!({"operators": ops, "diagnostics": result.diagnostics}));
        Ok(())
    }

    fn parsed_state(&mut self, id: usize) -> Result<SymbolicState, AgentError> {
        if let Some(s) = self.parsed.get(&id) {
            return Ok(s.clone());
        }
        let snap = self.snapshots[id].clone();
        let s = self.parse_repairing(&snap)?;
        if self.parsed_version != self.registry.version() {
            // A repair changed a body; start over with the new registry.
            self.parsed.clear();
            self.parsed_version = self.registry.version();
            self.dirty = true;
        }
        self.parsed.insert(id, s.clone());
        Ok(s)
    }
}
