//! The language-side modules of the learner: a reasoner that turns feedback
//! text into labels, predicate requests and preconditions; a coder that
//! writes PredScript for requested predicates; correctors for execution
//! errors and label disagreement; and a goal translator.
//!
//! Two backends implement [`TeacherModules`]: a deterministic scripted one
//! and a client for a remote chat-completion endpoint.

pub mod concepts;
pub mod goal;
pub mod phrasebook;
pub mod remote;
pub mod scripted;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{Atom, DslError, ExecError, Expr, Literal, Predicate, Program, Registry, SymbolicState};
use crate::world::{DomainId, GroundedAction, PerceptionSnapshot};

pub use remote::{ChatMessage, ChatTransport, Exchange, RemoteTeacher, ScriptedResponder};
pub use scripted::ScriptedTeacher;

/// Positional parameter names of action schemas.
pub const ACTION_PARAMS: [&str; 2] = ["a", "b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    GoalSpec,
    GoalAchievedSignal,
    UnsatisfiedGoalExplanation,
    FeasibleActionSignal,
    InfeasibleActionExplanation,
}

impl FeedbackKind {
    /// Kinds that cost the teacher an utterance beyond a yes/no.
    pub fn is_counted(self) -> bool {
        matches!(
            self,
            FeedbackKind::GoalSpec
                | FeedbackKind::UnsatisfiedGoalExplanation
                | FeedbackKind::InfeasibleActionExplanation
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackKind::GoalSpec => "goal_spec",
            FeedbackKind::GoalAchievedSignal => "goal_achieved_signal",
            FeedbackKind::UnsatisfiedGoalExplanation => "unsatisfied_goal_explanation",
            FeedbackKind::FeasibleActionSignal => "feasible_action_signal",
            FeedbackKind::InfeasibleActionExplanation => "infeasible_action_explanation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub kind: FeedbackKind,
    pub text: String,
    /// The proposal this feedback answers, for action signals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<GroundedAction>,
    pub step: u64,
}

/// What the learner was waiting on when free-form text arrives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Awaiting {
    Goal,
    ActionVerdict,
    SuccessVerdict,
}

const NEGATIVE_MARKERS: &[&str] =
    &["can't", "cannot", "can not", "haven't", "have not", "not ", "n't ", "no,", "wrong"];

/// Classifies free-form teacher text given what the learner asked.
pub fn classify_text(text: &str, awaiting: Awaiting) -> FeedbackKind {
    let t = format!("{} ", text.to_lowercase());
    let negative = NEGATIVE_MARKERS.iter().any(|m| t.contains(m));
    match (awaiting, negative) {
        (Awaiting::Goal, _) => FeedbackKind::GoalSpec,
        (Awaiting::ActionVerdict, false) => FeedbackKind::FeasibleActionSignal,
        (Awaiting::ActionVerdict, true) => FeedbackKind::InfeasibleActionExplanation,
        (Awaiting::SuccessVerdict, false) => FeedbackKind::GoalAchievedSignal,
        (Awaiting::SuccessVerdict, true) => FeedbackKind::UnsatisfiedGoalExplanation,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredicateSpec {
    pub name: String,
    pub params: Vec<String>,
    pub description: String,
}

/// Preconditions over [`ACTION_PARAMS`] to add to one schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewPrecondition {
    pub schema: String,
    pub literals: Vec<Literal>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReasonerOutput {
    pub new_predicate_descriptions: Vec<PredicateSpec>,
    pub literal_labels: Vec<Literal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_action_preconditions: Option<NewPrecondition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbolic_goal: Option<Vec<Literal>>,
}

/// Known preconditions per schema, lifted over [`ACTION_PARAMS`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PreconditionLedger {
    pub entries: BTreeMap<String, BTreeSet<Literal>>,
}

impl PreconditionLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, schema: &str, lit: Literal) -> bool {
        self.entries.entry(schema.to_string()).or_default().insert(lit)
    }

    pub fn for_schema(&self, schema: &str) -> impl Iterator<Item = &Literal> {
        self.entries.get(schema).into_iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Ledger literals of the action's schema with parameters substituted.
    pub fn ground(&self, action: &GroundedAction) -> Vec<Literal> {
        self.for_schema(&action.schema).map(|l| Literal::new(substitute(&l.atom, &action.args), l.value)).collect()
    }

    pub fn holds(&self, action: &GroundedAction, state: &SymbolicState) -> bool {
        self.ground(action).iter().all(|l| state.satisfies(l))
    }

    pub fn mentions(&self, predicate: &str) -> bool {
        self.entries.values().flatten().any(|l| l.atom.predicate == predicate)
    }

    pub fn remove_predicate(&mut self, predicate: &str) {
        for set in self.entries.values_mut() {
            set.retain(|l| l.atom.predicate != predicate);
        }
    }
}

/// Replaces action parameter names in `atom` by the action's objects.
pub fn substitute(atom: &Atom, args: &[String]) -> Atom {
    Atom {
        predicate: atom.predicate.clone(),
        args: atom
            .args
            .iter()
            .map(|v| match ACTION_PARAMS.iter().position(|p| p == v) {
                Some(i) if i < args.len() => args[i].clone(),
                _ => v.clone(),
            })
            .collect(),
    }
}

/// A snapshot with one teacher-implied literal over positive predicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSnapshot {
    pub snapshot: PerceptionSnapshot,
    pub literal: Literal,
    pub step: u64,
}

/// Whether `body`, as the body of `pred`, agrees with every label on it.
pub fn consistent_with_labels(registry: &Registry, pred: &Predicate, body: &Expr, labels: &[LabeledSnapshot]) -> bool {
    labels.iter().filter(|l| l.literal.atom.predicate == pred.name).all(|l| {
        let args: Vec<&str> = l.literal.atom.args.iter().map(String::as_str).collect();
        matches!(registry.evaluate_body(pred, body, &l.snapshot, &args), Ok(v) if v == l.literal.value)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Scripted,
    Remote,
}

/// How the scripted reasoner names new predicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Naming {
    /// One fixed name per concept.
    Canonical,
    /// Name follows the wording of the explanation that introduced it.
    ByPhrase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherBackendConfig {
    pub backend: Backend,
    pub endpoint: Option<String>,
    pub model: String,
    pub max_correction_iterations: u32,
    pub timeout_secs: u64,
    pub retries: u32,
    pub naming: Naming,
    pub miscalibrated_drafts: bool,
}

impl Default for TeacherBackendConfig {
    fn default() -> Self {
        TeacherBackendConfig {
            backend: Backend::Scripted,
            endpoint: None,
            model: "gpt-4".to_string(),
            max_correction_iterations: 3,
            timeout_secs: 60,
            retries: 2,
            naming: Naming::Canonical,
            miscalibrated_drafts: false,
        }
    }
}

/// Everything the reasoner may look at besides the feedback itself.
pub struct ReasonContext<'a> {
    pub domain: DomainId,
    pub objects: &'a [String],
    pub registry: &'a Registry,
    pub ledger: &'a PreconditionLedger,
    pub goal: Option<&'a [Literal]>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TeacherError {
    #[error("could not interpret feedback: {0}")]
    Unparsed(String),
    #[error("no reference implementation for `{0}`")]
    UnknownConcept(String),
    #[error("precondition mentions {object}, which is not an argument of {action}")]
    Unliftable { object: String, action: String },
    #[error("correction of {predicate} failed: {reason}")]
    CorrectionFailed { predicate: String, reason: String },
    #[error("goal translation failed: {0}")]
    Translation(String),
    #[error("goal text is empty")]
    EmptyGoal,
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error(transparent)]
    Dsl(#[from] DslError),
}

pub trait TeacherModules: Send {
    fn reason(&mut self, event: &FeedbackEvent, ctx: &ReasonContext) -> Result<ReasonerOutput, TeacherError>;

    /// PredScript for the requested predicates plus any utilities they need
    /// that the registry lacks.
    fn code(&mut self, specs: &[PredicateSpec], registry: &Registry) -> Result<Program, TeacherError>;

    fn correct_execution(
        &mut self,
        pred: &Predicate,
        registry: &Registry,
        error: &ExecError,
    ) -> Result<Expr, TeacherError>;

    fn correct_alignment(
        &mut self,
        pred: &Predicate,
        registry: &Registry,
        labels: &[LabeledSnapshot],
    ) -> Result<Expr, TeacherError>;

    fn translate_goal(
        &mut self,
        text: &str,
        registry: &Registry,
        objects: &[String],
    ) -> Result<Vec<Literal>, TeacherError>;

    /// Prompt/response pairs since the last call.
    fn take_exchanges(&mut self) -> Vec<Exchange> {
        Vec::new()
    }
}

/// Builds the backend selected by `config`.
pub fn build_teacher(config: &TeacherBackendConfig) -> Result<Box<dyn TeacherModules>, TeacherError> {
    match config.backend {
        Backend::Scripted => Ok(Box::new(ScriptedTeacher::new(config.clone()))),
        Backend::Remote => Ok(Box::new(RemoteTeacher::from_config(config)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_free_text() {
        assert_eq!(classify_text("Yes, go ahead", Awaiting::ActionVerdict), FeedbackKind::FeasibleActionSignal);
        assert_eq!(
            classify_text("You can't pick up coaster it is too large to be grasped.", Awaiting::ActionVerdict),
            FeedbackKind::InfeasibleActionExplanation
        );
        assert_eq!(
            classify_text("red block is not on coaster", Awaiting::SuccessVerdict),
            FeedbackKind::UnsatisfiedGoalExplanation
        );
        assert_eq!(
            classify_text("you have achieved the goal", Awaiting::SuccessVerdict),
            FeedbackKind::GoalAchievedSignal
        );
        assert_eq!(classify_text("Stack red block on coaster.", Awaiting::Goal), FeedbackKind::GoalSpec);
    }

    #[test]
    fn ledger_grounds_by_position() {
        let mut l = PreconditionLedger::new();
        assert!(l.add("place_first_on_second", Literal::new(Atom::new("obj_clear", &["b"]), true)));
        assert!(!l.add("place_first_on_second", Literal::new(Atom::new("obj_clear", &["b"]), true)));
        let g = l.ground(&GroundedAction::new("place_first_on_second", &["red block", "coaster"]));
        assert_eq!(g, vec![Literal::new(Atom::new("obj_clear", &["coaster"]), true)]);
        assert!(l.ground(&GroundedAction::new("pick_up", &["red block"])).is_empty());
    }
}
