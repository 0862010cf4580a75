use web_time::Instant;

use serde::{Deserialize, Serialize};

use super::{AgentConfig, AgentError, Bundle, BundleManifest, Proposal, Session, SessionStatus, StepOutcome};
use crate::oracle::FeedbackOracle;
use crate::pddl::{compile_problem, plan, schema_of, to_world_action};
use crate::tasks::{TaskSpec, TrainingManifest};
use crate::teacher::{TeacherError, TeacherModules};
use crate::world::Feasibility;

/// Drives a session through a task list with the feedback oracle playing
/// the teacher.
pub struct Curriculum {
    tasks: Vec<TaskSpec>,
    next: usize,
    current: Option<usize>,
    oracle: FeedbackOracle,
}

impl Curriculum {
    pub fn new(tasks: Vec<TaskSpec>, oracle: FeedbackOracle) -> Self {
        Curriculum { tasks, next: 0, current: None, oracle }
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    /// Hands out the next scene without involving the oracle, for sessions
    /// whose goals come from a person.
    pub fn take_next(&mut self) -> Option<&TaskSpec> {
        let i = self.next;
        let t = self.tasks.get(i)?;
        self.next += 1;
        self.current = Some(i);
        Some(t)
    }

    pub fn remaining(&self) -> usize {
        self.tasks.len() - self.next
    }

    pub fn current_task(&self) -> Option<&TaskSpec> {
        self.current.map(|i| &self.tasks[i])
    }

    /// One interaction: start the next episode, or propose and have the
    /// oracle answer.
    pub fn advance(&mut self, session: &mut Session) -> Result<StepOutcome, AgentError> {
        match session.status() {
            SessionStatus::Finished => Ok(StepOutcome::Finished),
            SessionStatus::AwaitingGoal => {
                if self.next >= self.tasks.len() {
                    session.finish();
                    return Ok(StepOutcome::Finished);
                }
                let i = self.next;
                self.next += 1;
                self.current = Some(i);
                let task = &self.tasks[i];
                let world = task.world()?;
                let text = self.oracle.goal_sentence(&task.goal);
                session.begin_episode(&task.id, world, &text)
            }
            SessionStatus::Running => match session.propose()? {
                Some(_) => self.answer(session),
                None if session.status() == SessionStatus::AwaitingGoal => Ok(StepOutcome::Stalled),
                None => Ok(StepOutcome::Aborted { reason: "proposal failed".to_string() }),
            },
            SessionStatus::AwaitingFeedback => self.answer(session),
        }
    }

    fn answer(&mut self, session: &mut Session) -> Result<StepOutcome, AgentError> {
        let world = session.world().ok_or(AgentError::NoEpisode)?;
        let step = session.step();
        let event = match session.pending().ok_or(AgentError::NothingPending)? {
            Proposal::Action { action, .. } => self.oracle.verify_action(world, action, step)?,
            Proposal::DeclareSuccess => {
                let task = self.current_task().ok_or(AgentError::NoEpisode)?;
                let conditions = task.conditions.clone();
                self.oracle.verify_success(world, &conditions, step)
            }
        };
        session.respond(event)
    }
}

pub struct TrainingRun {
    pub session: Session,
    pub bundle: Bundle,
    pub wall_seconds: f64,
}

/// Runs every task of the curriculum to completion.
pub fn run_training(
    mut session: Session,
    tasks: Vec<TaskSpec>,
    oracle: FeedbackOracle,
    seed: u64,
) -> Result<TrainingRun, AgentError> {
    let t0 = Instant::now();
    let training = TrainingManifest::from_tasks(&tasks);
    let mut curriculum = Curriculum::new(tasks, oracle);
    while curriculum.advance(&mut session)? != StepOutcome::Finished {}
    let bundle = session.bundle(BundleManifest { seed, training, ..Default::default() });
    Ok(TrainingRun { session, bundle, wall_seconds: t0.elapsed().as_secs_f64() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub task: String,
    pub success: bool,
    pub plan_length: Option<usize>,
    pub plan_seconds: f64,
    pub expansions: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Translates the goal, plans with the learned domain and executes the plan
/// open loop. Success means every ground-truth goal condition holds at the
/// end; an infeasible step fails the task.
pub fn run_test(
    bundle: &Bundle,
    task: &TaskSpec,
    goal_text: &str,
    teacher: &mut dyn TeacherModules,
    config: &AgentConfig,
) -> Result<TestOutcome, AgentError> {
    let mut out = TestOutcome {
        task: task.id.clone(),
        success: false,
        plan_length: None,
        plan_seconds: 0.0,
        expansions: 0,
        failure: None,
    };
    let fail = |mut out: TestOutcome, why: String| {
        out.failure = Some(why);
        Ok(out)
    };
    let mut world = task.world()?;
    let objects = world.object_names();
    let goal = match teacher.translate_goal(goal_text, &bundle.registry, &objects) {
        Ok(g) => g,
        Err(e @ TeacherError::Transport(_)) => return Err(e.into()),
        Err(e) => return fail(out, format!("goal translation: {e}")),
    };
    let state = match bundle.registry.parse_state(&world.perceive()) {
        Ok(s) => s,
        Err(e) => return fail(out, format!("perception: {e}")),
    };
    let (problem, names) = compile_problem("test", &bundle.domain.name, &objects, &state, &goal);
    let t0 = Instant::now();
    let result = plan(&bundle.domain, &problem, config.heuristic, config.max_expansions);
    out.plan_seconds = t0.elapsed().as_secs_f64();
    let result = match result {
        Ok(r) => r,
        Err(e) => return fail(out, format!("planning: {e}")),
    };
    out.plan_length = Some(result.steps.len());
    out.expansions = result.expansions;
    for step in &result.steps {
        let Some(arity) = task.domain.arity(schema_of(&step.schema)) else {
            return fail(out, format!("unknown action {}", step.schema));
        };
        let action = to_world_action(step, arity, &names);
        match world.check_feasible(&action) {
            Ok(Feasibility::Ok) => world = world.execute(&action)?,
            Ok(Feasibility::Violated(id)) => return fail(out, format!("{action} violates precondition {id}")),
            Err(e) => return fail(out, format!("{action}: {e}")),
        }
    }
    out.success = task.conditions.iter().all(|c| c.holds(&world));
    if !out.success {
        out.failure = Some("goal not achieved after executing the plan".to_string());
    }
    Ok(out)
}
