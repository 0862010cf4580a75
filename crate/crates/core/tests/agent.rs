use predlearn::agent::*;
use predlearn::dsl::PredicateSource;
use predlearn::oracle::{FeedbackOracle, VariantMode};
use predlearn::tasks::{generate_suite, training_tasks, SuiteFamily};
use predlearn::teacher::{build_teacher, FeedbackEvent, FeedbackKind, TeacherBackendConfig};
use predlearn::world::DomainId;

fn session(domain: DomainId, seed: u64) -> Session {
    let teacher = build_teacher(&TeacherBackendConfig::default()).unwrap();
    Session::new(domain, AgentConfig::default(), teacher, PredicateSource::Scripted, seed)
}

fn train(domain: DomainId, seed: u64) -> TrainingRun {
    let tasks = training_tasks(domain, 10, seed).unwrap();
    run_training(session(domain, seed), tasks, FeedbackOracle::new(domain, VariantMode::Canonical), seed).unwrap()
}

#[test]
fn training_is_deterministic() {
    let a = train(DomainId::StoreObjects, 7);
    let b = train(DomainId::StoreObjects, 7);
    assert_eq!(a.session.log().without_wall_time(), b.session.log().without_wall_time());
    assert_eq!(a.bundle.files(), b.bundle.files());
    assert_eq!(a.session.counters(), b.session.counters());
}

#[test]
fn saved_bundle_plans_like_the_original() {
    let run = train(DomainId::StoreObjects, 4);
    let dir = tempfile::tempdir().unwrap();
    run.bundle.save(dir.path()).unwrap();
    let loaded = Bundle::load(dir.path()).unwrap();
    assert_eq!(loaded.files(), run.bundle.files());
    let suite =
        generate_suite(DomainId::StoreObjects, SuiteFamily::Canonical, &run.bundle.manifest.training, 4).unwrap();
    let mut oracle = FeedbackOracle::new(DomainId::StoreObjects, VariantMode::Canonical);
    let mut teacher = build_teacher(&TeacherBackendConfig::default()).unwrap();
    for task in &suite.tasks {
        let text = oracle.goal_sentence(&task.goal);
        let x = run_test(&run.bundle, task, &text, teacher.as_mut(), &AgentConfig::default()).unwrap();
        let y = run_test(&loaded, task, &text, teacher.as_mut(), &AgentConfig::default()).unwrap();
        assert_eq!((x.success, x.plan_length), (y.success, y.plan_length));
    }
}

#[test]
fn empty_bundle_solves_nothing() {
    let bundle = Bundle::empty(DomainId::StoreObjects);
    let tasks = training_tasks(DomainId::StoreObjects, 3, 1).unwrap();
    let mut oracle = FeedbackOracle::new(DomainId::StoreObjects, VariantMode::Canonical);
    let mut teacher = build_teacher(&TeacherBackendConfig::default()).unwrap();
    for task in &tasks {
        let text = oracle.goal_sentence(&task.goal);
        let out = run_test(&bundle, task, &text, teacher.as_mut(), &AgentConfig::default()).unwrap();
        assert!(!out.success);
        assert!(out.failure.is_some());
    }
}

#[test]
fn free_text_feedback_drives_an_episode() {
    let domain = DomainId::StoreObjects;
    let task = training_tasks(domain, 1, 2).unwrap().remove(0);
    let mut oracle = FeedbackOracle::new(domain, VariantMode::Canonical);
    let mut s = session(domain, 2);
    let goal = oracle.goal_sentence(&task.goal);
    let started = s.begin_episode(&task.id, task.world().unwrap(), &goal).unwrap();
    assert!(matches!(started, StepOutcome::EpisodeStarted { .. }));
    assert!(s.goal().is_some());
    assert!(matches!(s.begin_episode(&task.id, task.world().unwrap(), &goal), Err(AgentError::EpisodeActive)));

    let mut confirmed = false;
    for _ in 0..30 {
        let Some(p) = s.propose().unwrap() else { break };
        assert_eq!(s.status(), SessionStatus::AwaitingFeedback);
        assert!(matches!(s.propose(), Err(AgentError::AwaitingFeedback)));
        let world = s.world().unwrap().clone();
        let text = match &p {
            Proposal::Action { action, .. } => oracle.verify_action(&world, action, s.step()).unwrap().text,
            Proposal::DeclareSuccess => oracle.verify_success(&world, &task.conditions, s.step()).text,
        };
        if s.feedback_text(&text).unwrap() == StepOutcome::GoalConfirmed {
            confirmed = true;
            break;
        }
        if s.status() == SessionStatus::AwaitingGoal {
            break;
        }
    }
    assert!(confirmed);
    assert_eq!(s.status(), SessionStatus::AwaitingGoal);
    assert!(s.counters().counted_feedback >= 1);
    assert!(matches!(s.feedback_text("yes"), Err(AgentError::NothingPending)));
}

#[test]
fn feedback_of_the_wrong_kind_is_refused() {
    let domain = DomainId::StoreObjects;
    let task = training_tasks(domain, 1, 5).unwrap().remove(0);
    let mut s = session(domain, 5);
    s.begin_episode(&task.id, task.world().unwrap(), "Put the red block on the coaster.").unwrap();
    let p = s.propose().unwrap().unwrap();
    let kind = match p {
        Proposal::Action { .. } => FeedbackKind::GoalAchievedSignal,
        Proposal::DeclareSuccess => FeedbackKind::FeasibleActionSignal,
    };
    let ev = FeedbackEvent { kind, text: "ok".into(), action: None, step: s.step() };
    assert!(matches!(s.respond(ev), Err(AgentError::UnexpectedFeedback(_))));
}

#[test]
fn bootstrapping_registers_source_predicates() {
    let source = train(DomainId::StoreObjects, 0);
    let mut s = session(DomainId::SetTable, 0);
    let added = s.bootstrap(&source.bundle.registry).unwrap();
    assert!(added.contains(&"obj_on_obj".to_string()));
    for name in &added {
        assert_eq!(s.registry().get(name).unwrap().source, PredicateSource::Bootstrap);
    }
    // Same-domain bootstrap: training asks for no new predicates.
    let mut same = session(DomainId::StoreObjects, 1);
    same.bootstrap(&source.bundle.registry).unwrap();
    let before = same.registry().positive_names();
    let tasks = training_tasks(DomainId::StoreObjects, 10, 1).unwrap();
    let run =
        run_training(same, tasks, FeedbackOracle::new(DomainId::StoreObjects, VariantMode::Canonical), 1).unwrap();
    assert_eq!(run.bundle.registry.positive_names(), before);
}

#[test]
fn log_mirrors_to_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.jsonl");
    let mut s = session(DomainId::CookMeal, 3);
    s.log_mut().attach(&path).unwrap();
    let tasks = training_tasks(DomainId::CookMeal, 2, 3).unwrap();
    let run = run_training(s, tasks, FeedbackOracle::new(DomainId::CookMeal, VariantMode::Canonical), 3).unwrap();
    let back = read_log(&path).unwrap();
    assert_eq!(back, run.session.log().events());
    assert!(back.iter().any(|e| e.kind == "predicate_registered"));
    assert!(back.iter().any(|e| e.kind == "operators_learned"));
}
