//! Browser demo: train a domain, inspect a scene through learned predicates,
//! and plan with learned operators.

use predlearn::agent::{run_training, AgentConfig, Session};
use predlearn::dsl::{PredicateSource, Registry};
use predlearn::oracle::{FeedbackOracle, VariantMode};
use predlearn::pddl::{
    compile_problem, parse_domain, parse_problem, plan, print_domain, print_problem, validate, Heuristic,
};
use predlearn::tasks::training_tasks;
use predlearn::teacher::{build_teacher, TeacherBackendConfig};
use predlearn::world::DomainId;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn domain_id(name: &str) -> Result<DomainId, String> {
    name.parse().map_err(|e: predlearn::world::WorldError| e.to_string())
}

/// Trains with the scripted teacher and returns the learned predicates,
/// the PDDL domain and the interaction counts as JSON.
pub fn train_json(domain: &str, seed: u64) -> Result<String, String> {
    let domain = domain_id(domain)?;
    let teacher = build_teacher(&TeacherBackendConfig::default()).map_err(|e| e.to_string())?;
    let session = Session::new(domain, AgentConfig::default(), teacher, PredicateSource::Scripted, seed);
    let tasks = training_tasks(domain, 10, seed).map_err(|e| e.to_string())?;
    let run = run_training(session, tasks, FeedbackOracle::new(domain, VariantMode::Canonical), seed)
        .map_err(|e| e.to_string())?;
    let predicates: Vec<_> = run
        .bundle
        .registry
        .positives()
        .map(|p| json!({"name": p.name, "params": p.params, "description": p.description, "source": p.source_text()}))
        .collect();
    Ok(json!({
        "predicates": predicates,
        "program": run.bundle.registry.to_pscript(),
        "domain": print_domain(&run.bundle.domain),
        "counts": run.session.counters().as_map(),
        "episodes": run.session.episode(),
    })
    .to_string())
}

/// Lays out training scene `index` of `seed`, evaluates `program` on it and
/// compiles a PDDL problem whose goal is the scene's goal sentence.
pub fn scene_json(domain: &str, seed: u64, index: usize, program: &str) -> Result<String, String> {
    let domain = domain_id(domain)?;
    let tasks = training_tasks(domain, index + 1, seed).map_err(|e| e.to_string())?;
    let task = &tasks[index];
    let world = task.world().map_err(|e| e.to_string())?;
    let goal_text = FeedbackOracle::new(domain, VariantMode::Canonical).goal_sentence(&task.goal);
    let registry = if program.trim().is_empty() {
        Registry::new()
    } else {
        Registry::from_pscript(program).map_err(|e| e.to_string())?
    };
    let state = registry.parse_state(&world.perceive()).map_err(|e| e.to_string())?;
    let objects = world.object_names();
    let mut teacher = build_teacher(&TeacherBackendConfig::default()).map_err(|e| e.to_string())?;
    let (goal, note) = match teacher.translate_goal(&goal_text, &registry, &objects) {
        Ok(g) => (g, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let (problem, _) = compile_problem("scene", domain.as_str(), &objects, &state, &goal);
    let holds: Vec<String> =
        state.0.iter().filter(|a| !a.predicate.starts_with("neg_")).map(|a| a.to_string()).collect();
    Ok(json!({
        "world": world,
        "goal_text": goal_text,
        "holds": holds,
        "problem": print_problem(&problem),
        "goal_note": note,
    })
    .to_string())
}

/// Plans with A* and the LM-cut heuristic and validates the result.
pub fn plan_json(domain: &str, problem: &str) -> Result<String, String> {
    let d = parse_domain(domain).map_err(|e| format!("domain: {e}"))?;
    let p = parse_problem(problem).map_err(|e| format!("problem: {e}"))?;
    let r = plan(&d, &p, Heuristic::LmCut, 200_000).map_err(|e| e.to_string())?;
    validate(&d, &p, &r.steps).map_err(|e| e.to_string())?;
    let steps: Vec<String> = r.steps.iter().map(|s| format!("({} {})", s.schema, s.args.join(" "))).collect();
    Ok(json!({"steps": steps, "expansions": r.expansions}).to_string())
}

#[wasm_bindgen]
pub fn train(domain: &str, seed: u32) -> Result<String, JsError> {
    train_json(domain, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn scene(domain: &str, seed: u32, index: u32, program: &str) -> Result<String, JsError> {
    scene_json(domain, seed as u64, index as usize, program).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = planProblem)]
pub fn plan_problem(domain: &str, problem: &str) -> Result<String, JsError> {
    plan_json(domain, problem).map_err(|e| JsError::new(&e))
}
