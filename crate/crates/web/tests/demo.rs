use predlearn_web::{plan_json, scene_json, train_json};
use serde_json::Value;

#[test]
fn train_scene_plan_round() {
    let trained: Value = serde_json::from_str(&train_json("store_objects", 0).unwrap()).unwrap();
    let names: Vec<&str> =
        trained["predicates"].as_array().unwrap().iter().map(|p| p["name"].as_str().unwrap()).collect();
    for n in ["obj_on_obj", "obj_on_table", "obj_graspable", "obj_clear", "gripper_empty"] {
        assert!(names.contains(&n), "{n} missing from {names:?}");
    }
    let program = trained["program"].as_str().unwrap();
    let domain = trained["domain"].as_str().unwrap();

    let sc: Value = serde_json::from_str(&scene_json("store_objects", 0, 2, program).unwrap()).unwrap();
    assert!(sc["goal_note"].is_null(), "{}", sc["goal_note"]);
    assert!(!sc["holds"].as_array().unwrap().is_empty());
    let problem = sc["problem"].as_str().unwrap();

    let planned: Value = serde_json::from_str(&plan_json(domain, problem).unwrap()).unwrap();
    assert!(!planned["steps"].as_array().unwrap().is_empty());
}

#[test]
fn scenes_without_predicates_have_no_goal() {
    let sc: Value = serde_json::from_str(&scene_json("cook_meal", 1, 0, "").unwrap()).unwrap();
    assert!(sc["holds"].as_array().unwrap().is_empty());
    assert!(sc["goal_note"].is_string());
}

#[test]
fn bad_inputs_are_errors() {
    assert!(train_json("garden", 0).is_err());
    assert!(scene_json("store_objects", 0, 0, "pred broken(").is_err());
    assert!(plan_json("(define", "(define").is_err());
}
