//! Ground-truth feasibility rules, checked in the domain's fixed numbering.

use serde::{Deserialize, Serialize};

use super::{pools, DomainId, GroundedAction, WorldState};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthRule {
    pub schema: String,
    /// `(check id, violation template id)` in evaluation order.
    pub checks: Vec<(u8, String)>,
}

fn rule(schema: &str, checks: &[u8]) -> GroundTruthRule {
    GroundTruthRule {
        schema: schema.to_string(),
        checks: checks.iter().map(|&c| (c, format!("precondition_{c}"))).collect(),
    }
}

pub fn ground_truth_rules(domain: DomainId) -> Vec<GroundTruthRule> {
    match domain {
        DomainId::StoreObjects => {
            vec![rule("pick_up", &[1, 2, 3]), rule("place_on_table", &[4]), rule("place_first_on_second", &[5, 6])]
        }
        DomainId::SetTable => vec![
            rule("pick_up", &[1, 2, 3]),
            rule("place_on_table", &[4]),
            rule("place_first_on_second", &[5, 6]),
            rule("push_plate_on_object", &[7, 8, 9, 10, 11]),
        ],
        DomainId::CookMeal => vec![
            rule("pick_up", &[1, 2, 3]),
            rule("place_on_table", &[4]),
            rule("place_first_in_second", &[5, 6, 7, 8]),
            rule("get_water_from_faucet", &[9, 10, 11]),
            rule("pour_water_from_first_to_second", &[12, 13, 14]),
        ],
    }
}

/// True when check `id` is violated for an already validated action.
fn violated(w: &WorldState, id: u8, action: &GroundedAction) -> bool {
    let a = action.args[0].as_str();
    let b = action.args.get(1).map(String::as_str).unwrap_or("");
    let obj = |n: &str| w.object(n).expect("validated action");
    let occupied = w.gripper_holding.is_some();
    let p = pools();
    match (w.domain_id, id) {
        (_, 1) => occupied,
        (DomainId::CookMeal, 2) => w.inside(a).is_some(),
        (_, 2) => !w.is_clear(a),
        (_, 3) => !obj(a).graspable,
        (_, 4) | (_, 5) => !w.is_held(a),
        (DomainId::CookMeal, 6) => !obj(b).is_container,
        (_, 6) => !w.is_clear(b),
        (DomainId::CookMeal, 7) => !w.is_food(a),
        (_, 7) => obj(a).category != "plate",
        (DomainId::CookMeal, 8) => obj(b).size[0] < p.large_min_width,
        (_, 8) => occupied,
        (DomainId::CookMeal, 9) => !w.is_held(a),
        (_, 9) => !w.is_clear(a),
        (DomainId::CookMeal, 10) => !obj(a).is_container,
        (_, 10) => !w.is_clear(b),
        (DomainId::CookMeal, 11) => obj(a).has_water,
        (_, 11) => obj(b).size[1] > p.thin_max_height,
        (_, 12) => !w.is_held(a),
        (_, 13) => !obj(a).has_water,
        (_, 14) => !obj(b).is_container,
        _ => false,
    }
}

pub(super) fn first_violation(w: &WorldState, action: &GroundedAction) -> Option<u8> {
    let rules = ground_truth_rules(w.domain_id);
    let r = rules.iter().find(|r| r.schema == action.schema)?;
    r.checks.iter().map(|(id, _)| *id).find(|&id| violated(w, id, action))
}
