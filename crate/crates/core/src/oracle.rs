//! Simulated human teacher: verifies proposals against the simulator's
//! rules and phrases the verdicts from a committed template set.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::teacher::{FeedbackEvent, FeedbackKind};
use crate::world::{DomainId, Feasibility, GroundedAction, WorldError, WorldState};

const TEMPLATES_JSON: &str = include_str!("../data/feedback_templates.json");

#[derive(Debug, Clone, Deserialize)]
pub struct DomainTemplates {
    /// Rule check id to phrasings; the first is canonical.
    pub preconditions: BTreeMap<String, Vec<String>>,
    /// Goal condition kind to phrasings.
    pub unsatisfied: BTreeMap<String, Vec<String>>,
    /// Goal sentence shape to phrasings.
    pub goals: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct TemplateSet {
    pub feasible: String,
    pub achieved: String,
    pub infeasible: String,
    pub unsatisfied: String,
    pub action_phrases: BTreeMap<String, String>,
    pub domains: BTreeMap<DomainId, DomainTemplates>,
}

pub fn templates() -> &'static TemplateSet {
    static T: OnceLock<TemplateSet> = OnceLock::new();
    T.get_or_init(|| serde_json::from_str(TEMPLATES_JSON).expect("feedback_templates.json is valid"))
}

/// Fills `{key}` slots.
pub fn render(template: &str, slots: &BTreeMap<String, String>) -> String {
    let mut s = template.to_string();
    for (k, v) in slots {
        s = s.replace(&format!("{{{k}}}"), v);
    }
    s
}

fn action_slots(action: &GroundedAction) -> BTreeMap<String, String> {
    ["a", "b"].iter().zip(&action.args).map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// A condition the world must satisfy at the end of a task.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "args", rename_all = "snake_case")]
pub enum GoalCondition {
    OnObj(String, String),
    OnTable(String),
    Inside(String, String),
    HasWater(String),
}

impl GoalCondition {
    pub fn holds(&self, w: &WorldState) -> bool {
        match self {
            GoalCondition::OnObj(a, b) => w.rests_on(a, b),
            GoalCondition::OnTable(a) => w.on_table(a),
            GoalCondition::Inside(a, b) => w.inside(a) == Some(b.as_str()),
            GoalCondition::HasWater(a) => w.has_water(a),
        }
    }

    /// Key into the unsatisfied-goal templates.
    pub fn template_key(&self) -> &'static str {
        match self {
            GoalCondition::OnObj(..) => "on_obj",
            GoalCondition::OnTable(_) => "on_table",
            GoalCondition::Inside(..) => "inside",
            GoalCondition::HasWater(_) => "has_water",
        }
    }

    pub fn objects(&self) -> Vec<&str> {
        match self {
            GoalCondition::OnObj(a, b) | GoalCondition::Inside(a, b) => vec![a, b],
            GoalCondition::OnTable(a) | GoalCondition::HasWater(a) => vec![a],
        }
    }
}

/// A goal sentence: a template shape plus its slot values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalText {
    pub shape: String,
    pub slots: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum VariantMode {
    Canonical,
    Varied { seed: u64 },
}

pub struct FeedbackOracle {
    domain: DomainId,
    mode: VariantMode,
    rng: ChaCha8Rng,
}

impl FeedbackOracle {
    pub fn new(domain: DomainId, mode: VariantMode) -> Self {
        let seed = match mode {
            VariantMode::Canonical => 0,
            VariantMode::Varied { seed } => seed,
        };
        FeedbackOracle { domain, mode, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn domain(&self) -> DomainId {
        self.domain
    }

    fn domain_templates(&self) -> &'static DomainTemplates {
        &templates().domains[&self.domain]
    }

    fn pick<'t>(&mut self, options: &'t [String]) -> &'t str {
        match self.mode {
            VariantMode::Canonical => &options[0],
            VariantMode::Varied { .. } => &options[self.rng.gen_range(0..options.len())],
        }
    }

    pub fn goal_sentence(&mut self, goal: &GoalText) -> String {
        let options = &self.domain_templates().goals[&goal.shape];
        let t = self.pick(options).to_string();
        render(&t, &goal.slots)
    }

    pub fn specify_goal(&mut self, goal: &GoalText, step: u64) -> FeedbackEvent {
        FeedbackEvent { kind: FeedbackKind::GoalSpec, text: self.goal_sentence(goal), action: None, step }
    }

    pub fn verify_action(
        &mut self,
        world: &WorldState,
        action: &GroundedAction,
        step: u64,
    ) -> Result<FeedbackEvent, WorldError> {
        let slots = action_slots(action);
        let t = templates();
        let (kind, text) = match world.check_feasible(action)? {
            Feasibility::Ok => {
                let phrase = render(&t.action_phrases[&action.schema], &slots);
                (FeedbackKind::FeasibleActionSignal, t.feasible.replace("{action}", &phrase))
            }
            Feasibility::Violated(id) => {
                let options = &self.domain_templates().preconditions[&id.to_string()];
                let reason = render(self.pick(options), &slots);
                let call = action.to_string();
                (
                    FeedbackKind::InfeasibleActionExplanation,
                    t.infeasible.replace("{call}", &call).replace("{reason}", &reason),
                )
            }
        };
        Ok(FeedbackEvent { kind, text, action: Some(action.clone()), step })
    }

    /// Confirms success, or explains the first unmet condition.
    pub fn verify_success(&mut self, world: &WorldState, goal: &[GoalCondition], step: u64) -> FeedbackEvent {
        let t = templates();
        match goal.iter().find(|c| !c.holds(world)) {
            None => {
                FeedbackEvent { kind: FeedbackKind::GoalAchievedSignal, text: t.achieved.clone(), action: None, step }
            }
            Some(c) => {
                let slots: BTreeMap<String, String> =
                    ["a", "b"].iter().zip(c.objects()).map(|(k, v)| (k.to_string(), v.to_string())).collect();
                let options = &self.domain_templates().unsatisfied[c.template_key()];
                let reason = render(self.pick(options), &slots);
                FeedbackEvent {
                    kind: FeedbackKind::UnsatisfiedGoalExplanation,
                    text: t.unsatisfied.replace("{reason}", &reason),
                    action: None,
                    step,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{ground_truth_rules, ObjectSpec, SceneSpec};

    fn world() -> WorldState {
        let scene = SceneSpec {
            objects: vec![
                ObjectSpec::new("red block", "block"),
                ObjectSpec::new("blue block", "block"),
                ObjectSpec::new("coaster", "coaster"),
            ],
            stacked: vec![],
        };
        WorldState::reset(DomainId::StoreObjects, &scene, 0).unwrap()
    }

    #[test]
    fn every_rule_check_has_templates() {
        for d in DomainId::ALL {
            let dt = &templates().domains[&d];
            let ids: Vec<String> =
                ground_truth_rules(d).iter().flat_map(|r| r.checks.iter().map(|(id, _)| id.to_string())).collect();
            for id in &ids {
                assert!(!dt.preconditions[id].is_empty(), "{d} check {id}");
            }
            assert_eq!(dt.preconditions.len(), ids.len());
        }
    }

    #[test]
    fn feasible_confirmation_text() {
        let mut o = FeedbackOracle::new(DomainId::StoreObjects, VariantMode::Canonical);
        let e = o.verify_action(&world(), &GroundedAction::new("pick_up", &["red block"]), 1).unwrap();
        assert_eq!(e.kind, FeedbackKind::FeasibleActionSignal);
        assert_eq!(e.text, "you can go ahead and pick up red block");
    }

    #[test]
    fn infeasible_uses_canonical_template() {
        let mut o = FeedbackOracle::new(DomainId::StoreObjects, VariantMode::Canonical);
        let e = o.verify_action(&world(), &GroundedAction::new("pick_up", &["coaster"]), 1).unwrap();
        assert_eq!(
            e.text,
            "you can't execute pick_up(coaster) because coaster can not be grasped by the gripper as it is too wide"
        );
        let e = o.verify_action(&world(), &GroundedAction::new("place_on_table", &["red block"]), 2).unwrap();
        assert_eq!(
            e.text,
            "you can't execute place_on_table(red block) because object red block is not held by the gripper"
        );
    }

    #[test]
    fn success_and_unsatisfied() {
        let mut o = FeedbackOracle::new(DomainId::StoreObjects, VariantMode::Canonical);
        let w = world();
        let g = vec![
            GoalCondition::OnTable("red block".into()),
            GoalCondition::OnObj("red block".into(), "coaster".into()),
        ];
        let e = o.verify_success(&w, &g, 3);
        assert_eq!(e.kind, FeedbackKind::UnsatisfiedGoalExplanation);
        assert_eq!(e.text, "you haven't achieved the goal because object red block is not yet on coaster");
        let e = o.verify_success(&w, &g[..1], 4);
        assert_eq!(e.kind, FeedbackKind::GoalAchievedSignal);
    }

    #[test]
    fn varied_mode_is_deterministic_per_seed() {
        let w = world();
        let act = GroundedAction::new("pick_up", &["coaster"]);
        let run = |seed| {
            let mut o = FeedbackOracle::new(DomainId::StoreObjects, VariantMode::Varied { seed });
            (0..12).map(|i| o.verify_action(&w, &act, i).unwrap().text).collect::<Vec<_>>()
        };
        assert_eq!(run(2), run(2));
        let texts = run(2);
        let options = &templates().domains[&DomainId::StoreObjects].preconditions["3"];
        for t in &texts {
            assert!(options.iter().any(|o| t.ends_with(&o.replace("{a}", "coaster"))));
        }
        assert!(texts.iter().collect::<std::collections::BTreeSet<_>>().len() > 1);
    }
}
