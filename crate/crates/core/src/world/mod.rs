//! Deterministic 2D tabletop simulator.
//!
//! Coordinates are workspace units: `x` runs along the table, `y` is
//! vertical with the table surface at `table_height`. Every object rests
//! either on the table, on exactly one other object, inside a container, or
//! in the gripper.

mod perception;
mod pool;
mod rules;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use perception::{PerceivedObject, PerceptionError, PerceptionSnapshot};
pub use pool::{pools, CategorySpec, ObjectPools};
pub use rules::{ground_truth_rules, GroundTruthRule};

const EPS: f64 = 1e-9;
const TABLE_MARGIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainId {
    StoreObjects,
    SetTable,
    CookMeal,
}

impl DomainId {
    pub const ALL: [DomainId; 3] = [DomainId::StoreObjects, DomainId::SetTable, DomainId::CookMeal];

    pub fn as_str(self) -> &'static str {
        match self {
            DomainId::StoreObjects => "store_objects",
            DomainId::SetTable => "set_table",
            DomainId::CookMeal => "cook_meal",
        }
    }

    /// Primitive action schemas with their arities.
    pub fn schemas(self) -> &'static [(&'static str, usize)] {
        match self {
            DomainId::StoreObjects => &[("pick_up", 1), ("place_on_table", 1), ("place_first_on_second", 2)],
            DomainId::SetTable => {
                &[("pick_up", 1), ("place_on_table", 1), ("place_first_on_second", 2), ("push_plate_on_object", 2)]
            }
            DomainId::CookMeal => &[
                ("pick_up", 1),
                ("place_on_table", 1),
                ("place_first_in_second", 2),
                ("get_water_from_faucet", 1),
                ("pour_water_from_first_to_second", 2),
            ],
        }
    }

    pub fn arity(self, schema: &str) -> Option<usize> {
        self.schemas().iter().find(|(s, _)| *s == schema).map(|(_, n)| *n)
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DomainId {
    type Err = WorldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "store_objects" | "storeobjects" => Ok(DomainId::StoreObjects),
            "set_table" | "settable" => Ok(DomainId::SetTable),
            "cook_meal" | "cookmeal" => Ok(DomainId::CookMeal),
            _ => Err(WorldError::UnknownDomain(s.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("category `{category}` is not in the {domain} object pool")]
    UnknownCategory { domain: DomainId, category: String },
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("duplicate object name `{0}`")]
    DuplicateObject(String),
    #[error("action `{0}` does not exist in this domain")]
    UnknownAction(String),
    #[error("{schema} takes {expected} arguments, got {got}")]
    Arity { schema: String, expected: usize, got: usize },
    #[error("action arguments must be distinct: {0}")]
    RepeatedArgument(String),
    #[error("invalid scene: {0}")]
    BadScene(String),
    #[error("no free table space for `{0}`")]
    NoSpace(String),
    #[error("executed infeasible action {action} (precondition {check} violated)")]
    Infeasible { action: String, check: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimObject {
    pub name: String,
    pub category: String,
    pub center: [f64; 2],
    pub size: [f64; 2],
    pub graspable: bool,
    pub movable: bool,
    pub is_container: bool,
    pub has_water: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inside_of: Option<String>,
}

impl SimObject {
    pub fn bottom(&self) -> f64 {
        self.center[1] - self.size[1] / 2.0
    }

    pub fn top(&self) -> f64 {
        self.center[1] + self.size[1] / 2.0
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.center[0] - self.size[0] / 2.0, self.center[0] + self.size[0] / 2.0)
    }

    pub fn x_overlap(&self, other: &SimObject) -> f64 {
        let (a0, a1) = self.x_range();
        let (b0, b1) = other.x_range();
        (a1.min(b1) - a0.max(b0)).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundedAction {
    pub schema: String,
    pub args: Vec<String>,
}

impl GroundedAction {
    pub fn new(schema: impl Into<String>, args: &[&str]) -> Self {
        GroundedAction { schema: schema.into(), args: args.iter().map(|s| s.to_string()).collect() }
    }
}

impl fmt::Display for GroundedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.schema, self.args.join(", "))
    }
}

impl FromStr for GroundedAction {
    type Err = WorldError;

    /// Parses `schema(arg, arg)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let open = s.find('(').ok_or_else(|| WorldError::UnknownAction(s.to_string()))?;
        if !s.ends_with(')') {
            return Err(WorldError::UnknownAction(s.to_string()));
        }
        let schema = s[..open].trim().to_string();
        let inner = &s[open + 1..s.len() - 1];
        let args = inner.split(',').map(|a| a.trim().to_string()).filter(|a| !a.is_empty()).collect();
        Ok(GroundedAction { schema, args })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "check")]
pub enum Feasibility {
    Ok,
    Violated(u8),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub category: String,
}

impl ObjectSpec {
    pub fn new(name: &str, category: &str) -> Self {
        ObjectSpec { name: name.to_string(), category: category.to_string() }
    }
}

/// Objects of a task plus the initial stacking relations (`(a, b)`: a rests on b).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneSpec {
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub stacked: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub domain_id: DomainId,
    pub objects: Vec<SimObject>,
    #[serde(default)]
    pub gripper_holding: Option<String>,
    pub table_height: f64,
}

impl WorldState {
    /// Builds the initial world for a scene. Table-level objects are laid out
    /// left to right in a seeded order with seeded gaps; stacked objects are
    /// centred on their supporter.
    pub fn reset(domain: DomainId, scene: &SceneSpec, seed: u64) -> Result<WorldState, WorldError> {
        let p = pools();
        let mut objects = Vec::with_capacity(scene.objects.len());
        let mut seen = BTreeSet::new();
        for spec in &scene.objects {
            if !seen.insert(spec.name.as_str()) {
                return Err(WorldError::DuplicateObject(spec.name.clone()));
            }
            let cat = p
                .category(domain, &spec.category)
                .ok_or_else(|| WorldError::UnknownCategory { domain, category: spec.category.clone() })?;
            objects.push(SimObject {
                name: spec.name.clone(),
                category: spec.category.clone(),
                center: [0.0, 0.0],
                size: cat.size,
                graspable: p.graspable(cat),
                movable: cat.movable,
                is_container: cat.container,
                has_water: false,
                inside_of: None,
            });
        }
        let index = |name: &str| objects.iter().position(|o: &SimObject| o.name == name);
        let mut supporter: Vec<Option<usize>> = vec![None; objects.len()];
        let mut supported = BTreeSet::new();
        for (a, b) in &scene.stacked {
            let ia = index(a).ok_or_else(|| WorldError::UnknownObject(a.clone()))?;
            let ib = index(b).ok_or_else(|| WorldError::UnknownObject(b.clone()))?;
            if ia == ib || supporter[ia].is_some() {
                return Err(WorldError::BadScene(format!("{a} cannot rest on {b}")));
            }
            if !supported.insert(ib) {
                return Err(WorldError::BadScene(format!("{b} already supports an object")));
            }
            supporter[ia] = Some(ib);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table_level: Vec<usize> = (0..objects.len()).filter(|&i| supporter[i].is_none()).collect();
        table_level.shuffle(&mut rng);
        let mut cursor = 2.0;
        for &i in &table_level {
            let w = objects[i].size[0];
            let h = objects[i].size[1];
            objects[i].center = [cursor + w / 2.0, p.table_height + h / 2.0];
            cursor += w + rng.gen_range(100..250) as f64 / 100.0;
        }
        if cursor > p.table_width {
            return Err(WorldError::NoSpace("scene".into()));
        }

        let mut placed: Vec<bool> = supporter.iter().map(|s| s.is_none()).collect();
        loop {
            let mut progressed = false;
            for i in 0..objects.len() {
                if let Some(s) = supporter[i] {
                    if !placed[i] && placed[s] {
                        let top = objects[s].top();
                        let x = objects[s].center[0];
                        objects[i].center = [x, top + objects[i].size[1] / 2.0];
                        placed[i] = true;
                        progressed = true;
                    }
                }
            }
            if placed.iter().all(|&p| p) {
                break;
            }
            if !progressed {
                return Err(WorldError::BadScene("cyclic stacking".into()));
            }
        }

        Ok(WorldState { domain_id: domain, objects, gripper_holding: None, table_height: p.table_height })
    }

    pub fn object(&self, name: &str) -> Option<&SimObject> {
        self.objects.iter().find(|o| o.name == name)
    }

    fn object_mut(&mut self, name: &str) -> Option<&mut SimObject> {
        self.objects.iter_mut().find(|o| o.name == name)
    }

    fn get(&self, name: &str) -> Result<&SimObject, WorldError> {
        self.object(name).ok_or_else(|| WorldError::UnknownObject(name.to_string()))
    }

    pub fn object_names(&self) -> Vec<String> {
        self.objects.iter().map(|o| o.name.clone()).collect()
    }

    pub fn is_held(&self, name: &str) -> bool {
        self.gripper_holding.as_deref() == Some(name)
    }

    /// Ground-truth support: `a` rests on `b`.
    pub fn rests_on(&self, a: &str, b: &str) -> bool {
        if a == b || self.is_held(a) {
            return false;
        }
        let (Some(oa), Some(ob)) = (self.object(a), self.object(b)) else {
            return false;
        };
        let p = pools();
        (oa.bottom() - ob.top()).abs() <= p.support_tolerance + EPS
            && oa.x_overlap(ob) + EPS >= p.support_overlap * oa.size[0]
    }

    pub fn on_table(&self, a: &str) -> bool {
        if self.is_held(a) {
            return false;
        }
        self.object(a)
            .map(|o| (o.bottom() - self.table_height).abs() <= pools().support_tolerance + EPS)
            .unwrap_or(false)
    }

    /// Nothing rests on `a`.
    pub fn is_clear(&self, a: &str) -> bool {
        !self.objects.iter().any(|o| self.rests_on(&o.name, a))
    }

    pub fn is_food(&self, a: &str) -> bool {
        self.object(a).and_then(|o| pools().category(self.domain_id, &o.category)).map(|c| c.food).unwrap_or(false)
    }

    pub fn has_water(&self, a: &str) -> bool {
        self.object(a).map(|o| o.has_water).unwrap_or(false)
    }

    pub fn inside(&self, a: &str) -> Option<&str> {
        self.object(a).and_then(|o| o.inside_of.as_deref())
    }

    /// Checks that an action names a known schema with the right number of
    /// distinct, existing arguments.
    pub fn validate_action(&self, action: &GroundedAction) -> Result<(), WorldError> {
        let arity =
            self.domain_id.arity(&action.schema).ok_or_else(|| WorldError::UnknownAction(action.schema.clone()))?;
        if action.args.len() != arity {
            return Err(WorldError::Arity { schema: action.schema.clone(), expected: arity, got: action.args.len() });
        }
        for a in &action.args {
            self.get(a)?;
        }
        if arity == 2 && action.args[0] == action.args[1] {
            return Err(WorldError::RepeatedArgument(action.to_string()));
        }
        Ok(())
    }

    /// First violated precondition in the domain's fixed check order.
    pub fn check_feasible(&self, action: &GroundedAction) -> Result<Feasibility, WorldError> {
        self.validate_action(action)?;
        Ok(rules::first_violation(self, action).map(Feasibility::Violated).unwrap_or(Feasibility::Ok))
    }

    pub fn execute(&self, action: &GroundedAction) -> Result<WorldState, WorldError> {
        if let Feasibility::Violated(check) = self.check_feasible(action)? {
            return Err(WorldError::Infeasible { action: action.to_string(), check });
        }
        let p = pools();
        let mut next = self.clone();
        let a = action.args[0].as_str();
        match action.schema.as_str() {
            "pick_up" => {
                next.gripper_holding = Some(a.to_string());
                let o = next.object_mut(a).expect("validated");
                o.center[1] = p.gripper_height;
            }
            "place_on_table" => {
                let width = self.get(a)?.size[0];
                let x = self.free_table_slot(width).ok_or_else(|| WorldError::NoSpace(a.to_string()))?;
                next.gripper_holding = None;
                let table = next.table_height;
                let o = next.object_mut(a).expect("validated");
                o.center = [x, table + o.size[1] / 2.0];
            }
            "place_first_on_second" | "push_plate_on_object" => {
                let b = self.get(&action.args[1])?;
                let (bx, btop) = (b.center[0], b.top());
                if action.schema == "place_first_on_second" {
                    next.gripper_holding = None;
                }
                let o = next.object_mut(a).expect("validated");
                o.center = [bx, btop + o.size[1] / 2.0];
            }
            "place_first_in_second" => {
                let b = self.get(&action.args[1])?;
                let (bx, bbottom) = (b.center[0], b.bottom());
                next.gripper_holding = None;
                let o = next.object_mut(a).expect("validated");
                o.center = [bx, bbottom + p.nest_offset + o.size[1] / 2.0];
                o.inside_of = Some(action.args[1].clone());
            }
            "get_water_from_faucet" => {
                next.object_mut(a).expect("validated").has_water = true;
            }
            "pour_water_from_first_to_second" => {
                next.object_mut(a).expect("validated").has_water = false;
                next.object_mut(&action.args[1]).expect("validated").has_water = true;
            }
            other => return Err(WorldError::UnknownAction(other.to_string())),
        }
        Ok(next)
    }

    /// Centre x of the leftmost table gap that fits `width` with a unit margin
    /// on both sides.
    fn free_table_slot(&self, width: f64) -> Option<f64> {
        let mut occupied: Vec<(f64, f64)> = self
            .objects
            .iter()
            .filter(|o| self.on_table(&o.name) && o.inside_of.is_none())
            .map(|o| o.x_range())
            .collect();
        occupied.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = TABLE_MARGIN;
        for (lo, hi) in occupied {
            if left + width + TABLE_MARGIN <= lo + EPS {
                break;
            }
            left = left.max(hi + TABLE_MARGIN);
        }
        (left + width + TABLE_MARGIN <= pools().table_width).then_some(left + width / 2.0)
    }

    pub fn perceive(&self) -> PerceptionSnapshot {
        PerceptionSnapshot::from_world(self)
    }

    /// Structural invariants every reachable world satisfies.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut names = BTreeSet::new();
        for o in &self.objects {
            if !names.insert(o.name.as_str()) {
                return Err(format!("duplicate name {}", o.name));
            }
            if o.size[0] <= 0.0 || o.size[1] <= 0.0 {
                return Err(format!("non-positive size for {}", o.name));
            }
            if o.has_water && !o.is_container {
                return Err(format!("{} holds water but is not a container", o.name));
            }
            if let Some(c) = &o.inside_of {
                match self.object(c) {
                    Some(co) if co.is_container => {}
                    _ => return Err(format!("{} is inside non-container {c}", o.name)),
                }
                if self.is_held(&o.name) {
                    return Err(format!("{} is both held and nested", o.name));
                }
            }
        }
        if let Some(h) = &self.gripper_holding {
            if self.object(h).is_none() {
                return Err(format!("gripper holds unknown {h}"));
            }
        }
        let free: Vec<&SimObject> =
            self.objects.iter().filter(|o| !self.is_held(&o.name) && o.inside_of.is_none()).collect();
        for (i, a) in free.iter().enumerate() {
            for b in &free[i + 1..] {
                if (a.bottom() - b.bottom()).abs() <= EPS && a.x_overlap(b) > 1e-6 {
                    return Err(format!("{} and {} overlap at the same level", a.name, b.name));
                }
            }
            let supported = self.on_table(&a.name) || free.iter().any(|b| self.rests_on(&a.name, &b.name));
            if !supported {
                return Err(format!("{} floats", a.name));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn scene(objs: &[(&str, &str)], stacked: &[(&str, &str)]) -> SceneSpec {
        SceneSpec {
            objects: objs.iter().map(|(n, c)| ObjectSpec::new(n, c)).collect(),
            stacked: stacked.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        }
    }

    fn store() -> WorldState {
        WorldState::reset(
            DomainId::StoreObjects,
            &scene(&[("red block", "block"), ("blue block", "block"), ("coaster", "coaster")], &[]),
            1,
        )
        .unwrap()
    }

    #[test]
    fn reset_places_everything_on_the_table() {
        let w = store();
        assert_eq!(w.objects.len(), 3);
        assert!(w.gripper_holding.is_none());
        for o in &w.objects {
            assert!(w.on_table(&o.name), "{} not on table", o.name);
        }
        w.check_invariants().unwrap();
    }

    #[test]
    fn reset_is_deterministic() {
        let a = serde_json::to_string(&store()).unwrap();
        let b = serde_json::to_string(&store()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cook_meal_starts_dry() {
        let w = WorldState::reset(
            DomainId::CookMeal,
            &scene(&[("pot", "pot"), ("cup", "cup"), ("sausage", "sausage"), ("faucet", "faucet")], &[]),
            7,
        )
        .unwrap();
        assert!(!w.has_water("pot"));
        assert!(!w.has_water("cup"));
    }

    #[test]
    fn reset_rejects_unknown_category_and_duplicates() {
        let err = WorldState::reset(DomainId::StoreObjects, &scene(&[("x", "spaceship")], &[]), 0);
        assert!(matches!(err, Err(WorldError::UnknownCategory { .. })));
        let err = WorldState::reset(DomainId::StoreObjects, &scene(&[("x", "block"), ("x", "block")], &[]), 0);
        assert!(matches!(err, Err(WorldError::DuplicateObject(_))));
        assert!("kitchen".parse::<DomainId>().is_err());
    }

    #[test]
    fn stacked_scene() {
        let w = WorldState::reset(
            DomainId::StoreObjects,
            &scene(&[("red block", "block"), ("blue block", "block")], &[("red block", "blue block")]),
            3,
        )
        .unwrap();
        assert!(w.rests_on("red block", "blue block"));
        assert!(!w.is_clear("blue block"));
        assert!(!w.on_table("red block"));
        w.check_invariants().unwrap();
    }

    #[test]
    fn feasibility_examples() {
        let w = store();
        assert_eq!(w.check_feasible(&GroundedAction::new("pick_up", &["coaster"])).unwrap(), Feasibility::Violated(3));
        assert_eq!(w.check_feasible(&GroundedAction::new("pick_up", &["red block"])).unwrap(), Feasibility::Ok);
        let cm = WorldState::reset(DomainId::CookMeal, &scene(&[("sausage", "sausage"), ("faucet", "faucet")], &[]), 0)
            .unwrap();
        let held = cm.execute(&GroundedAction::new("pick_up", &["sausage"])).unwrap();
        assert_eq!(
            held.check_feasible(&GroundedAction::new("place_first_in_second", &["sausage", "faucet"])).unwrap(),
            Feasibility::Violated(6)
        );
    }

    #[test]
    fn malformed_actions_are_errors() {
        let w = store();
        assert!(w.check_feasible(&GroundedAction::new("fly", &["coaster"])).is_err());
        assert!(w.check_feasible(&GroundedAction::new("pick_up", &["ghost"])).is_err());
        assert!(w.check_feasible(&GroundedAction::new("pick_up", &["coaster", "red block"])).is_err());
        assert!(w.check_feasible(&GroundedAction::new("place_first_on_second", &["coaster", "coaster"])).is_err());
    }

    #[test]
    fn pick_raises_and_place_restores_up_to_x() {
        let w = store();
        let held = w.execute(&GroundedAction::new("pick_up", &["red block"])).unwrap();
        assert_eq!(held.gripper_holding.as_deref(), Some("red block"));
        assert_eq!(held.object("red block").unwrap().center[1], pools().gripper_height);
        held.check_invariants().unwrap();
        let back = held.execute(&GroundedAction::new("place_on_table", &["red block"])).unwrap();
        back.check_invariants().unwrap();
        let mut expected = w.clone();
        let x = back.object("red block").unwrap().center[0];
        expected.object_mut("red block").unwrap().center[0] = x;
        assert_eq!(back, expected);
    }

    #[test]
    fn executing_infeasible_action_is_an_error() {
        let w = store();
        let err = w.execute(&GroundedAction::new("place_on_table", &["red block"])).unwrap_err();
        assert_eq!(err, WorldError::Infeasible { action: "place_on_table(red block)".into(), check: 4 });
    }

    #[test]
    fn water_actions() {
        let w = WorldState::reset(
            DomainId::CookMeal,
            &scene(&[("pot", "pot"), ("cup", "cup"), ("faucet", "faucet")], &[]),
            2,
        )
        .unwrap();
        let w = w.execute(&GroundedAction::new("pick_up", &["cup"])).unwrap();
        let w = w.execute(&GroundedAction::new("get_water_from_faucet", &["cup"])).unwrap();
        assert!(w.has_water("cup"));
        let w = w.execute(&GroundedAction::new("pour_water_from_first_to_second", &["cup", "pot"])).unwrap();
        assert!(w.has_water("pot") && !w.has_water("cup"));
        w.check_invariants().unwrap();
    }

    #[test]
    fn nested_food_is_not_on_table() {
        let w =
            WorldState::reset(DomainId::CookMeal, &scene(&[("pot", "pot"), ("sausage", "sausage")], &[]), 2).unwrap();
        let w = w.execute(&GroundedAction::new("pick_up", &["sausage"])).unwrap();
        let w = w.execute(&GroundedAction::new("place_first_in_second", &["sausage", "pot"])).unwrap();
        assert_eq!(w.inside("sausage"), Some("pot"));
        assert!(!w.on_table("sausage"));
        assert!(w.is_clear("pot"));
        w.check_invariants().unwrap();
        assert_eq!(w.check_feasible(&GroundedAction::new("pick_up", &["sausage"])).unwrap(), Feasibility::Violated(2));
    }

    #[test]
    fn action_parse_display() {
        let a: GroundedAction = "place_first_on_second(red block, coaster)".parse().unwrap();
        assert_eq!(a.args, vec!["red block", "coaster"]);
        assert_eq!(a.to_string(), "place_first_on_second(red block, coaster)");
    }
}
