//! Task families per domain: simple training tasks and the four test suites.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{GoalCondition, GoalText};
use crate::world::{DomainId, ObjectSpec, SceneSpec, WorldError, WorldState};

pub const SUITE_SIZE: usize = 10;
const COLORS: &[&str] = &["red", "blue", "green", "yellow", "purple", "orange", "white", "black"];
const MAX_ATTEMPTS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteFamily {
    Canonical,
    MoreObjects,
    NovelGoals,
    Combined,
}

impl SuiteFamily {
    pub const ALL: [SuiteFamily; 4] =
        [SuiteFamily::Canonical, SuiteFamily::MoreObjects, SuiteFamily::NovelGoals, SuiteFamily::Combined];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteFamily::Canonical => "canonical",
            SuiteFamily::MoreObjects => "more_objects",
            SuiteFamily::NovelGoals => "novel_goals",
            SuiteFamily::Combined => "combined",
        }
    }

    fn unseen_objects(self) -> bool {
        matches!(self, SuiteFamily::MoreObjects | SuiteFamily::Combined)
    }

    fn complex(self) -> bool {
        matches!(self, SuiteFamily::NovelGoals | SuiteFamily::Combined)
    }
}

impl fmt::Display for SuiteFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        SuiteFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s.replace('-', "_"))
            .ok_or_else(|| format!("unknown suite `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaskError {
    #[error("{family} is not available for {domain}: {reason}")]
    Infeasible { domain: DomainId, family: SuiteFamily, reason: String },
    #[error("could not generate a task: {0}")]
    Generation(String),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub domain: DomainId,
    pub scene: SceneSpec,
    pub layout_seed: u64,
    pub goal: GoalText,
    pub conditions: Vec<GoalCondition>,
}

impl TaskSpec {
    pub fn world(&self) -> Result<WorldState, WorldError> {
        WorldState::reset(self.domain, &self.scene, self.layout_seed)
    }

    pub fn objects(&self) -> Vec<String> {
        self.scene.objects.iter().map(|o| o.name.clone()).collect()
    }

    /// Identity of the initial configuration.
    pub fn fingerprint(&self) -> String {
        serde_json::to_string(&(&self.scene, self.layout_seed)).expect("serializable")
    }
}

/// What training exposed: object categories, goal shapes and initial
/// configurations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub domain: Option<DomainId>,
    pub categories: BTreeSet<String>,
    pub goal_shapes: BTreeSet<String>,
    pub configurations: BTreeSet<String>,
}

impl TrainingManifest {
    pub fn from_tasks(tasks: &[TaskSpec]) -> Self {
        let mut m = TrainingManifest { domain: tasks.first().map(|t| t.domain), ..Default::default() };
        for t in tasks {
            m.categories.extend(t.scene.objects.iter().map(|o| o.category.clone()));
            m.goal_shapes.insert(t.goal.shape.clone());
            m.configurations.insert(t.fingerprint());
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    pub domain: DomainId,
    pub family: SuiteFamily,
    pub seed: u64,
    pub tasks: Vec<TaskSpec>,
}

struct Catalog {
    /// Fixed-name objects always present.
    fixtures: &'static [&'static str],
    /// Graspable categories named "<color> <category>".
    small_seen: &'static [&'static str],
    small_unseen: &'static [&'static str],
    /// Unseen categories added under their own name.
    fixtures_unseen: &'static [&'static str],
}

fn catalog(domain: DomainId) -> Catalog {
    match domain {
        DomainId::StoreObjects => Catalog {
            fixtures: &["coaster"],
            small_seen: &["block", "can"],
            small_unseen: &["box"],
            fixtures_unseen: &["shelf", "tray"],
        },
        DomainId::SetTable => Catalog {
            fixtures: &["table mat", "plate"],
            small_seen: &["cup", "apple", "fork"],
            small_unseen: &["spoon", "bowl"],
            fixtures_unseen: &[],
        },
        DomainId::CookMeal => Catalog {
            fixtures: &["pot", "faucet"],
            small_seen: &["sausage", "potato", "carrot"],
            small_unseen: &["tomato"],
            fixtures_unseen: &["basket"],
        },
    }
}

struct Builder<'r> {
    rng: &'r mut ChaCha8Rng,
    objects: Vec<ObjectSpec>,
    used_colors: BTreeSet<&'static str>,
}

impl<'r> Builder<'r> {
    fn new(rng: &'r mut ChaCha8Rng) -> Self {
        Builder { rng, objects: Vec::new(), used_colors: BTreeSet::new() }
    }

    fn fixture(&mut self, category: &str) -> String {
        self.objects.push(ObjectSpec::new(category, category));
        category.to_string()
    }

    fn colored(&mut self, category: &str) -> String {
        let free: Vec<&'static str> = COLORS.iter().copied().filter(|c| !self.used_colors.contains(c)).collect();
        let color = *free.choose(self.rng).expect("enough colors");
        self.used_colors.insert(color);
        let name = format!("{color} {category}");
        self.objects.push(ObjectSpec::new(&name, category));
        name
    }

    /// Food items in CookMeal are unique per category and keep plain names.
    fn item(&mut self, domain: DomainId, category: &str) -> String {
        if domain == DomainId::CookMeal {
            self.fixture(category)
        } else {
            self.colored(category)
        }
    }
}

fn pick(rng: &mut ChaCha8Rng, xs: &[&'static str]) -> &'static str {
    xs.choose(rng).expect("nonempty")
}

/// Random stacking among `movable` objects onto `movable ∪ bases`; each
/// supporter carries at most one object.
fn random_stacking(rng: &mut ChaCha8Rng, movable: &[String], bases: &[String], p: f64) -> Vec<(String, String)> {
    let mut stacked: Vec<(String, String)> = Vec::new();
    let mut order: Vec<&String> = movable.iter().collect();
    order.shuffle(rng);
    let mut placed: Vec<String> = bases.to_vec();
    for o in order {
        if rng.gen_bool(p) {
            let clear: Vec<&String> = placed.iter().filter(|s| !stacked.iter().any(|(_, b)| b == *s)).collect();
            if let Some(s) = clear.choose(rng) {
                stacked.push((o.clone(), (*s).clone()));
            }
        }
        placed.push(o.clone());
    }
    stacked
}

fn rests_on_initially(stacked: &[(String, String)], a: &str, b: &str) -> bool {
    stacked.iter().any(|(x, y)| x == a && y == b)
}

fn slots(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn chain_text(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(a, b)| format!("{a} on {b}")).collect::<Vec<_>>().join(", ")
}

struct Draft {
    scene: SceneSpec,
    goal: GoalText,
    conditions: Vec<GoalCondition>,
}

fn store_objects(rng: &mut ChaCha8Rng, kind: usize, unseen: bool, complex: bool) -> Draft {
    let cat = catalog(DomainId::StoreObjects);
    let mut b = Builder::new(rng);
    let large = b.fixture(cat.fixtures[0]);
    let n_small = if complex { b.rng.gen_range(3..=4) } else { b.rng.gen_range(2..=3) };
    let mut small = Vec::new();
    for _ in 0..n_small {
        let c = pick(b.rng, cat.small_seen);
        small.push(b.colored(c));
    }
    let mut extras = Vec::new();
    if unseen {
        small.push(b.colored(cat.small_unseen[0]));
        let f = pick(b.rng, cat.fixtures_unseen);
        extras.push(b.fixture(f));
    }
    let bases: Vec<String> = std::iter::once(large.clone()).chain(extras.iter().cloned()).collect();
    let stacked = random_stacking(b.rng, &small, &bases, 0.4);
    small.shuffle(b.rng);
    let (goal, conditions) = if complex {
        let len = b.rng.gen_range(3..=small.len().min(4));
        let base = bases.choose(b.rng).unwrap().clone();
        let mut pairs = Vec::new();
        let mut below = base.clone();
        for o in small.iter().take(len) {
            pairs.push((o.clone(), below.clone()));
            below = o.clone();
        }
        let conditions = pairs.iter().map(|(a, c)| GoalCondition::OnObj(a.clone(), c.clone())).collect();
        (GoalText { shape: "store".into(), slots: slots(&[("a", &base), ("chain", &chain_text(&pairs))]) }, conditions)
    } else {
        let a = small[0].clone();
        match kind % 3 {
            0 => {
                let target = bases.choose(b.rng).unwrap().clone();
                (
                    GoalText { shape: "stack".into(), slots: slots(&[("a", &a), ("b", &target)]) },
                    vec![GoalCondition::OnObj(a, target)],
                )
            }
            1 => {
                let target = small[1].clone();
                (
                    GoalText { shape: "stack".into(), slots: slots(&[("a", &a), ("b", &target)]) },
                    vec![GoalCondition::OnObj(a, target)],
                )
            }
            _ => {
                let a = stacked.first().map(|(x, _)| x.clone()).unwrap_or(a);
                (GoalText { shape: "table".into(), slots: slots(&[("a", &a)]) }, vec![GoalCondition::OnTable(a)])
            }
        }
    };
    Draft { scene: SceneSpec { objects: b.objects, stacked }, goal, conditions }
}

fn set_table(rng: &mut ChaCha8Rng, kind: usize, unseen: bool, complex: bool) -> Draft {
    let cat = catalog(DomainId::SetTable);
    let mut b = Builder::new(rng);
    let mat = b.fixture(cat.fixtures[0]);
    let plate = b.fixture(cat.fixtures[1]);
    let n_small = if complex { b.rng.gen_range(3..=4) } else { b.rng.gen_range(1..=2) };
    let mut small = Vec::new();
    for _ in 0..n_small {
        let c = pick(b.rng, cat.small_seen);
        small.push(b.colored(c));
    }
    if unseen {
        let c = pick(b.rng, cat.small_unseen);
        small.push(b.colored(c));
    }
    let mut stacked = Vec::new();
    let bases = if b.rng.gen_bool(0.3) {
        stacked.push((plate.clone(), mat.clone()));
        vec![plate.clone()]
    } else {
        vec![mat.clone(), plate.clone()]
    };
    stacked.extend(random_stacking(b.rng, &small, &bases, 0.35));
    if !complex && kind % 3 == 1 && !stacked.iter().any(|(_, s)| s == &plate) {
        // Plate-moving tasks start with something on the plate.
        let free: Vec<&String> = small.iter().filter(|o| !stacked.iter().any(|(_, s)| s == *o)).collect();
        if let Some(o) = free.choose(b.rng).map(|o| (*o).clone()) {
            stacked.retain(|(x, _)| x != &o);
            stacked.push((o, plate.clone()));
        }
    }
    small.shuffle(b.rng);
    let (goal, conditions) = if complex {
        let len = b.rng.gen_range(2..=small.len().min(3));
        let mut pairs = vec![(plate.clone(), mat.clone())];
        let mut below = plate.clone();
        for o in small.iter().take(len) {
            pairs.push((o.clone(), below.clone()));
            below = o.clone();
        }
        let conditions = pairs.iter().map(|(a, c)| GoalCondition::OnObj(a.clone(), c.clone())).collect();
        (GoalText { shape: "breakfast".into(), slots: slots(&[("chain", &chain_text(&pairs))]) }, conditions)
    } else {
        let a = small[0].clone();
        match kind % 3 {
            0 => {
                let plate_on_mat = bases.len() == 1;
                let target = if !plate_on_mat && b.rng.gen_bool(0.5) { mat.clone() } else { plate.clone() };
                (
                    GoalText { shape: "place".into(), slots: slots(&[("a", &a), ("b", &target)]) },
                    vec![GoalCondition::OnObj(a, target)],
                )
            }
            1 => (
                GoalText { shape: "place".into(), slots: slots(&[("a", &plate), ("b", &mat)]) },
                vec![GoalCondition::OnObj(plate.clone(), mat.clone())],
            ),
            _ => {
                let a = stacked.iter().find(|(x, _)| x != &plate).map(|(x, _)| x.clone()).unwrap_or(a);
                (GoalText { shape: "table".into(), slots: slots(&[("a", &a)]) }, vec![GoalCondition::OnTable(a)])
            }
        }
    };
    Draft { scene: SceneSpec { objects: b.objects, stacked }, goal, conditions }
}

fn cook_meal(rng: &mut ChaCha8Rng, kind: usize, unseen: bool, complex: bool) -> Draft {
    let cat = catalog(DomainId::CookMeal);
    let mut b = Builder::new(rng);
    let pot = b.fixture(cat.fixtures[0]);
    b.fixture(cat.fixtures[1]);
    let cup = b.colored("cup");
    let n_food = if complex { b.rng.gen_range(2..=3) } else { b.rng.gen_range(1..=2) };
    let mut pool: Vec<&str> = cat.small_seen.to_vec();
    pool.shuffle(b.rng);
    let mut food: Vec<String> = pool.iter().take(n_food).map(|c| b.item(DomainId::CookMeal, c)).collect();
    if unseen {
        food.push(b.item(DomainId::CookMeal, cat.small_unseen[0]));
        b.fixture(cat.fixtures_unseen[0]);
    }
    food.shuffle(b.rng);
    let (goal, conditions) = if complex {
        let k = b.rng.gen_range(1..=food.len().min(2));
        let items: Vec<String> = food.iter().take(k).cloned().collect();
        let mut conditions = vec![GoalCondition::HasWater(pot.clone())];
        conditions.extend(items.iter().map(|i| GoalCondition::Inside(i.clone(), pot.clone())));
        conditions.push(GoalCondition::HasWater(cup.clone()));
        conditions.push(GoalCondition::OnTable(cup.clone()));
        let goal =
            GoalText { shape: "meal".into(), slots: slots(&[("items", &items.join(", ")), ("c", &pot), ("d", &cup)]) };
        (goal, conditions)
    } else {
        match kind % 3 {
            0 => (
                GoalText { shape: "water_table".into(), slots: slots(&[("a", &cup)]) },
                vec![GoalCondition::HasWater(cup.clone()), GoalCondition::OnTable(cup.clone())],
            ),
            1 => (
                GoalText { shape: "water".into(), slots: slots(&[("a", &pot)]) },
                vec![GoalCondition::HasWater(pot.clone())],
            ),
            _ => {
                let a = food[0].clone();
                (
                    GoalText { shape: "into".into(), slots: slots(&[("a", &a), ("b", &pot)]) },
                    vec![GoalCondition::Inside(a, pot.clone())],
                )
            }
        }
    };
    Draft { scene: SceneSpec { objects: b.objects, stacked: Vec::new() }, goal, conditions }
}

fn draft(domain: DomainId, rng: &mut ChaCha8Rng, kind: usize, unseen: bool, complex: bool) -> Draft {
    match domain {
        DomainId::StoreObjects => store_objects(rng, kind, unseen, complex),
        DomainId::SetTable => set_table(rng, kind, unseen, complex),
        DomainId::CookMeal => cook_meal(rng, kind, unseen, complex),
    }
}

/// Builds a task whose goal does not already hold, retrying with fresh
/// draws from `rng`.
fn make_task(
    domain: DomainId,
    id: String,
    rng: &mut ChaCha8Rng,
    kind: usize,
    unseen: bool,
    complex: bool,
    reject: &dyn Fn(&TaskSpec) -> bool,
) -> Result<TaskSpec, TaskError> {
    for _ in 0..MAX_ATTEMPTS {
        let d = draft(domain, rng, kind, unseen, complex);
        if d.conditions
            .iter()
            .any(|c| matches!(c, GoalCondition::OnObj(a, b) if rests_on_initially(&d.scene.stacked, a, b)))
        {
            continue;
        }
        let task = TaskSpec {
            id: id.clone(),
            domain,
            scene: d.scene,
            layout_seed: rng.gen_range(0..1_000_000),
            goal: d.goal,
            conditions: d.conditions,
        };
        let Ok(world) = task.world() else { continue };
        if task.conditions.iter().all(|c| c.holds(&world)) || reject(&task) {
            continue;
        }
        return Ok(task);
    }
    Err(TaskError::Generation(id))
}

fn family_salt(family: Option<SuiteFamily>) -> u64 {
    match family {
        None => 0x7261_696e,
        Some(f) => 0x7375_6974_0000 + f as u64,
    }
}

fn rng_for(domain: DomainId, family: Option<SuiteFamily>, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ family_salt(family) ^ ((domain as u64) << 56))
}

/// `n` simple tasks cycling through the domain's three simple templates in
/// a seeded order.
pub fn training_tasks(domain: DomainId, n: usize, seed: u64) -> Result<Vec<TaskSpec>, TaskError> {
    let mut rng = rng_for(domain, None, seed);
    let mut kinds: Vec<usize> = (0..n).map(|i| i % 3).collect();
    kinds.shuffle(&mut rng);
    kinds
        .into_iter()
        .enumerate()
        .map(|(i, k)| make_task(domain, format!("{domain}/train/{i}"), &mut rng, k, false, false, &|_| false))
        .collect()
}

pub fn generate_suite(
    domain: DomainId,
    family: SuiteFamily,
    manifest: &TrainingManifest,
    seed: u64,
) -> Result<TestSuite, TaskError> {
    if family.unseen_objects() {
        let cat = catalog(domain);
        let unseen = cat.small_unseen.iter().chain(cat.fixtures_unseen).any(|c| !manifest.categories.contains(*c));
        if !unseen {
            return Err(TaskError::Infeasible { domain, family, reason: "every category was seen in training".into() });
        }
    }
    let mut rng = rng_for(domain, Some(family), seed);
    let reject = |t: &TaskSpec| manifest.configurations.contains(&t.fingerprint());
    let tasks = (0..SUITE_SIZE)
        .map(|i| {
            make_task(
                domain,
                format!("{domain}/{family}/{i}"),
                &mut rng,
                i % 3,
                family.unseen_objects(),
                family.complex(),
                &reject,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TestSuite { domain, family, seed, tasks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{FeedbackOracle, VariantMode};
    use crate::teacher::goal::parse_goal;

    #[test]
    fn training_tasks_are_simple_and_deterministic() {
        for d in DomainId::ALL {
            let a = training_tasks(d, 10, 3).unwrap();
            assert_eq!(a, training_tasks(d, 10, 3).unwrap());
            assert_eq!(a.len(), 10);
            for t in &a {
                assert!(t.conditions.len() <= 2, "{}", t.id);
                assert!((3..=5).contains(&t.scene.objects.len()), "{} has {}", t.id, t.scene.objects.len());
            }
        }
    }

    #[test]
    fn suites_meet_family_invariants() {
        for d in DomainId::ALL {
            let train = training_tasks(d, 10, 0).unwrap();
            let m = TrainingManifest::from_tasks(&train);
            for f in SuiteFamily::ALL {
                let s = generate_suite(d, f, &m, 1).unwrap();
                assert_eq!(s.tasks.len(), SUITE_SIZE);
                assert_eq!(s, generate_suite(d, f, &m, 1).unwrap());
                for t in &s.tasks {
                    assert!(!m.configurations.contains(&t.fingerprint()));
                    if f.complex() {
                        assert!(t.conditions.len() >= 3, "{}", t.id);
                    }
                }
                if f.unseen_objects() {
                    assert!(s.tasks.iter().all(|t| t
                        .scene
                        .objects
                        .iter()
                        .any(|o| !m.categories.contains(&o.category))));
                }
            }
        }
    }

    #[test]
    fn goal_sentences_parse_to_their_conditions() {
        for d in DomainId::ALL {
            let m = TrainingManifest::from_tasks(&training_tasks(d, 10, 0).unwrap());
            let mut tasks = training_tasks(d, 10, 0).unwrap();
            for f in SuiteFamily::ALL {
                tasks.extend(generate_suite(d, f, &m, 2).unwrap().tasks);
            }
            let mut o = FeedbackOracle::new(d, VariantMode::Canonical);
            for t in &tasks {
                let text = o.goal_sentence(&t.goal);
                let lits = parse_goal(&text, &t.objects()).unwrap_or_else(|| panic!("{text}"));
                assert_eq!(lits.len(), t.conditions.len(), "{text}");
            }
        }
    }

    #[test]
    fn set_table_combined_has_spoon_or_bowl() {
        let m = TrainingManifest::from_tasks(&training_tasks(DomainId::SetTable, 10, 0).unwrap());
        let s = generate_suite(DomainId::SetTable, SuiteFamily::Combined, &m, 1).unwrap();
        assert!(s.tasks.iter().all(|t| t.scene.objects.iter().any(|o| o.category == "spoon" || o.category == "bowl")));
    }
}
