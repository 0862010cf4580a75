//! Generators and independent oracles shared by the property and
//! acceptance tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use predlearn::agent::{run_training, AgentConfig, Session, TrainingRun};
use predlearn::dsl::{Atom, Literal, PredicateSource, SymbolicState};
use predlearn::learn::Transition;
use predlearn::oracle::{FeedbackOracle, VariantMode};
use predlearn::pddl::{Action, Domain, Problem};
use predlearn::tasks::{generate_suite, training_tasks, SuiteFamily, TaskSpec};
use predlearn::teacher::{build_teacher, Naming, PreconditionLedger, TeacherBackendConfig};
use predlearn::world::{DomainId, Feasibility, GroundedAction, WorldState};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn train(domain: DomainId, seed: u64, varied: bool) -> TrainingRun {
    let naming = if varied { Naming::ByPhrase } else { Naming::Canonical };
    let teacher = build_teacher(&TeacherBackendConfig { naming, ..TeacherBackendConfig::default() }).unwrap();
    let session = Session::new(domain, AgentConfig::default(), teacher, PredicateSource::Scripted, seed);
    let tasks = training_tasks(domain, 10, seed).unwrap();
    let mode = if varied { VariantMode::Varied { seed } } else { VariantMode::Canonical };
    run_training(session, tasks, FeedbackOracle::new(domain, mode), seed).unwrap()
}

// ---------------------------------------------------------------- worlds

/// Training scenes plus larger test scenes.
pub fn scenes(domain: DomainId, seed: u64) -> Vec<TaskSpec> {
    let mut out = training_tasks(domain, 10, seed).unwrap();
    let manifest = predlearn::tasks::TrainingManifest::from_tasks(&out);
    for family in [SuiteFamily::MoreObjects, SuiteFamily::Combined] {
        out.extend(generate_suite(domain, family, &manifest, seed).unwrap().tasks);
    }
    out
}

pub fn all_actions(w: &WorldState) -> Vec<GroundedAction> {
    let names = w.object_names();
    let mut out = Vec::new();
    for &(schema, arity) in w.domain_id.schemas() {
        for a in &names {
            if arity == 1 {
                out.push(GroundedAction::new(schema, &[a]));
                continue;
            }
            for b in &names {
                if a != b {
                    out.push(GroundedAction::new(schema, &[a, b]));
                }
            }
        }
    }
    out
}

pub fn feasible_actions(w: &WorldState) -> Vec<GroundedAction> {
    all_actions(w).into_iter().filter(|a| w.check_feasible(a).unwrap() == Feasibility::Ok).collect()
}

/// `n` worlds visited by random feasible walks from varied scenes.
pub fn reachable_worlds(domain: DomainId, n: usize, seed: u64) -> Vec<WorldState> {
    let mut r = rng(seed);
    let mut starts = Vec::new();
    for s in 0..3 {
        starts.extend(scenes(domain, seed.wrapping_add(s)).into_iter().map(|t| t.world().unwrap()));
    }
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut w = starts.choose(&mut r).unwrap().clone();
        out.push(w.clone());
        for _ in 0..r.gen_range(1..14) {
            if out.len() >= n {
                break;
            }
            let acts = feasible_actions(&w);
            let Some(a) = acts.choose(&mut r) else { break };
            w = w.execute(a).unwrap();
            out.push(w.clone());
        }
    }
    out
}

/// Reference meaning of the StoreObjects predicates, read off the simulator state.
pub fn store_objects_truth(pred: &str, w: &WorldState, args: &[&str]) -> bool {
    match (pred, args) {
        ("obj_on_obj", [a, b]) => w.rests_on(a, b),
        ("obj_on_table", [a]) => w.on_table(a),
        ("obj_graspable", [a]) => w.object(a).unwrap().graspable,
        ("obj_clear", [a]) => !w.objects.iter().any(|o| w.rests_on(&o.name, a)),
        ("gripper_empty", []) => w.gripper_holding.is_none(),
        _ => panic!("no ground truth for {pred}/{}", args.len()),
    }
}

pub const STORE_OBJECTS_PREDICATES: [(&str, usize); 5] =
    [("obj_on_obj", 2), ("obj_on_table", 1), ("obj_graspable", 1), ("obj_clear", 1), ("gripper_empty", 0)];

/// Ordered tuples of distinct objects.
pub fn tuples(objects: &[String], k: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for t in &out {
            for o in objects {
                if !t.contains(o) {
                    let mut t2 = t.clone();
                    t2.push(o.clone());
                    next.push(t2);
                }
            }
        }
        out = next;
    }
    out
}

// ---------------------------------------------------------------- planning

fn bind(x: &Atom, params: &[String], args: &[String]) -> Atom {
    Atom {
        predicate: x.predicate.clone(),
        args: x
            .args
            .iter()
            .map(|v| params.iter().position(|p| p == v).map(|i| args[i].clone()).unwrap_or_else(|| v.clone()))
            .collect(),
    }
}

pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub pre: Vec<Atom>,
    pub add: Vec<Atom>,
    pub del: Vec<Atom>,
}

pub fn ground_all(domain: &Domain, objects: &[String]) -> Vec<GroundAction> {
    let mut out = Vec::new();
    for a in &domain.actions {
        for args in tuples(objects, a.params.len()) {
            let inst = |xs: &[Atom]| xs.iter().map(|x| bind(x, &a.params, &args)).collect::<Vec<_>>();
            out.push(GroundAction {
                name: a.name.clone(),
                pre: inst(&a.pre),
                add: inst(&a.add),
                del: inst(&a.del),
                args,
            });
        }
    }
    out
}

pub fn apply(s: &BTreeSet<Atom>, g: &GroundAction) -> Option<BTreeSet<Atom>> {
    if !g.pre.iter().all(|p| s.contains(p)) {
        return None;
    }
    let mut n = s.clone();
    for d in &g.del {
        n.remove(d);
    }
    for a in &g.add {
        n.insert(a.clone());
    }
    Some(n)
}

/// Breadth-first shortest plan length, exploring at most `limit` states.
pub fn bfs_length(domain: &Domain, problem: &Problem, limit: usize) -> Option<usize> {
    let acts = ground_all(domain, &problem.objects);
    let init: BTreeSet<Atom> = problem.init.iter().cloned().collect();
    let goal = |s: &BTreeSet<Atom>| problem.goal.iter().all(|g| s.contains(g));
    let mut seen = HashSet::new();
    let mut q = VecDeque::new();
    seen.insert(init.clone());
    q.push_back((init, 0));
    while let Some((s, d)) = q.pop_front() {
        if goal(&s) {
            return Some(d);
        }
        for g in &acts {
            if let Some(n) = apply(&s, g) {
                if seen.len() < limit && seen.insert(n.clone()) {
                    q.push_back((n, d + 1));
                }
            }
        }
    }
    None
}

/// Random STRIPS domain and a problem whose goal holds in some state of the
/// deepest breadth-first layer from the initial state.
pub fn random_strips(seed: u64) -> (Domain, Problem) {
    let mut r = rng(seed);
    let n_preds = r.gen_range(2..=4);
    let predicates: Vec<(String, Vec<String>)> = (0..n_preds)
        .map(|i| {
            let arity = r.gen_range(0..=2);
            (format!("p{i}"), (0..arity).map(|j| format!("?x{j}")).collect())
        })
        .collect();
    let n_actions = r.gen_range(2..=4);
    let mut actions = Vec::new();
    for i in 0..n_actions {
        let params: Vec<String> = (0..r.gen_range(1..=2)).map(|j| format!("?v{j}")).collect();
        let atom = |r: &mut ChaCha8Rng| -> Option<Atom> {
            let (name, ps) = predicates.choose(r).unwrap();
            if ps.len() > params.len() {
                return None;
            }
            let mut vars = params.clone();
            vars.shuffle(r);
            Some(Atom { predicate: name.clone(), args: vars[..ps.len()].to_vec() })
        };
        let pick = |r: &mut ChaCha8Rng, lo: usize, hi: usize| {
            let mut s = BTreeSet::new();
            let k = r.gen_range(lo..=hi);
            for _ in 0..k * 4 {
                if s.len() >= k {
                    break;
                }
                if let Some(a) = atom(r) {
                    s.insert(a);
                }
            }
            s.into_iter().collect::<Vec<_>>()
        };
        let pre = pick(&mut r, 1, 2);
        let mut add = pick(&mut r, 1, 2);
        let mut del: Vec<Atom> = pre.iter().filter(|_| r.gen_bool(0.6)).cloned().collect();
        del.extend(pick(&mut r, 0, 1));
        del.sort();
        del.dedup();
        add.retain(|a| !del.contains(a));
        if add.is_empty() && del.is_empty() {
            continue;
        }
        actions.push(Action { name: format!("a{i}"), params, pre, add, del });
    }
    let domain = Domain { name: format!("rand{seed}"), requirements: vec![":strips".into()], predicates, actions };

    let objects: Vec<String> = (0..r.gen_range(2..=3)).map(|i| format!("o{i}")).collect();
    let mut facts = Vec::new();
    for (name, ps) in &domain.predicates {
        for t in tuples(&objects, ps.len()) {
            facts.push(Atom { predicate: name.clone(), args: t });
        }
    }
    let init: BTreeSet<Atom> = facts.iter().filter(|_| r.gen_bool(0.4)).cloned().collect();
    // Goal atoms come from a state in the deepest breadth-first layer.
    let acts = ground_all(&domain, &objects);
    let mut layer = vec![init.clone()];
    let mut seen: HashSet<BTreeSet<Atom>> = layer.iter().cloned().collect();
    loop {
        let next: Vec<BTreeSet<Atom>> = layer
            .iter()
            .flat_map(|s| acts.iter().filter_map(|g| apply(s, g)).collect::<Vec<_>>())
            .filter(|n| seen.insert(n.clone()))
            .collect();
        if next.is_empty() || seen.len() > 5_000 {
            break;
        }
        layer = next;
    }
    let target = layer.choose(&mut r).unwrap();
    let mut fresh: Vec<Atom> = target.difference(&init).cloned().collect();
    if fresh.is_empty() {
        return random_strips(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    }
    fresh.shuffle(&mut r);
    let mut goal: Vec<Atom> = fresh.into_iter().take(r.gen_range(1..=3)).collect();
    goal.sort();
    let problem = Problem {
        name: format!("p{seed}"),
        domain: domain.name.clone(),
        objects,
        init: init.into_iter().collect(),
        goal,
    };
    (domain, problem)
}

pub const BLOCKSWORLD: &str = "(define (domain blocksworld)
  (:requirements :strips)
  (:predicates (on ?x ?y) (ontable ?x) (clear ?x) (handempty) (holding ?x))
  (:action pick-up :parameters (?x)
    :precondition (and (clear ?x) (ontable ?x) (handempty))
    :effect (and (not (ontable ?x)) (not (clear ?x)) (not (handempty)) (holding ?x)))
  (:action put-down :parameters (?x)
    :precondition (holding ?x)
    :effect (and (not (holding ?x)) (clear ?x) (handempty) (ontable ?x)))
  (:action stack :parameters (?x ?y)
    :precondition (and (holding ?x) (clear ?y))
    :effect (and (not (holding ?x)) (not (clear ?y)) (clear ?x) (handempty) (on ?x ?y)))
  (:action unstack :parameters (?x ?y)
    :precondition (and (on ?x ?y) (clear ?x) (handempty))
    :effect (and (holding ?x) (clear ?y) (not (clear ?x)) (not (handempty)) (not (on ?x ?y)))))";

fn towers(r: &mut ChaCha8Rng, blocks: &[String]) -> Vec<Vec<String>> {
    let mut order = blocks.to_vec();
    order.shuffle(r);
    let mut out: Vec<Vec<String>> = Vec::new();
    for b in order {
        if out.is_empty() || r.gen_bool(0.4) {
            out.push(vec![b]);
        } else {
            let i = r.gen_range(0..out.len());
            out[i].push(b);
        }
    }
    out
}

fn tower_atoms(towers: &[Vec<String>]) -> Vec<Atom> {
    let mut out = Vec::new();
    for t in towers {
        out.push(Atom::new("ontable", &[t[0].as_str()]));
        for w in t.windows(2) {
            out.push(Atom::new("on", &[w[1].as_str(), w[0].as_str()]));
        }
        out.push(Atom::new("clear", &[t.last().unwrap().as_str()]));
    }
    out
}

/// Blocksworld with three to five blocks and random start and goal towers.
pub fn random_blocksworld(seed: u64) -> (Domain, Problem) {
    let mut r = rng(seed);
    let domain = predlearn::pddl::parse_domain(BLOCKSWORLD).unwrap();
    let blocks: Vec<String> = (0..r.gen_range(3..=5)).map(|i| format!("b{i}")).collect();
    let mut init = tower_atoms(&towers(&mut r, &blocks));
    init.push(Atom::new("handempty", &[]));
    init.sort();
    let mut goal: Vec<Atom> =
        tower_atoms(&towers(&mut r, &blocks)).into_iter().filter(|a| a.predicate == "on").collect();
    if goal.is_empty() {
        goal.push(Atom::new("on", &[blocks[0].as_str(), blocks[1].as_str()]));
    }
    goal.sort();
    let problem = Problem { name: format!("bw{seed}"), domain: "blocksworld".into(), objects: blocks, init, goal };
    (domain, problem)
}

// ---------------------------------------------------------------- learning

/// A condition or effect over the action's arguments.
#[derive(Debug, Clone)]
struct Lit {
    pred: &'static str,
    args: Vec<usize>,
    value: bool,
}

const UNARY: [&str; 3] = ["p", "q", "s"];

fn state_atom(pred: &str, args: &[&str], value: bool) -> Atom {
    let predicate = if value { pred.to_string() } else { format!("neg_{pred}") };
    Atom { predicate, args: args.iter().map(|s| s.to_string()).collect() }
}

fn holds(s: &SymbolicState, l: &Lit, args: &[&str]) -> bool {
    let a: Vec<&str> = l.args.iter().map(|&i| args[i]).collect();
    s.contains(&state_atom(l.pred, &a, l.value))
}

fn random_lit(r: &mut ChaCha8Rng, arity: usize) -> Lit {
    let value = r.gen_bool(0.5);
    match r.gen_range(0..if arity == 2 { 6 } else { 4 }) {
        0 => Lit { pred: "e", args: vec![], value },
        k @ 1..=3 => Lit { pred: UNARY[k - 1], args: vec![r.gen_range(0..arity)], value },
        _ => {
            let first = r.gen_range(0..2);
            Lit { pred: "r", args: vec![first, 1 - first], value }
        }
    }
}

pub struct LearnInstance {
    pub transitions: Vec<Transition>,
    pub ledger: PreconditionLedger,
    pub objects: Vec<String>,
}

/// Preconditions and effects of one hidden rule.
type Rule = (Vec<Lit>, Vec<Lit>);

/// Hidden deterministic rules over the action arguments generate up to six
/// transitions; a schema's first rule precondition may go into the ledger.
pub fn random_learn_instance(seed: u64) -> LearnInstance {
    let mut r = rng(seed);
    let objects: Vec<String> = (1..=3).map(|i| format!("o{i}")).collect();
    let schemas = [("act", 1usize), ("mov", 2usize)];
    let mut rules: BTreeMap<&str, Vec<Rule>> = BTreeMap::new();
    let mut ledger = PreconditionLedger::new();
    for (schema, arity) in schemas {
        let shared = r.gen_bool(0.4).then(|| random_lit(&mut r, arity));
        let mut rs = Vec::new();
        for _ in 0..r.gen_range(1..=3) {
            let mut pre: Vec<Lit> = (0..r.gen_range(1..=2)).map(|_| random_lit(&mut r, arity)).collect();
            pre.extend(shared.clone());
            let eff: Vec<Lit> = (0..r.gen_range(1..=2)).map(|_| random_lit(&mut r, arity)).collect();
            rs.push((pre, eff));
        }
        if let Some(l) = shared {
            let params = ["a", "b"];
            let args: Vec<&str> = l.args.iter().map(|&i| params[i]).collect();
            ledger.add(schema, Literal::new(Atom::new(l.pred, &args), l.value));
        }
        rules.insert(schema, rs);
    }

    let mut transitions = Vec::new();
    let names: Vec<&str> = objects.iter().map(String::as_str).collect();
    let target = r.gen_range(2..=6);
    for _ in 0..40 {
        if transitions.len() >= target {
            break;
        }
        let mut s = SymbolicState::new();
        s.insert(state_atom("e", &[], r.gen_bool(0.5)));
        for o in &names {
            for p in UNARY {
                s.insert(state_atom(p, &[o], r.gen_bool(0.5)));
            }
            for o2 in &names {
                if o != o2 {
                    s.insert(state_atom("r", &[o, o2], r.gen_bool(0.5)));
                }
            }
        }
        let (schema, arity) = *schemas.choose(&mut r).unwrap();
        let mut args = names.clone();
        args.shuffle(&mut r);
        args.truncate(arity);
        let Some((_, eff)) = rules[schema].iter().find(|(pre, _)| pre.iter().all(|l| holds(&s, l, &args))) else {
            continue;
        };
        let mut post = s.clone();
        for l in eff {
            let a: Vec<&str> = l.args.iter().map(|&i| args[i]).collect();
            post.remove(&state_atom(l.pred, &a, !l.value));
            post.insert(state_atom(l.pred, &a, l.value));
        }
        transitions.push(Transition {
            s_pre: s,
            action: GroundedAction::new(schema, &args),
            s_post: post,
            step: transitions.len() as u64,
            registry_version: 0,
            objects: objects.clone(),
        });
    }
    LearnInstance { transitions, ledger, objects }
}

fn var(i: usize) -> String {
    format!("v{i}")
}

fn lift(atom: &Atom, args: &[String]) -> Option<Atom> {
    let lifted: Option<Vec<String>> = atom.args.iter().map(|o| args.iter().position(|a| a == o).map(var)).collect();
    lifted.map(|a| Atom { predicate: atom.predicate.clone(), args: a })
}

fn ground_with(a: &Atom, args: &[String]) -> Atom {
    Atom {
        predicate: a.predicate.clone(),
        args: a.args.iter().map(|v| args[v[1..].parse::<usize>().unwrap()].clone()).collect(),
    }
}

/// Effects of `t` over `v0..` bound to the action arguments; `None` when an
/// effect mentions another object.
pub fn lifted_effects(t: &Transition) -> Option<(BTreeSet<Atom>, BTreeSet<Atom>)> {
    let add: Option<BTreeSet<Atom>> = t.add_effects().iter().map(|a| lift(a, &t.action.args)).collect();
    let del: Option<BTreeSet<Atom>> = t.del_effects().iter().map(|a| lift(a, &t.action.args)).collect();
    Some((add?, del?))
}

/// Cluster key to brute-force minimum precondition count, or `None` for
/// clusters no precondition set can separate.
pub type ClusterKey = (String, BTreeSet<Atom>, BTreeSet<Atom>);
pub type BruteForce = BTreeMap<ClusterKey, Option<usize>>;

/// Exhaustive search over precondition subsets for every effect cluster.
pub fn brute_force_minimum(inst: &LearnInstance) -> BruteForce {
    let mut clusters: BTreeMap<ClusterKey, Vec<&Transition>> = BTreeMap::new();
    for t in &inst.transitions {
        let (add, del) = lifted_effects(t).expect("effects stay on the arguments");
        clusters.entry((t.action.schema.clone(), add, del)).or_default().push(t);
    }
    let mut out = BTreeMap::new();
    for (key, members) in &clusters {
        let schema = &key.0;
        let required: BTreeSet<Atom> = inst.ledger.for_schema(schema).map(predlearn::learn::ledger_atom).collect();
        let mut universe: Option<BTreeSet<Atom>> = None;
        for t in members {
            let here: BTreeSet<Atom> = t.s_pre.iter().filter_map(|a| lift(a, &t.action.args)).collect();
            universe = Some(match universe {
                None => here,
                Some(u) => u.intersection(&here).cloned().collect(),
            });
        }
        let universe: Vec<Atom> = universe.unwrap().difference(&required).cloned().collect();
        assert!(universe.len() <= 12, "CON_init too large: {}", universe.len());
        let ok = |pre: &BTreeSet<Atom>| {
            members.iter().all(|t| pre.iter().all(|a| t.s_pre.contains(&ground_with(a, &t.action.args))))
                && inst.transitions.iter().filter(|t| &t.action.schema == schema).all(|t| {
                    let applicable = pre.iter().all(|a| t.s_pre.contains(&ground_with(a, &t.action.args)));
                    !applicable || lifted_effects(t).map(|(a, d)| a == key.1 && d == key.2).unwrap_or(false)
                })
        };
        let mut best = None;
        for mask in 0u32..(1 << universe.len()) {
            let size = mask.count_ones() as usize;
            if best.is_some_and(|b| size >= b) {
                continue;
            }
            let mut pre = required.clone();
            pre.extend(universe.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, a)| a.clone()));
            if ok(&pre) {
                best = Some(size);
            }
        }
        out.insert(key.clone(), best.map(|b| b + required.len()));
    }
    out
}

// ---------------------------------------------------------------- remote

/// How the local chat-completions mock answers.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum MockReply {
    /// Offline scripted answers wrapped in a chat-completions body.
    Scripted,
    /// `200` with no choices.
    Empty,
    /// `500` for every request.
    ServerError,
}

/// Serves `POST` chat completions on an ephemeral port. Returns the endpoint
/// URL and a request counter.
pub fn spawn_chat_mock(reply: MockReply) -> (String, std::sync::Arc<std::sync::atomic::AtomicUsize>) {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    use predlearn::teacher::{ChatMessage, ChatTransport, ScriptedResponder};

    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        let mut responder = ScriptedResponder::new(TeacherBackendConfig::default());
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                }
            }
            let mut body = vec![0u8; len];
            if reader.read_exact(&mut body).is_err() {
                continue;
            }
            counter.fetch_add(1, Ordering::SeqCst);
            let (status, payload) = match reply {
                MockReply::Scripted => {
                    let req: serde_json::Value = serde_json::from_slice(&body).unwrap();
                    let messages: Vec<ChatMessage> = serde_json::from_value(req["messages"].clone()).unwrap();
                    let content = responder.complete(&messages).unwrap_or_else(|e| e.to_string());
                    (
                        "200 OK",
                        serde_json::json!({ "choices": [{ "message": { "role": "assistant", "content": content } }] }),
                    )
                }
                MockReply::Empty => ("200 OK", serde_json::json!({ "choices": [] })),
                MockReply::ServerError => ("500 Internal Server Error", serde_json::json!({ "error": "boom" })),
            };
            let text = payload.to_string();
            let _ = write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
        }
    });
    (endpoint, hits)
}

/// Trains on `n` tasks through a remote teacher at `endpoint`.
pub fn train_remote(
    domain: DomainId,
    seed: u64,
    n: usize,
    endpoint: &str,
) -> Result<TrainingRun, predlearn::agent::AgentError> {
    let config = TeacherBackendConfig {
        backend: predlearn::teacher::Backend::Remote,
        endpoint: Some(endpoint.to_string()),
        retries: 0,
        timeout_secs: 10,
        ..TeacherBackendConfig::default()
    };
    let teacher = build_teacher(&config)?;
    let session = Session::new(domain, AgentConfig::default(), teacher, PredicateSource::Remote, seed);
    let tasks = training_tasks(domain, n, seed)?;
    run_training(session, tasks, FeedbackOracle::new(domain, VariantMode::Canonical), seed)
}
