use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::world::GroundedAction;

use super::{ground, Domain, GroundTask, PddlError, Problem};

const INF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heuristic {
    Blind,
    GoalCount,
    Hmax,
    #[default]
    LmCut,
}

impl Heuristic {
    pub const ALL: [Heuristic; 4] = [Heuristic::Blind, Heuristic::GoalCount, Heuristic::Hmax, Heuristic::LmCut];

    pub fn as_str(self) -> &'static str {
        match self {
            Heuristic::Blind => "blind",
            Heuristic::GoalCount => "goal_count",
            Heuristic::Hmax => "hmax",
            Heuristic::LmCut => "lmcut",
        }
    }

    /// Whether A* with this heuristic returns optimal plans.
    pub fn admissible(self) -> bool {
        !matches!(self, Heuristic::GoalCount)
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "blind" => Ok(Heuristic::Blind),
            "goal_count" | "goalcount" => Ok(Heuristic::GoalCount),
            "hmax" => Ok(Heuristic::Hmax),
            "lmcut" | "lm_cut" => Ok(Heuristic::LmCut),
            other => Err(format!("unknown heuristic `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanResult {
    /// Operator names with PDDL object identifiers.
    pub steps: Vec<GroundedAction>,
    pub expansions: u64,
    pub generated: u64,
}

type Bits = Box<[u64]>;

fn has(s: &[u64], f: u32) -> bool {
    s[(f / 64) as usize] >> (f % 64) & 1 == 1
}

fn set(s: &mut [u64], f: u32, on: bool) {
    let w = &mut s[(f / 64) as usize];
    if on {
        *w |= 1 << (f % 64);
    } else {
        *w &= !(1 << (f % 64));
    }
}

/// Delete relaxation with an artificial always-true fact (precondition of
/// operators that have none) and an artificial goal fact reached by a
/// zero-cost goal operator.
struct Relaxed {
    n: usize,
    pre: Vec<Vec<u32>>,
    add: Vec<Vec<u32>>,
    cost: Vec<u32>,
    pre_of: Vec<Vec<u32>>,
    add_of: Vec<Vec<u32>>,
}

impl Relaxed {
    fn new(t: &GroundTask) -> Self {
        let n = t.facts.len() + 2;
        let (art_pre, art_goal) = ((n - 2) as u32, (n - 1) as u32);
        let mut pre: Vec<Vec<u32>> =
            t.ops.iter().map(|o| if o.pre.is_empty() { vec![art_pre] } else { o.pre.clone() }).collect();
        let mut add: Vec<Vec<u32>> = t.ops.iter().map(|o| o.add.clone()).collect();
        let mut cost = vec![1; t.ops.len()];
        pre.push(if t.goal.is_empty() { vec![art_pre] } else { t.goal.clone() });
        add.push(vec![art_goal]);
        cost.push(0);
        let mut pre_of = vec![Vec::new(); n];
        let mut add_of = vec![Vec::new(); n];
        for (i, (p, a)) in pre.iter().zip(&add).enumerate() {
            for &f in p {
                pre_of[f as usize].push(i as u32);
            }
            for &f in a {
                add_of[f as usize].push(i as u32);
            }
        }
        Relaxed { n, pre, add, cost, pre_of, add_of }
    }

    fn art_pre(&self) -> u32 {
        (self.n - 2) as u32
    }

    fn art_goal(&self) -> usize {
        self.n - 1
    }

    fn seeds<'a>(&self, state: &'a [u64]) -> impl Iterator<Item = u32> + 'a {
        let n = self.n - 2;
        let art = self.art_pre();
        (0..n as u32).filter(move |&f| has(state, f)).chain(std::iter::once(art))
    }

    /// hmax fact costs and, per operator, the precondition that attained the
    /// maximum (`INF` when the operator is unreachable).
    fn hmax(&self, state: &[u64], cost: &[u32]) -> (Vec<u32>, Vec<u32>) {
        let mut fc = vec![INF; self.n];
        let mut unsat: Vec<usize> = self.pre.iter().map(Vec::len).collect();
        let mut pcf = vec![INF; self.pre.len()];
        let mut heap = BinaryHeap::new();
        for f in self.seeds(state) {
            fc[f as usize] = 0;
            heap.push(Reverse((0u32, f)));
        }
        while let Some(Reverse((c, f))) = heap.pop() {
            if c > fc[f as usize] {
                continue;
            }
            for &op in &self.pre_of[f as usize] {
                let op = op as usize;
                unsat[op] -= 1;
                if unsat[op] == 0 {
                    pcf[op] = f;
                    let oc = c + cost[op];
                    for &e in &self.add[op] {
                        if oc < fc[e as usize] {
                            fc[e as usize] = oc;
                            heap.push(Reverse((oc, e)));
                        }
                    }
                }
            }
        }
        (fc, pcf)
    }

    fn lmcut(&self, state: &[u64]) -> Option<u32> {
        let mut cost = self.cost.clone();
        let mut h = 0;
        loop {
            let (fc, pcf) = self.hmax(state, &cost);
            match fc[self.art_goal()] {
                INF => return None,
                0 => return Some(h),
                _ => {}
            }
            let mut zone = vec![false; self.n];
            zone[self.art_goal()] = true;
            let mut stack = vec![self.art_goal() as u32];
            while let Some(f) = stack.pop() {
                for &op in &self.add_of[f as usize] {
                    let p = pcf[op as usize];
                    if p != INF && cost[op as usize] == 0 && !zone[p as usize] {
                        zone[p as usize] = true;
                        stack.push(p);
                    }
                }
            }
            let mut reached = vec![false; self.n];
            let mut stack: Vec<u32> = self.seeds(state).collect();
            for &f in &stack {
                reached[f as usize] = true;
            }
            let mut in_cut = vec![false; self.pre.len()];
            let mut cut = Vec::new();
            while let Some(f) = stack.pop() {
                for &op in &self.pre_of[f as usize] {
                    if pcf[op as usize] != f {
                        continue;
                    }
                    for &e in &self.add[op as usize] {
                        if zone[e as usize] {
                            if !in_cut[op as usize] {
                                in_cut[op as usize] = true;
                                cut.push(op as usize);
                            }
                        } else if !reached[e as usize] {
                            reached[e as usize] = true;
                            stack.push(e);
                        }
                    }
                }
            }
            let m = cut.iter().map(|&o| cost[o]).min().expect("a positive-cost cut exists");
            debug_assert!(m > 0);
            h += m;
            for o in cut {
                cost[o] -= m;
            }
        }
    }
}

struct Evaluator<'t> {
    task: &'t GroundTask,
    kind: Heuristic,
    relaxed: Option<Relaxed>,
}

impl<'t> Evaluator<'t> {
    fn new(task: &'t GroundTask, kind: Heuristic) -> Self {
        let relaxed = matches!(kind, Heuristic::Hmax | Heuristic::LmCut).then(|| Relaxed::new(task));
        Evaluator { task, kind, relaxed }
    }

    /// `None` marks a dead end.
    fn eval(&self, s: &[u64]) -> Option<u32> {
        let unmet = self.task.goal.iter().filter(|&&g| !has(s, g)).count() as u32;
        match self.kind {
            Heuristic::Blind => Some(u32::from(unmet > 0)),
            Heuristic::GoalCount => Some(unmet),
            Heuristic::Hmax => {
                let r = self.relaxed.as_ref().unwrap();
                let (fc, _) = r.hmax(s, &r.cost);
                (fc[r.art_goal()] != INF).then_some(fc[r.art_goal()])
            }
            Heuristic::LmCut => self.relaxed.as_ref().unwrap().lmcut(s),
        }
    }
}

struct Node {
    parent: u32,
    op: u32,
    g: u32,
}

/// A* with reopening over a grounded task. Ties on `f` prefer the larger
/// `g`, then insertion order.
pub fn plan_task(task: &GroundTask, heuristic: Heuristic, max_expansions: u64) -> Result<PlanResult, PddlError> {
    let words = task.facts.len().div_ceil(64).max(1);
    let mut init: Bits = vec![0u64; words].into_boxed_slice();
    for &f in &task.init {
        set(&mut init, f, true);
    }
    let eval = Evaluator::new(task, heuristic);
    let is_goal = |s: &[u64]| task.goal.iter().all(|&g| has(s, g));

    let mut nodes: Vec<Node> = Vec::new();
    let mut states: Vec<Bits> = Vec::new();
    // state -> (node id, best g, h)
    let mut seen: HashMap<Bits, (u32, u32, u32)> = HashMap::new();
    let mut open = BinaryHeap::new();
    let mut counter = 0u64;
    let mut generated = 1u64;
    let mut expansions = 0u64;

    let Some(h0) = eval.eval(&init) else { return Err(PddlError::Unsolvable) };
    nodes.push(Node { parent: INF, op: INF, g: 0 });
    states.push(init.clone());
    seen.insert(init, (0, 0, h0));
    open.push(Reverse((h0, INF, counter, 0u32)));

    while let Some(Reverse((_, _, _, id))) = open.pop() {
        let g = nodes[id as usize].g;
        let state = states[id as usize].clone();
        if seen[&state].1 < g {
            continue;
        }
        if is_goal(&state) {
            let mut steps = Vec::new();
            let mut cur = id;
            while nodes[cur as usize].op != INF {
                let op = &task.ops[nodes[cur as usize].op as usize];
                steps.push(GroundedAction { schema: op.name.clone(), args: op.args.clone() });
                cur = nodes[cur as usize].parent;
            }
            steps.reverse();
            return Ok(PlanResult { steps, expansions, generated });
        }
        expansions += 1;
        if expansions > max_expansions {
            return Err(PddlError::Budget(max_expansions));
        }
        for (oi, op) in task.ops.iter().enumerate() {
            if !op.pre.iter().all(|&f| has(&state, f)) {
                continue;
            }
            let mut next = state.clone();
            for &f in &op.del {
                set(&mut next, f, false);
            }
            for &f in &op.add {
                set(&mut next, f, true);
            }
            generated += 1;
            let g2 = g + 1;
            let h = match seen.entry(next.clone()) {
                Entry::Occupied(mut e) => {
                    let (_, best, h) = *e.get();
                    if best <= g2 || h == INF {
                        continue;
                    }
                    let nid = nodes.len() as u32;
                    e.insert((nid, g2, h));
                    h
                }
                Entry::Vacant(e) => {
                    let h = eval.eval(&next).unwrap_or(INF);
                    e.insert((nodes.len() as u32, g2, h));
                    if h == INF {
                        continue;
                    }
                    h
                }
            };
            let nid = nodes.len() as u32;
            nodes.push(Node { parent: id, op: oi as u32, g: g2 });
            states.push(next);
            counter += 1;
            open.push(Reverse((g2 + h, INF - g2, counter, nid)));
        }
    }
    Err(PddlError::Unsolvable)
}

pub fn plan(
    domain: &Domain,
    problem: &Problem,
    heuristic: Heuristic,
    max_expansions: u64,
) -> Result<PlanResult, PddlError> {
    let task = ground(domain, problem)?;
    plan_task(&task, heuristic, max_expansions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_domain, parse_problem, validate};

    const BW: &str = "(define (domain bw) (:requirements :strips)
      (:predicates (clear ?x) (ontable ?x) (empty) (holding ?x) (on ?x ?y))
      (:action pickup :parameters (?x) :precondition (and (clear ?x) (ontable ?x) (empty))
        :effect (and (holding ?x) (not (clear ?x)) (not (ontable ?x)) (not (empty))))
      (:action putdown :parameters (?x) :precondition (holding ?x)
        :effect (and (clear ?x) (empty) (ontable ?x) (not (holding ?x))))
      (:action stack :parameters (?x ?y) :precondition (and (clear ?y) (holding ?x))
        :effect (and (empty) (clear ?x) (on ?x ?y) (not (clear ?y)) (not (holding ?x))))
      (:action unstack :parameters (?x ?y) :precondition (and (on ?x ?y) (clear ?x) (empty))
        :effect (and (holding ?x) (clear ?y) (not (on ?x ?y)) (not (clear ?x)) (not (empty)))))";

    // Sussman anomaly: c on a, goal a on b on c. Optimal length 6.
    const SUSSMAN: &str = "(define (problem s) (:domain bw) (:objects a b c)
      (:init (on c a) (ontable a) (ontable b) (clear c) (clear b) (empty))
      (:goal (and (on a b) (on b c))))";

    #[test]
    fn all_admissible_heuristics_find_optimal_sussman_plan() {
        let d = parse_domain(BW).unwrap();
        let p = parse_problem(SUSSMAN).unwrap();
        for h in Heuristic::ALL {
            let r = plan(&d, &p, h, 100_000).unwrap();
            validate(&d, &p, &r.steps).unwrap();
            if h.admissible() {
                assert_eq!(r.steps.len(), 6, "{h}");
            }
        }
    }

    #[test]
    fn lmcut_is_informative_and_admissible_at_init() {
        let d = parse_domain(BW).unwrap();
        let p = parse_problem(SUSSMAN).unwrap();
        let t = ground(&d, &p).unwrap();
        let r = Relaxed::new(&t);
        let mut s = vec![0u64; t.facts.len().div_ceil(64)];
        for &f in &t.init {
            set(&mut s, f, true);
        }
        let lm = r.lmcut(&s).unwrap();
        let (fc, _) = r.hmax(&s, &r.cost);
        assert!(lm >= fc[r.art_goal()]);
        assert!(lm <= 6);
        let blind = plan(&d, &p, Heuristic::Blind, 100_000).unwrap();
        let lmc = plan(&d, &p, Heuristic::LmCut, 100_000).unwrap();
        assert!(lmc.expansions <= blind.expansions);
    }

    #[test]
    fn unsolvable_and_budget() {
        let d = parse_domain(BW).unwrap();
        let p = parse_problem("(define (problem u) (:domain bw) (:objects a) (:init (ontable a) (clear a) (empty)) (:goal (and (on a a))))").unwrap();
        assert_eq!(plan(&d, &p, Heuristic::LmCut, 1000), Err(PddlError::Unsolvable));
        let p = parse_problem(SUSSMAN).unwrap();
        assert_eq!(plan(&d, &p, Heuristic::Blind, 2), Err(PddlError::Budget(2)));
    }

    #[test]
    fn empty_goal_gives_empty_plan() {
        let d = parse_domain(BW).unwrap();
        let p =
            parse_problem("(define (problem e) (:domain bw) (:objects a) (:init (ontable a)) (:goal (and)))").unwrap();
        assert!(plan(&d, &p, Heuristic::LmCut, 10).unwrap().steps.is_empty());
    }

    #[test]
    fn heuristic_names_parse() {
        for h in Heuristic::ALL {
            assert_eq!(h.as_str().parse::<Heuristic>().unwrap(), h);
        }
        assert!("ff".parse::<Heuristic>().is_err());
    }
}
