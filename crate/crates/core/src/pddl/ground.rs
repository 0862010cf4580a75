use std::collections::HashMap;

use crate::dsl::{ordered_tuples, Atom};

use super::{Action, Domain, PddlError, Problem};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundOp {
    pub name: String,
    pub args: Vec<String>,
    pub pre: Vec<u32>,
    pub add: Vec<u32>,
    pub del: Vec<u32>,
}

/// Propositional task. Facts are indexed into `facts`.
#[derive(Debug, Clone, Default)]
pub struct GroundTask {
    pub facts: Vec<Atom>,
    pub ops: Vec<GroundOp>,
    pub init: Vec<u32>,
    pub goal: Vec<u32>,
    index: HashMap<Atom, u32>,
}

impl GroundTask {
    pub fn fact(&self, a: &Atom) -> Option<u32> {
        self.index.get(a).copied()
    }

    fn intern(&mut self, a: Atom) -> u32 {
        if let Some(&i) = self.index.get(&a) {
            return i;
        }
        let i = self.facts.len() as u32;
        self.facts.push(a.clone());
        self.index.insert(a, i);
        i
    }
}

fn instantiate(x: &Atom, bind: &HashMap<&str, &str>) -> Atom {
    Atom {
        predicate: x.predicate.clone(),
        args: x.args.iter().map(|v| bind.get(v.as_str()).map(|o| o.to_string()).unwrap_or_else(|| v.clone())).collect(),
    }
}

fn ground_action(task: &mut GroundTask, a: &Action, args: &[&str]) -> GroundOp {
    let bind: HashMap<&str, &str> = a.params.iter().map(String::as_str).zip(args.iter().copied()).collect();
    let mut ids = |xs: &[Atom]| {
        let mut v: Vec<u32> = xs.iter().map(|x| task.intern(instantiate(x, &bind))).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let pre = ids(&a.pre);
    let add = ids(&a.add);
    let del = ids(&a.del);
    GroundOp { name: a.name.clone(), args: args.iter().map(|s| s.to_string()).collect(), pre, add, del }
}

/// Instantiates every action over all injective argument tuples and keeps
/// the operators whose preconditions are relaxed-reachable from the
/// initial state.
pub fn ground(domain: &Domain, problem: &Problem) -> Result<GroundTask, PddlError> {
    let mut task = GroundTask::default();
    task.init = problem.init.iter().map(|a| task.intern(a.clone())).collect();
    task.init.sort_unstable();
    task.init.dedup();
    task.goal = problem.goal.iter().map(|a| task.intern(a.clone())).collect();
    task.goal.sort_unstable();
    task.goal.dedup();
    let objects: Vec<&str> = problem.objects.iter().map(String::as_str).collect();
    let mut ops = Vec::new();
    for a in &domain.actions {
        for args in ordered_tuples(&objects, a.params.len()) {
            ops.push(ground_action(&mut task, a, &args));
        }
    }
    let mut reached = vec![false; task.facts.len()];
    for &f in &task.init {
        reached[f as usize] = true;
    }
    let mut live = vec![false; ops.len()];
    let mut changed = true;
    while changed {
        changed = false;
        for (i, op) in ops.iter().enumerate() {
            if !live[i] && op.pre.iter().all(|&f| reached[f as usize]) {
                live[i] = true;
                changed = true;
                for &f in &op.add {
                    reached[f as usize] = true;
                }
            }
        }
    }
    task.ops = ops.into_iter().zip(live).filter(|(_, l)| *l).map(|(o, _)| o).collect();
    Ok(task)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_domain, parse_problem};

    #[test]
    fn counts_injective_instantiations() {
        let d = parse_domain(
            "(define (domain d) (:requirements :strips) (:predicates (p ?x) (q ?x ?y))
             (:action a :parameters (?x ?y) :precondition (and) :effect (q ?x ?y))
             (:action b :parameters (?x) :precondition (p ?x) :effect (not (p ?x))))",
        )
        .unwrap();
        let p = parse_problem(
            "(define (problem p) (:domain d) (:objects o1 o2 o3) (:init (p o1)) (:goal (and (q o1 o2))))",
        )
        .unwrap();
        let t = ground(&d, &p).unwrap();
        // 3*2 for `a`; only b(o1) is reachable.
        assert_eq!(t.ops.len(), 7);
        assert!(t.fact(&Atom::new("q", &["o1", "o2"])).is_some());
    }
}
