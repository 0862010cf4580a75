//! STRIPS PDDL: compilation from learned operators, printing, parsing,
//! grounding, optimal search and plan validation.

mod ground;
mod parse;
mod search;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{Atom, Literal, Registry, SymbolicState, NEG_PREFIX};
use crate::learn::Operator;
use crate::world::GroundedAction;

pub use ground::{ground, GroundOp, GroundTask};
pub use parse::{parse_domain, parse_pddl, parse_problem, PddlFile};
pub use search::{plan, plan_task, Heuristic, PlanResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PddlError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("unsupported PDDL feature: {0}")]
    Unsupported(String),
    #[error("undefined {kind} `{name}`")]
    Undefined { kind: &'static str, name: String },
    #[error("`{name}` expects {expected} arguments, got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("no plan within {0} expansions")]
    Budget(u64),
    #[error("goal unreachable")]
    Unsolvable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub name: String,
    /// Variables including the leading `?`.
    pub params: Vec<String>,
    pub pre: Vec<Atom>,
    pub add: Vec<Atom>,
    pub del: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    pub requirements: Vec<String>,
    pub predicates: Vec<(String, Vec<String>)>,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub domain: String,
    pub objects: Vec<String>,
    pub init: Vec<Atom>,
    pub goal: Vec<Atom>,
}

impl Domain {
    pub fn action(&self, name: &str) -> Option<&Action> {
        self.actions.iter().find(|a| a.name == name)
    }
}

/// Reversible mapping between scene object names and PDDL identifiers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObjectNames {
    to_pddl: BTreeMap<String, String>,
    from_pddl: BTreeMap<String, String>,
}

impl ObjectNames {
    pub fn new(objects: &[String]) -> Self {
        let mut names = ObjectNames::default();
        let mut sorted: Vec<&String> = objects.iter().collect();
        sorted.sort();
        for o in sorted {
            let base: String =
                o.to_lowercase().chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
            let base = if base.starts_with(|c: char| c.is_ascii_alphabetic()) { base } else { format!("o_{base}") };
            let mut id = base.clone();
            let mut k = 2;
            while names.from_pddl.contains_key(&id) {
                id = format!("{base}_{k}");
                k += 1;
            }
            names.to_pddl.insert(o.clone(), id.clone());
            names.from_pddl.insert(id, o.clone());
        }
        names
    }

    pub fn to_pddl(&self, o: &str) -> String {
        self.to_pddl.get(o).cloned().unwrap_or_else(|| o.to_string())
    }

    pub fn from_pddl(&self, id: &str) -> String {
        self.from_pddl.get(id).cloned().unwrap_or_else(|| id.to_string())
    }

    fn atom(&self, a: &Atom) -> Atom {
        Atom { predicate: a.predicate.clone(), args: a.args.iter().map(|o| self.to_pddl(o)).collect() }
    }
}

fn qvar(a: &Atom) -> Atom {
    Atom { predicate: a.predicate.clone(), args: a.args.iter().map(|v| format!("?{v}")).collect() }
}

/// Domain with every registered predicate (both polarities) and one action
/// per operator.
pub fn compile(name: &str, registry: &Registry, operators: &[Operator]) -> Domain {
    let predicates =
        registry.predicates().map(|p| (p.name.clone(), p.params.iter().map(|x| format!("?{x}")).collect())).collect();
    let actions = operators
        .iter()
        .map(|op| Action {
            name: op.name.clone(),
            params: op.params.iter().map(|v| format!("?{v}")).collect(),
            pre: op.pre.iter().map(qvar).collect(),
            add: op.add.iter().map(qvar).collect(),
            del: op.del.iter().map(qvar).collect(),
        })
        .collect();
    Domain { name: name.to_string(), requirements: vec![":strips".to_string()], predicates, actions }
}

/// Literal as a positive atom, using the complement for negative values.
pub fn literal_atom(l: &Literal) -> Atom {
    if l.value {
        l.atom.clone()
    } else {
        Atom { predicate: format!("{NEG_PREFIX}{}", l.atom.predicate), args: l.atom.args.clone() }
    }
}

pub fn compile_problem(
    name: &str,
    domain: &str,
    objects: &[String],
    init: &SymbolicState,
    goal: &[Literal],
) -> (Problem, ObjectNames) {
    let names = ObjectNames::new(objects);
    let mut objs: Vec<String> = objects.iter().map(|o| names.to_pddl(o)).collect();
    objs.sort();
    let problem = Problem {
        name: name.to_string(),
        domain: domain.to_string(),
        objects: objs,
        init: init.iter().map(|a| names.atom(a)).collect(),
        goal: goal.iter().map(|l| names.atom(&literal_atom(l))).collect(),
    };
    (problem, names)
}

/// Strips the `_<k>` suffix of an operator name.
pub fn schema_of(action_name: &str) -> &str {
    match action_name.rsplit_once('_') {
        Some((s, k)) if !k.is_empty() && k.chars().all(|c| c.is_ascii_digit()) => s,
        _ => action_name,
    }
}

/// Converts a plan step to a world action, dropping trailing operator
/// variables beyond the schema's arity.
pub fn to_world_action(step: &GroundedAction, arity: usize, names: &ObjectNames) -> GroundedAction {
    GroundedAction {
        schema: schema_of(&step.schema).to_string(),
        args: step.args.iter().take(arity).map(|a| names.from_pddl(a)).collect(),
    }
}

fn atom_sexp(a: &Atom) -> String {
    if a.args.is_empty() {
        format!("({})", a.predicate)
    } else {
        format!("({} {})", a.predicate, a.args.join(" "))
    }
}

fn conj(items: &[String]) -> String {
    match items.len() {
        0 => "(and)".to_string(),
        _ => format!("(and {})", items.join(" ")),
    }
}

pub fn print_domain(d: &Domain) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "(define (domain {})", d.name);
    let _ = writeln!(s, "  (:requirements {})", d.requirements.join(" "));
    s.push_str("  (:predicates");
    for (p, params) in &d.predicates {
        let a = Atom { predicate: p.clone(), args: params.clone() };
        let _ = write!(s, "\n    {}", atom_sexp(&a));
    }
    s.push_str(")\n");
    for a in &d.actions {
        let _ = writeln!(s, "  (:action {}", a.name);
        let _ = writeln!(s, "    :parameters ({})", a.params.join(" "));
        let pre: Vec<String> = a.pre.iter().map(atom_sexp).collect();
        let _ = writeln!(s, "    :precondition {}", conj(&pre));
        let mut eff: Vec<String> = a.add.iter().map(atom_sexp).collect();
        eff.extend(a.del.iter().map(|x| format!("(not {})", atom_sexp(x))));
        let _ = writeln!(s, "    :effect {})", conj(&eff));
    }
    s.push_str(")\n");
    s
}

pub fn print_problem(p: &Problem) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "(define (problem {})", p.name);
    let _ = writeln!(s, "  (:domain {})", p.domain);
    let _ = writeln!(s, "  (:objects {})", p.objects.join(" "));
    s.push_str("  (:init");
    for a in &p.init {
        let _ = write!(s, "\n    {}", atom_sexp(a));
    }
    s.push_str(")\n");
    let goal: Vec<String> = p.goal.iter().map(atom_sexp).collect();
    let _ = writeln!(s, "  (:goal {}))", conj(&goal));
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {step}: {reason}")]
pub struct ValidationError {
    pub step: usize,
    pub reason: String,
}

/// Simulates `plan` from the problem's initial state directly on the
/// lifted domain and checks the goal at the end.
pub fn validate(domain: &Domain, problem: &Problem, plan: &[GroundedAction]) -> Result<(), ValidationError> {
    let objects: BTreeSet<&String> = problem.objects.iter().collect();
    let mut state: BTreeSet<Atom> = problem.init.iter().cloned().collect();
    for (i, step) in plan.iter().enumerate() {
        let err = |reason: String| ValidationError { step: i, reason };
        let a = domain.action(&step.schema).ok_or_else(|| err(format!("unknown action {}", step.schema)))?;
        if a.params.len() != step.args.len() {
            return Err(err(format!("{} takes {} arguments", a.name, a.params.len())));
        }
        if let Some(o) = step.args.iter().find(|o| !objects.contains(o)) {
            return Err(err(format!("unknown object {o}")));
        }
        let bind: BTreeMap<&String, &String> = a.params.iter().zip(&step.args).collect();
        let inst = |x: &Atom| Atom {
            predicate: x.predicate.clone(),
            args: x.args.iter().map(|v| bind.get(v).map(|o| (*o).clone()).unwrap_or_else(|| v.clone())).collect(),
        };
        for p in &a.pre {
            let g = inst(p);
            if !state.contains(&g) {
                return Err(err(format!("precondition {g} does not hold")));
            }
        }
        for d in &a.del {
            state.remove(&inst(d));
        }
        for x in &a.add {
            state.insert(inst(x));
        }
    }
    for g in &problem.goal {
        if !state.contains(g) {
            return Err(ValidationError { step: plan.len(), reason: format!("goal {g} does not hold") });
        }
    }
    Ok(())
}
