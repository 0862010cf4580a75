//! Lifted operator induction from symbolic transitions.
//!
//! Transitions are clustered by action schema and lifted effect signature.
//! Each cluster yields one operator whose preconditions start as everything
//! its members share and are then cut down to the smallest set that still
//! contains the known action preconditions and never makes the operator
//! applicable, under any binding, to an observed transition it would
//! predict wrongly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsl::{Atom, Literal, SymbolicState, NEG_PREFIX};
use crate::teacher::{PreconditionLedger, ACTION_PARAMS};
use crate::world::GroundedAction;

/// Extra effect objects beyond which canonical lifting stops trying every
/// ordering.
const MAX_PERMUTED_EXTRAS: usize = 6;
/// Subsets examined by the exact minimisation before falling back.
const SEARCH_BUDGET: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s_pre: SymbolicState,
    pub action: GroundedAction,
    pub s_post: SymbolicState,
    pub step: u64,
    pub registry_version: u64,
    /// Objects present in the scene.
    pub objects: Vec<String>,
}

impl Transition {
    pub fn add_effects(&self) -> BTreeSet<Atom> {
        self.s_post.minus(&self.s_pre)
    }

    pub fn del_effects(&self) -> BTreeSet<Atom> {
        self.s_pre.minus(&self.s_post)
    }
}

pub fn var(i: usize) -> String {
    format!("v{i}")
}

fn var_index(s: &str) -> Option<usize> {
    s.strip_prefix('v').and_then(|d| d.parse().ok())
}

/// Effects of a transition over variables `v0..`: the action's arguments
/// first, then remaining effect objects in the order giving the smallest
/// signature.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LiftedEffects {
    pub schema: String,
    /// Object bound to each variable.
    pub binding: Vec<String>,
    pub add: BTreeSet<Atom>,
    pub del: BTreeSet<Atom>,
}

impl LiftedEffects {
    pub fn signature(&self) -> (String, usize, Vec<String>, Vec<String>) {
        (
            self.schema.clone(),
            self.binding.len(),
            self.add.iter().map(Atom::to_string).collect(),
            self.del.iter().map(Atom::to_string).collect(),
        )
    }
}

fn lift_atom(a: &Atom, binding: &[String]) -> Option<Atom> {
    let args: Option<Vec<String>> = a.args.iter().map(|o| binding.iter().position(|b| b == o).map(var)).collect();
    args.map(|args| Atom { predicate: a.predicate.clone(), args })
}

fn lift_set(atoms: &BTreeSet<Atom>, binding: &[String]) -> BTreeSet<Atom> {
    atoms.iter().map(|a| lift_atom(a, binding).expect("binding covers effect objects")).collect()
}

fn permutations(items: &[String]) -> Vec<Vec<String>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let first = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, first.clone());
            out.push(p);
        }
    }
    out
}

pub fn lift_effects(t: &Transition) -> LiftedEffects {
    let add = t.add_effects();
    let del = t.del_effects();
    let mut extras: BTreeSet<String> = BTreeSet::new();
    for a in add.iter().chain(&del) {
        for o in &a.args {
            if !t.action.args.contains(o) {
                extras.insert(o.clone());
            }
        }
    }
    let extras: Vec<String> = extras.into_iter().collect();
    let orders = if extras.len() <= MAX_PERMUTED_EXTRAS { permutations(&extras) } else { vec![extras.clone()] };
    orders
        .into_iter()
        .map(|order| {
            let mut binding = t.action.args.clone();
            binding.extend(order);
            LiftedEffects {
                schema: t.action.schema.clone(),
                add: lift_set(&add, &binding),
                del: lift_set(&del, &binding),
                binding,
            }
        })
        .min_by(|x, y| x.signature().cmp(&y.signature()))
        .expect("at least one ordering")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operator {
    pub name: String,
    pub schema: String,
    /// `v0..`; the first `arity` are the action's arguments.
    pub params: Vec<String>,
    pub pre: BTreeSet<Atom>,
    pub add: BTreeSet<Atom>,
    pub del: BTreeSet<Atom>,
    /// Indices of the transitions this operator was induced from.
    pub support: Vec<usize>,
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |s: &BTreeSet<Atom>| s.iter().map(Atom::to_string).collect::<Vec<_>>().join(", ");
        write!(
            f,
            "{}({}) [{}] pre {{{}}} add {{{}}} del {{{}}}",
            self.name,
            self.params.join(", "),
            self.schema,
            join(&self.pre),
            join(&self.add),
            join(&self.del)
        )
    }
}

pub fn substitute(atom: &Atom, sigma: &[String]) -> Atom {
    Atom {
        predicate: atom.predicate.clone(),
        args: atom
            .args
            .iter()
            .map(|v| var_index(v).and_then(|i| sigma.get(i).cloned()).unwrap_or_else(|| v.clone()))
            .collect(),
    }
}

/// Injective bindings of `op`'s variables that agree with the action.
fn bindings(op: &Operator, t: &Transition) -> Vec<Vec<String>> {
    if op.schema != t.action.schema || t.action.args.len() > op.params.len() {
        return Vec::new();
    }
    let mut out = vec![t.action.args.clone()];
    for _ in t.action.args.len()..op.params.len() {
        let mut next = Vec::new();
        for b in &out {
            for o in &t.objects {
                if !b.contains(o) {
                    let mut nb = b.clone();
                    nb.push(o.clone());
                    next.push(nb);
                }
            }
        }
        out = next;
    }
    out
}

fn applicable_under(op: &Operator, t: &Transition, sigma: &[String]) -> bool {
    op.pre.iter().all(|a| t.s_pre.contains(&substitute(a, sigma)))
}

fn predicts_under(op: &Operator, t: &Transition, sigma: &[String]) -> bool {
    let add: BTreeSet<Atom> = op.add.iter().map(|a| substitute(a, sigma)).collect();
    let del: BTreeSet<Atom> = op.del.iter().map(|a| substitute(a, sigma)).collect();
    add == t.add_effects() && del == t.del_effects()
}

/// Whether some binding makes `op` applicable in `t.s_pre` with exactly
/// `t`'s effects.
pub fn explains(op: &Operator, t: &Transition) -> bool {
    bindings(op, t).iter().any(|s| applicable_under(op, t, s) && predicts_under(op, t, s))
}

/// Whether some binding makes `op` applicable to `t` with the wrong effects.
pub fn mispredicts(op: &Operator, t: &Transition) -> bool {
    bindings(op, t).iter().any(|s| applicable_under(op, t, s) && !predicts_under(op, t, s))
}

/// Ledger literal over `a`/`b` as a precondition atom over `v0`/`v1`.
pub fn ledger_atom(l: &Literal) -> Atom {
    let predicate = if l.value { l.atom.predicate.clone() } else { format!("{NEG_PREFIX}{}", l.atom.predicate) };
    let args = l
        .atom
        .args
        .iter()
        .map(|a| ACTION_PARAMS.iter().position(|p| p == a).map(var).unwrap_or_else(|| a.clone()))
        .collect();
    Atom { predicate, args }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    /// Same state and action, different outcome; the later one is kept.
    Contradictory { kept: usize, dropped: usize },
    /// No precondition choice stops `operator` from mispredicting `transition`.
    Unavoidable { operator: String, transition: usize },
    /// A ledger precondition that some supporting transition violates.
    LedgerUnsupported { operator: String, literal: String },
    /// Exact minimisation ran out of budget; a greedy result was used.
    SearchBudget { operator: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearnResult {
    pub operators: Vec<Operator>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Drops earlier transitions contradicted by later ones and exact repeats.
fn deduplicate(transitions: &[Transition], diagnostics: &mut Vec<Diagnostic>) -> Vec<usize> {
    let mut last: BTreeMap<(&SymbolicState, &GroundedAction), usize> = BTreeMap::new();
    for (i, t) in transitions.iter().enumerate() {
        if let Some(&j) = last.get(&(&t.s_pre, &t.action)) {
            if transitions[j].s_post != t.s_post {
                diagnostics.push(Diagnostic::Contradictory { kept: i, dropped: j });
            }
        }
        last.insert((&t.s_pre, &t.action), i);
    }
    let mut keep: Vec<usize> = last.into_values().collect();
    keep.sort_unstable();
    keep
}

/// Smallest subset of `0..n` meeting every set in `sets`, lexicographically
/// first among those of minimum size. `None` when the budget runs out.
fn min_hitting_set(n: usize, sets: &[BTreeSet<usize>], upper: usize) -> Option<Vec<usize>> {
    let hits = |chosen: &[usize]| sets.iter().all(|s| chosen.iter().any(|c| s.contains(c)));
    let mut examined: u64 = 0;
    for k in 0..=upper.min(n) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            examined += 1;
            if examined > SEARCH_BUDGET {
                return None;
            }
            if hits(&idx) {
                return Some(idx);
            }
            if !next_combination(&mut idx, n) {
                break;
            }
        }
    }
    None
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Greedy fallback: repeatedly take the element hitting most open sets.
fn greedy_hitting_set(n: usize, sets: &[BTreeSet<usize>]) -> Vec<usize> {
    let mut open: Vec<&BTreeSet<usize>> = sets.iter().collect();
    let mut chosen = Vec::new();
    while !open.is_empty() {
        let best =
            (0..n).max_by_key(|e| (open.iter().filter(|s| s.contains(e)).count(), std::cmp::Reverse(*e))).unwrap();
        chosen.push(best);
        open.retain(|s| !s.contains(&best));
    }
    chosen.sort_unstable();
    chosen
}

type Signature = (String, usize, Vec<String>, Vec<String>);

pub fn learn_operators(transitions: &[Transition], ledger: &PreconditionLedger) -> LearnResult {
    let mut diagnostics = Vec::new();
    let kept = deduplicate(transitions, &mut diagnostics);

    let mut clusters: BTreeMap<Signature, Vec<(usize, LiftedEffects)>> = BTreeMap::new();
    for &i in &kept {
        let l = lift_effects(&transitions[i]);
        clusters.entry(l.signature()).or_default().push((i, l));
    }

    let mut operators = Vec::new();
    let mut per_schema: BTreeMap<String, usize> = BTreeMap::new();
    for ((schema, n_vars, _, _), members) in clusters {
        let k = per_schema.entry(schema.clone()).or_insert(0);
        *k += 1;
        let name = format!("{schema}_{k}");
        let params: Vec<String> = (0..n_vars).map(var).collect();

        let mut con_init: Option<BTreeSet<Atom>> = None;
        for (i, l) in &members {
            let lifted: BTreeSet<Atom> =
                transitions[*i].s_pre.iter().filter_map(|a| lift_atom(a, &l.binding)).collect();
            con_init = Some(match con_init {
                None => lifted,
                Some(c) => c.intersection(&lifted).cloned().collect(),
            });
        }
        let con_init = con_init.unwrap_or_default();
        let required: BTreeSet<Atom> = ledger.for_schema(&schema).map(ledger_atom).collect();
        for r in &required {
            if !con_init.contains(r) {
                diagnostics.push(Diagnostic::LedgerUnsupported { operator: name.clone(), literal: r.to_string() });
            }
        }
        // positive literals are preferred among equally small choices
        let mut candidates: Vec<Atom> = con_init.difference(&required).cloned().collect();
        candidates.sort_by_key(|a| (a.predicate.starts_with(NEG_PREFIX), a.to_string()));
        let mut op = Operator {
            name: name.clone(),
            schema: schema.clone(),
            params,
            pre: required.clone(),
            add: members[0].1.add.clone(),
            del: members[0].1.del.clone(),
            support: members.iter().map(|(i, _)| *i).collect(),
        };

        let mut sets: Vec<BTreeSet<usize>> = Vec::new();
        for &ti in &kept {
            let t = &transitions[ti];
            for sigma in bindings(&op, t) {
                if predicts_under(&op, t, &sigma) {
                    continue;
                }
                if required.iter().any(|a| !t.s_pre.contains(&substitute(a, &sigma))) {
                    continue;
                }
                let h: BTreeSet<usize> = candidates
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| !t.s_pre.contains(&substitute(a, &sigma)))
                    .map(|(j, _)| j)
                    .collect();
                if h.is_empty() {
                    diagnostics.push(Diagnostic::Unavoidable { operator: name.clone(), transition: ti });
                } else {
                    sets.push(h);
                }
            }
        }
        sets.sort();
        sets.dedup();
        let minimal: Vec<BTreeSet<usize>> =
            sets.iter().filter(|s| !sets.iter().any(|o| o != *s && o.is_subset(s))).cloned().collect();
        let greedy = greedy_hitting_set(candidates.len(), &minimal);
        let chosen = match min_hitting_set(candidates.len(), &minimal, greedy.len()) {
            Some(c) => c,
            None => {
                diagnostics.push(Diagnostic::SearchBudget { operator: name.clone() });
                greedy
            }
        };
        op.pre.extend(chosen.into_iter().map(|j| candidates[j].clone()));
        operators.push(op);
    }
    LearnResult { operators, diagnostics }
}
