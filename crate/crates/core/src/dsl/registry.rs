use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::eval::{Evaluator, UtilityLookup};
use super::parser::{parse_program, KEYWORDS};
use super::printer::{print_item, print_program};
use super::state::{ordered_tuples, Atom, SymbolicState};
use super::typeck::{builtin, check_item, Signatures, Ty};
use super::DslError;
use crate::world::PerceptionSnapshot;

pub const NEG_PREFIX: &str = "neg_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateSource {
    /// Pre-registered example shown to the coder.
    InContextExample,
    Scripted,
    Remote,
    Bootstrap,
}

impl PredicateSource {
    pub fn as_str(self) -> &'static str {
        match self {
            PredicateSource::InContextExample => "in_context_example",
            PredicateSource::Scripted => "scripted",
            PredicateSource::Remote => "remote",
            PredicateSource::Bootstrap => "bootstrap",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Self::InContextExample, Self::Scripted, Self::Remote, Self::Bootstrap].into_iter().find(|p| p.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub name: String,
    pub params: Vec<String>,
    pub description: String,
    pub body: Expr,
    pub partner: String,
    pub negated: bool,
    pub source: PredicateSource,
}

impl Predicate {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// Name of the positive member of this predicate's pair.
    pub fn positive_name(&self) -> &str {
        if self.negated {
            &self.partner
        } else {
            &self.name
        }
    }

    pub fn to_item(&self) -> Item {
        let mut meta = BTreeMap::new();
        meta.insert("desc".to_string(), self.description.clone());
        meta.insert("source".to_string(), self.source.as_str().to_string());
        Item {
            kind: ItemKind::Pred,
            name: self.name.clone(),
            params: self.params.clone(),
            meta,
            body: self.body.clone(),
            span: Span::default(),
        }
    }

    pub fn source_text(&self) -> String {
        print_item(&self.to_item())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utility {
    pub name: String,
    pub params: Vec<String>,
    pub description: String,
    pub body: Expr,
    pub ret: Ty,
}

impl Utility {
    pub fn to_item(&self) -> Item {
        let mut meta = BTreeMap::new();
        if !self.description.is_empty() {
            meta.insert("desc".to_string(), self.description.clone());
        }
        Item {
            kind: ItemKind::Util,
            name: self.name.clone(),
            params: self.params.clone(),
            meta,
            body: self.body.clone(),
            span: Span::default(),
        }
    }
}

/// The learned predicate set with its utilities. Entries are shared and
/// replaced wholesale, so clones are cheap snapshots.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    utilities: BTreeMap<String, Arc<Utility>>,
    predicates: BTreeMap<String, Arc<Predicate>>,
    version: u64,
}

impl Signatures for Registry {
    fn utility_signature(&self, name: &str) -> Option<(usize, Ty)> {
        self.utilities.get(name).map(|u| (u.params.len(), u.ret))
    }
}

impl UtilityLookup for Registry {
    fn utility(&self, name: &str) -> Option<(&[String], &Expr)> {
        self.utilities.get(name).map(|u| (u.params.as_slice(), &u.body))
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bumped on every mutation.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Predicate> {
        self.predicates.get(name).map(|p| p.as_ref())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.predicates.contains_key(name)
    }

    pub fn utility_def(&self, name: &str) -> Option<&Utility> {
        self.utilities.get(name).map(|u| u.as_ref())
    }

    pub fn utilities(&self) -> impl Iterator<Item = &Utility> {
        self.utilities.values().map(|u| u.as_ref())
    }

    /// All predicates of both polarities, by name.
    pub fn predicates(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates.values().map(|p| p.as_ref())
    }

    pub fn positives(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates().filter(|p| !p.negated)
    }

    pub fn positive_names(&self) -> Vec<String> {
        self.positives().map(|p| p.name.clone()).collect()
    }

    /// Positive predicate name to `(params, description)`.
    pub fn descriptions(&self) -> BTreeMap<String, (Vec<String>, String)> {
        self.positives().map(|p| (p.name.clone(), (p.params.clone(), p.description.clone()))).collect()
    }

    fn name_taken(&self, name: &str) -> bool {
        KEYWORDS.contains(&name)
            || name == "objects"
            || builtin(name).is_some()
            || self.utilities.contains_key(name)
            || self.predicates.contains_key(name)
    }

    fn check_new_name(&self, name: &str) -> Result<(), DslError> {
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(DslError::InvalidName(name.to_string()));
        }
        if self.name_taken(name) {
            return Err(DslError::Duplicate(name.to_string()));
        }
        Ok(())
    }

    pub fn add_utility(&mut self, name: &str, params: &[&str], description: &str, body: Expr) -> Result<(), DslError> {
        self.check_new_name(name)?;
        let util = self.checked_utility(name, params.iter().map(|s| s.to_string()).collect(), description, body)?;
        self.utilities.insert(name.to_string(), Arc::new(util));
        self.version += 1;
        Ok(())
    }

    fn checked_utility(
        &self,
        name: &str,
        params: Vec<String>,
        description: &str,
        body: Expr,
    ) -> Result<Utility, DslError> {
        let item = Item {
            kind: ItemKind::Util,
            name: name.to_string(),
            params: params.clone(),
            meta: BTreeMap::new(),
            body: body.clone(),
            span: Span::default(),
        };
        let ret = check_item(&item, self)?;
        let util = Utility { name: name.to_string(), params, description: one_line(description), body, ret };
        let mut probe = self.clone();
        probe.utilities.insert(name.to_string(), Arc::new(util.clone()));
        probe.check_acyclic()?;
        Ok(util)
    }

    /// Fails if utility calls form a cycle.
    pub fn check_acyclic(&self) -> Result<(), DslError> {
        fn visit(r: &Registry, n: &str, stack: &mut Vec<String>, done: &mut BTreeSet<String>) -> Result<(), DslError> {
            if done.contains(n) {
                return Ok(());
            }
            if stack.iter().any(|s| s == n) {
                return Err(DslError::Cycle(format!("{} -> {n}", stack.join(" -> "))));
            }
            stack.push(n.to_string());
            if let Some(u) = r.utilities.get(n) {
                for c in u.body.called_names() {
                    if r.utilities.contains_key(&c) {
                        visit(r, &c, stack, done)?;
                    }
                }
            }
            stack.pop();
            done.insert(n.to_string());
            Ok(())
        }
        let mut done = BTreeSet::new();
        for n in self.utilities.keys() {
            visit(self, n, &mut Vec::new(), &mut done)?;
        }
        Ok(())
    }

    fn checked_pred(&self, name: &str, params: &[String], body: &Expr) -> Result<(), DslError> {
        let item = Item {
            kind: ItemKind::Pred,
            name: name.to_string(),
            params: params.to_vec(),
            meta: BTreeMap::new(),
            body: body.clone(),
            span: Span::default(),
        };
        check_item(&item, self).map(|_| ())
    }

    /// Registers `name` and its complement `neg_<name>` (body `not (<body>)`).
    pub fn add_pair(
        &mut self,
        name: &str,
        params: &[&str],
        description: &str,
        body: Expr,
        source: PredicateSource,
    ) -> Result<(), DslError> {
        if name.starts_with(NEG_PREFIX) {
            return Err(DslError::InvalidName(name.to_string()));
        }
        self.check_new_name(name)?;
        let neg = format!("{NEG_PREFIX}{name}");
        self.check_new_name(&neg)?;
        let params: Vec<String> = params.iter().map(|s| s.to_string()).collect();
        self.checked_pred(name, &params, &body)?;
        let description = one_line(description);
        let neg_desc = format!("negation of {name}: {description}");
        self.predicates.insert(
            neg.clone(),
            Arc::new(Predicate {
                name: neg.clone(),
                params: params.clone(),
                description: neg_desc,
                body: Expr::not(body.clone()),
                partner: name.to_string(),
                negated: true,
                source,
            }),
        );
        self.predicates.insert(
            name.to_string(),
            Arc::new(Predicate {
                name: name.to_string(),
                params,
                description,
                body,
                partner: neg,
                negated: false,
                source,
            }),
        );
        self.version += 1;
        Ok(())
    }

    /// Replaces the body of a positive predicate and its partner.
    pub fn set_body(&mut self, name: &str, body: Expr) -> Result<(), DslError> {
        let p = self.predicates.get(name).ok_or_else(|| DslError::UnknownPredicate(name.to_string()))?;
        if p.negated {
            return Err(DslError::InvalidName(name.to_string()));
        }
        self.checked_pred(name, &p.params, &body)?;
        let mut pos = (**p).clone();
        let mut neg = (*self.predicates[&pos.partner]).clone();
        pos.body = body.clone();
        neg.body = Expr::not(body);
        self.predicates.insert(neg.name.clone(), Arc::new(neg));
        self.predicates.insert(pos.name.clone(), Arc::new(pos));
        self.version += 1;
        Ok(())
    }

    pub fn set_utility_body(&mut self, name: &str, body: Expr) -> Result<(), DslError> {
        let u = self.utilities.get(name).ok_or_else(|| DslError::UnknownPredicate(name.to_string()))?;
        let util = self.checked_utility(name, u.params.clone(), &u.description.clone(), body)?;
        self.utilities.insert(name.to_string(), Arc::new(util));
        // callers of this utility may no longer type-check
        for p in self.positives() {
            self.checked_pred(&p.name, &p.params, &p.body)?;
        }
        self.version += 1;
        Ok(())
    }

    pub fn remove_pair(&mut self, name: &str) -> Result<(), DslError> {
        let p = self.predicates.get(name).ok_or_else(|| DslError::UnknownPredicate(name.to_string()))?;
        let (pos, neg) =
            if p.negated { (p.partner.clone(), p.name.clone()) } else { (p.name.clone(), p.partner.clone()) };
        self.predicates.remove(&pos);
        self.predicates.remove(&neg);
        self.version += 1;
        Ok(())
    }

    pub fn evaluate(&self, name: &str, snapshot: &PerceptionSnapshot, args: &[&str]) -> Result<bool, DslError> {
        let p = self.predicates.get(name).ok_or_else(|| DslError::UnknownPredicate(name.to_string()))?;
        if p.params.len() != args.len() {
            return Err(DslError::Arity { name: name.to_string(), expected: p.params.len(), got: args.len() });
        }
        self.evaluate_body(p, &p.body, snapshot, args)
    }

    /// Evaluates a candidate body under `p`'s signature.
    pub fn evaluate_body(
        &self,
        p: &Predicate,
        body: &Expr,
        snapshot: &PerceptionSnapshot,
        args: &[&str],
    ) -> Result<bool, DslError> {
        Evaluator::new(snapshot, self).eval_bool(&p.params, args, body).map_err(|e| {
            let frame = format!(
                "in pred {}({})",
                p.name,
                p.params.iter().zip(args).map(|(k, v)| format!("{k} = {v:?}")).collect::<Vec<_>>().join(", ")
            );
            DslError::Exec { atom: Atom::new(p.name.clone(), args), error: e.with_frame(frame) }
        })
    }

    pub fn evaluate_atom(&self, atom: &Atom, snapshot: &PerceptionSnapshot) -> Result<bool, DslError> {
        let args: Vec<&str> = atom.args.iter().map(String::as_str).collect();
        self.evaluate(&atom.predicate, snapshot, &args)
    }

    /// All positive atoms over ordered tuples of distinct objects.
    pub fn parse_state(&self, snapshot: &PerceptionSnapshot) -> Result<SymbolicState, DslError> {
        let objects: Vec<&str> = snapshot.object_names().collect();
        let mut state = SymbolicState::new();
        let mut tuples: BTreeMap<usize, Vec<Vec<&str>>> = BTreeMap::new();
        for p in self.predicates() {
            let ts = tuples.entry(p.arity()).or_insert_with(|| ordered_tuples(&objects, p.arity()));
            for t in ts.iter() {
                if self.evaluate_body(p, &p.body, snapshot, t)? {
                    state.insert(Atom::new(p.name.clone(), t));
                }
            }
        }
        Ok(state)
    }

    /// Utilities in dependency order, then positive predicates.
    pub fn to_program(&self) -> Program {
        let mut order: Vec<&Utility> = Vec::new();
        let mut seen = BTreeSet::new();
        fn visit<'a>(r: &'a Registry, n: &str, seen: &mut BTreeSet<String>, order: &mut Vec<&'a Utility>) {
            if !seen.insert(n.to_string()) {
                return;
            }
            if let Some(u) = r.utilities.get(n) {
                for c in u.body.called_names() {
                    visit(r, &c, seen, order);
                }
                order.push(u);
            }
        }
        for n in self.utilities.keys() {
            visit(self, n, &mut seen, &mut order);
        }
        let mut items: Vec<Item> = order.into_iter().map(Utility::to_item).collect();
        items.extend(self.positives().map(Predicate::to_item));
        Program { items }
    }

    pub fn to_pscript(&self) -> String {
        print_program(&self.to_program())
    }

    /// Loads a `.pscript` bundle; negation partners are regenerated.
    pub fn from_pscript(src: &str) -> Result<Registry, DslError> {
        let prog = parse_program(src)?;
        let mut r = Registry::new();
        for item in prog.items {
            let params: Vec<&str> = item.params.iter().map(String::as_str).collect();
            match item.kind {
                ItemKind::Util => r.add_utility(&item.name, &params, item.description(), item.body.clone())?,
                ItemKind::Pred => {
                    let source = item
                        .meta
                        .get("source")
                        .and_then(|s| PredicateSource::parse(s))
                        .unwrap_or(PredicateSource::Scripted);
                    r.add_pair(&item.name, &params, item.description(), item.body.clone(), source)?
                }
            }
        }
        Ok(r)
    }

    /// Copies utilities and predicate pairs from `other` that are not yet
    /// present here, marking predicates as bootstrapped.
    pub fn absorb(&mut self, other: &Registry) -> Result<Vec<String>, DslError> {
        let mut added = Vec::new();
        for item in other.to_program().items {
            if self.name_taken(&item.name) {
                continue;
            }
            let params: Vec<&str> = item.params.iter().map(String::as_str).collect();
            match item.kind {
                ItemKind::Util => self.add_utility(&item.name, &params, item.description(), item.body.clone())?,
                ItemKind::Pred => {
                    self.add_pair(
                        &item.name,
                        &params,
                        item.description(),
                        item.body.clone(),
                        PredicateSource::Bootstrap,
                    )?;
                    added.push(item.name.clone());
                }
            }
        }
        Ok(added)
    }
}
