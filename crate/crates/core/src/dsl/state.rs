use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::DslError;

/// A predicate applied to objects, e.g. `obj_on_obj(red block, coaster)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: &[&str]) -> Atom {
        Atom { predicate: predicate.into(), args: args.iter().map(|s| s.to_string()).collect() }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.predicate, self.args.join(", "))
    }
}

impl FromStr for Atom {
    type Err = DslError;

    fn from_str(s: &str) -> Result<Atom, DslError> {
        let s = s.trim();
        let bad = || DslError::Literal(s.to_string());
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let predicate = s[..open].trim();
        if predicate.is_empty() || !predicate.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(bad());
        }
        let args =
            s[open + 1..s.len() - 1].split(',').map(|a| a.trim().to_string()).filter(|a| !a.is_empty()).collect();
        Ok(Atom { predicate: predicate.to_string(), args })
    }
}

impl Serialize for Atom {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Atom {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Atom, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An atom with a truth value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub atom: Atom,
    pub value: bool,
}

impl Literal {
    pub fn new(atom: Atom, value: bool) -> Literal {
        Literal { atom, value }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.value {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "not {}", self.atom)
        }
    }
}

/// Set of positive ground atoms.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymbolicState(pub BTreeSet<Atom>);

impl SymbolicState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, a: &Atom) -> bool {
        self.0.contains(a)
    }

    pub fn insert(&mut self, a: Atom) -> bool {
        self.0.insert(a)
    }

    pub fn remove(&mut self, a: &Atom) -> bool {
        self.0.remove(a)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.0.iter()
    }

    /// Atoms in `self` but not in `other`.
    pub fn minus(&self, other: &SymbolicState) -> BTreeSet<Atom> {
        self.0.difference(&other.0).cloned().collect()
    }

    /// Whether a literal holds: positive atoms must be present, negative absent.
    pub fn satisfies(&self, lit: &Literal) -> bool {
        self.contains(&lit.atom) == lit.value
    }
}

impl FromIterator<Atom> for SymbolicState {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        SymbolicState(iter.into_iter().collect())
    }
}

impl fmt::Display for SymbolicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// All ordered tuples of `k` distinct objects.
pub fn ordered_tuples<'a>(objects: &[&'a str], k: usize) -> Vec<Vec<&'a str>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec<'a>(objects: &[&'a str], k: usize, cur: &mut Vec<&'a str>, out: &mut Vec<Vec<&'a str>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for o in objects {
            if !cur.contains(o) {
                cur.push(o);
                rec(objects, k, cur, out);
                cur.pop();
            }
        }
    }
    rec(objects, k, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atom_text_round_trip() {
        let a: Atom = "obj_on_obj(red block, coaster)".parse().unwrap();
        assert_eq!(a, Atom::new("obj_on_obj", &["red block", "coaster"]));
        assert_eq!(a.to_string().parse::<Atom>().unwrap(), a);
        let z: Atom = "gripper_empty()".parse().unwrap();
        assert!(z.args.is_empty());
        assert!("no parens".parse::<Atom>().is_err());
    }

    #[test]
    fn tuple_counts_are_permutations() {
        let objs = ["a", "b", "c", "d"];
        assert_eq!(ordered_tuples(&objs, 0).len(), 1);
        assert_eq!(ordered_tuples(&objs, 1).len(), 4);
        assert_eq!(ordered_tuples(&objs, 2).len(), 12);
    }

    #[test]
    fn state_serializes_as_strings() {
        let s: SymbolicState = [Atom::new("gripper_empty", &[])].into_iter().collect();
        assert_eq!(serde_json::to_string(&s).unwrap(), "[\"gripper_empty()\"]");
    }
}
