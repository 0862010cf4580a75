//! Phrase tables mapping explanation wording to library concepts.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

use super::goal::normalize;

const PHRASEBOOK_JSON: &str = include_str!("../../data/phrasebook.json");

#[derive(Debug, Clone, Deserialize)]
pub struct Phrase {
    pub text: String,
    /// Predicate name this wording suggests, for phrase-driven naming.
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PhraseEntry {
    pub concept: String,
    /// Placeholders bound to the concept's arguments, in order.
    pub args: Vec<String>,
    /// Truth value the phrase refers to: the required value for
    /// preconditions, the current value for goal explanations.
    pub value: bool,
    pub phrases: Vec<Phrase>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Phrasebook {
    pub precondition: Vec<PhraseEntry>,
    pub unsatisfied: Vec<PhraseEntry>,
}

pub fn phrasebook() -> &'static Phrasebook {
    static BOOK: OnceLock<Phrasebook> = OnceLock::new();
    BOOK.get_or_init(|| serde_json::from_str(PHRASEBOOK_JSON).expect("phrasebook.json is valid"))
}

#[derive(Debug, Clone)]
pub struct PhraseMatch<'a> {
    pub entry: &'a PhraseEntry,
    pub phrase: &'a Phrase,
    /// Concept arguments as objects.
    pub objects: Vec<String>,
}

fn placeholders(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(i) = rest.find('{') {
        let Some(j) = rest[i..].find('}') else { break };
        let name = rest[i + 1..i + j].to_string();
        if !out.contains(&name) {
            out.push(name);
        }
        rest = &rest[i + j + 1..];
    }
    out
}

fn contains_words(haystack: &str, needle: &str) -> bool {
    let hb = haystack.as_bytes();
    let mut from = 0;
    while let Some(i) = haystack[from..].find(needle) {
        let s = from + i;
        let e = s + needle.len();
        let before = s == 0 || !hb[s - 1].is_ascii_alphanumeric();
        let after = e == hb.len() || !hb[e].is_ascii_alphanumeric();
        if before && after {
            return true;
        }
        from = s + 1;
    }
    false
}

fn assignments(vars: &[String], objects: &[String]) -> Vec<BTreeMap<String, String>> {
    let mut out = vec![BTreeMap::new()];
    for v in vars {
        let mut next = Vec::new();
        for partial in &out {
            for o in objects {
                if partial.values().any(|x| x == o) {
                    continue;
                }
                let mut m = partial.clone();
                m.insert(v.clone(), o.clone());
                next.push(m);
            }
        }
        out = next;
    }
    out
}

/// Finds the longest phrase (after substituting objects) contained in
/// `text`. Concept arguments whose placeholder does not appear in the phrase
/// are taken from `defaults` by position (`x` first, then `y`).
pub fn match_phrase<'a>(
    table: &'a [PhraseEntry],
    text: &str,
    objects: &[String],
    defaults: &[String],
) -> Option<PhraseMatch<'a>> {
    let t = normalize(text);
    let objects: Vec<String> = objects.iter().map(|o| o.to_lowercase()).collect();
    let mut best: Option<(usize, PhraseMatch<'a>)> = None;
    for entry in table {
        for phrase in &entry.phrases {
            let vars = placeholders(&phrase.text);
            for binding in assignments(&vars, &objects) {
                let mut candidate = phrase.text.to_lowercase();
                for (k, v) in &binding {
                    candidate = candidate.replace(&format!("{{{k}}}"), v);
                }
                if !contains_words(&t, &candidate) {
                    continue;
                }
                let args: Option<Vec<String>> = entry
                    .args
                    .iter()
                    .enumerate()
                    .map(|(i, a)| binding.get(a).cloned().or_else(|| defaults.get(i).cloned()))
                    .collect();
                let Some(args) = args else { continue };
                if best.as_ref().is_none_or(|(len, _)| candidate.len() > *len) {
                    best = Some((candidate.len(), PhraseMatch { entry, phrase, objects: args }));
                }
            }
        }
    }
    best.map(|(_, m)| m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn objs(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn longest_match_prefers_object_over_table() {
        let o = objs(&["cup", "table mat"]);
        let m = match_phrase(
            &phrasebook().unsatisfied,
            "you haven't achieved the goal because cup is not on table mat",
            &o,
            &[],
        )
        .unwrap();
        assert_eq!(m.entry.concept, "on_obj");
        assert_eq!(m.objects, objs(&["cup", "table mat"]));
        let m = match_phrase(&phrasebook().unsatisfied, "object cup is not on table", &o, &[]).unwrap();
        assert_eq!(m.entry.concept, "on_table");
    }

    #[test]
    fn unbound_arguments_default_to_action() {
        let o = objs(&["coaster", "red block"]);
        let m = match_phrase(
            &phrasebook().precondition,
            "You can't pick up coaster it is too large to be grasped.",
            &o,
            &objs(&["coaster"]),
        )
        .unwrap();
        assert_eq!(m.entry.concept, "graspable");
        assert_eq!(m.objects, objs(&["coaster"]));
    }

    #[test]
    fn word_boundaries() {
        assert!(contains_words("on red block now", "red block"));
        assert!(!contains_words("on red blocks", "red block"));
        assert!(!contains_words("shared block", "red block"));
    }
}
