//! Goal-sentence understanding for the scripted backend.

use regex::Regex;

/// A goal literal over a library concept, before names are resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptLiteral {
    pub concept: &'static str,
    pub args: Vec<String>,
    pub value: bool,
}

fn lit(concept: &'static str, args: &[&str]) -> ConceptLiteral {
    ConceptLiteral { concept, args: args.iter().map(|s| s.to_string()).collect(), value: true }
}

pub fn normalize(text: &str) -> String {
    text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ").trim_end_matches(['.', '!']).trim().to_string()
}

fn object_alternation(objects: &[String]) -> String {
    let mut objs: Vec<String> = objects.iter().map(|o| o.to_lowercase()).collect();
    objs.sort_by_key(|o| std::cmp::Reverse(o.len()));
    let alts: Vec<String> = objs.iter().map(|o| regex::escape(o)).collect();
    format!("(?:{})", alts.join("|"))
}

/// Parses "x on y, z on x" chains.
fn chain(text: &str, obj: &str) -> Option<Vec<ConceptLiteral>> {
    let pair = Regex::new(&format!("^(?:the )?({obj}) on (?:top of )?(?:the )?({obj})$")).unwrap();
    text.split(", ")
        .map(|part| {
            let part = part.trim().trim_start_matches("and ").trim();
            pair.captures(part).map(|c| lit("on_obj", &[&c[1], &c[2]]))
        })
        .collect()
}

fn item_list(text: &str, obj: &str) -> Option<Vec<String>> {
    let one = Regex::new(&format!("^(?:the )?({obj})$")).unwrap();
    text.split(", ").flat_map(|p| p.split(" and ")).map(|p| one.captures(p.trim()).map(|c| c[1].to_string())).collect()
}

/// Extracts the goal literals of a task sentence. Returns `None` when no
/// known sentence shape matches.
pub fn parse_goal(text: &str, objects: &[String]) -> Option<Vec<ConceptLiteral>> {
    if objects.is_empty() {
        return None;
    }
    let t = normalize(text);
    let o = object_alternation(objects);
    let re = |pat: &str| Regex::new(&format!("^{}$", pat.replace("OBJ", &format!("({o})")))).unwrap();

    if let Some(c) = re("store objects on OBJ following the order: (.+)").captures(&t) {
        return chain(&c[2], &o);
    }
    if let Some(c) = re("set a breakfast table with (.+)").captures(&t) {
        return chain(&c[1], &o);
    }
    if let Some(c) = re("pour water and put (.+) in OBJ, pour water into OBJ and put it on (?:the )?table").captures(&t)
    {
        let items = item_list(&c[1], &o)?;
        let pot = &c[2];
        let cup = &c[3];
        let mut out = vec![lit("filled", &[pot])];
        out.extend(items.iter().map(|i| lit("inside_obj", &[i, pot])));
        out.push(lit("filled", &[cup]));
        out.push(lit("on_table", &[cup]));
        return Some(out);
    }
    if let Some(c) = re("pour water into OBJ and put it on (?:the )?table").captures(&t) {
        return Some(vec![lit("filled", &[&c[1]]), lit("on_table", &[&c[1]])]);
    }
    if let Some(c) = re("(?:pour water into|fill) OBJ(?: with water)?").captures(&t) {
        return Some(vec![lit("filled", &[&c[1]])]);
    }
    if let Some(c) = re("(?:put|place) OBJ (?:into|inside|in) OBJ").captures(&t) {
        return Some(vec![lit("inside_obj", &[&c[1], &c[2]])]);
    }
    if let Some(c) = re("(?:put|place|move) OBJ (?:on|onto) (?:the )?table").captures(&t) {
        return Some(vec![lit("on_table", &[&c[1]])]);
    }
    if let Some(c) = re("(?:stack|put|place|move) OBJ (?:on top of|onto|on) (?:the )?OBJ").captures(&t) {
        return Some(vec![lit("on_obj", &[&c[1], &c[2]])]);
    }
    None
}
