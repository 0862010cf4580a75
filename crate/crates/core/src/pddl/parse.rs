use crate::dsl::Atom;

use super::{Action, Domain, PddlError, Problem};

const SUPPORTED_REQUIREMENTS: &[&str] = &[":strips"];

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Sym(String, u32, u32),
    List(Vec<Sexp>, u32, u32),
}

impl Sexp {
    fn pos(&self) -> (u32, u32) {
        match self {
            Sexp::Sym(_, l, c) | Sexp::List(_, l, c) => (*l, *c),
        }
    }

    fn sym(&self) -> Option<&str> {
        match self {
            Sexp::Sym(s, ..) => Some(s),
            Sexp::List(..) => None,
        }
    }

    fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(v, ..) => Some(v),
            Sexp::Sym(..) => None,
        }
    }
}

fn err(at: &Sexp, msg: impl Into<String>) -> PddlError {
    let (line, col) = at.pos();
    PddlError::Syntax { line, col, message: msg.into() }
}

fn read(src: &str) -> Result<Vec<Sexp>, PddlError> {
    let mut stack: Vec<(Vec<Sexp>, u32, u32)> = vec![(Vec::new(), 1, 1)];
    let (mut line, mut col) = (1u32, 1u32);
    let mut chars = src.chars().peekable();
    let mut sym = String::new();
    let mut sym_at = (1, 1);
    fn flush(sym: &mut String, at: (u32, u32), top: &mut Vec<Sexp>) {
        if !sym.is_empty() {
            top.push(Sexp::Sym(std::mem::take(sym).to_lowercase(), at.0, at.1));
        }
    }
    while let Some(c) = chars.next() {
        match c {
            ';' => {
                flush(&mut sym, sym_at, &mut stack.last_mut().unwrap().0);
                for c2 in chars.by_ref() {
                    if c2 == '\n' {
                        break;
                    }
                }
                line += 1;
                col = 1;
                continue;
            }
            '(' => {
                flush(&mut sym, sym_at, &mut stack.last_mut().unwrap().0);
                stack.push((Vec::new(), line, col));
            }
            ')' => {
                flush(&mut sym, sym_at, &mut stack.last_mut().unwrap().0);
                if stack.len() == 1 {
                    return Err(PddlError::Syntax { line, col, message: "unbalanced `)`".to_string() });
                }
                let (items, l, c0) = stack.pop().unwrap();
                stack.last_mut().unwrap().0.push(Sexp::List(items, l, c0));
            }
            c if c.is_whitespace() => flush(&mut sym, sym_at, &mut stack.last_mut().unwrap().0),
            c => {
                if sym.is_empty() {
                    sym_at = (line, col);
                }
                sym.push(c);
            }
        }
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    flush(&mut sym, sym_at, &mut stack.last_mut().unwrap().0);
    if stack.len() != 1 {
        let (_, l, c) = stack.last().unwrap();
        return Err(PddlError::Syntax { line: *l, col: *c, message: "unclosed `(`".to_string() });
    }
    Ok(stack.pop().unwrap().0)
}

fn atom(s: &Sexp) -> Result<Atom, PddlError> {
    let items = s.list().ok_or_else(|| err(s, "expected an atom"))?;
    let head = items.first().and_then(Sexp::sym).ok_or_else(|| err(s, "expected a predicate name"))?;
    if matches!(head, "and" | "or" | "not" | "imply" | "forall" | "exists" | "when") {
        return Err(PddlError::Unsupported(format!("`{head}` here")));
    }
    let args = items[1..]
        .iter()
        .map(|a| a.sym().map(str::to_string).ok_or_else(|| err(a, "expected a term")))
        .collect::<Result<Vec<_>, _>>()?;
    if args.iter().any(|a| a == "-") {
        return Err(PddlError::Unsupported(":typing".to_string()));
    }
    Ok(Atom { predicate: head.to_string(), args })
}

/// Conjunction members of `(and ...)` or a single formula.
fn conjuncts(s: &Sexp) -> Result<Vec<&Sexp>, PddlError> {
    let items = s.list().ok_or_else(|| err(s, "expected a formula"))?;
    match items.first().and_then(Sexp::sym) {
        Some("and") => Ok(items[1..].iter().collect()),
        None if items.is_empty() => Ok(Vec::new()),
        _ => Ok(vec![s]),
    }
}

fn variables(s: &Sexp) -> Result<Vec<String>, PddlError> {
    let items = s.list().ok_or_else(|| err(s, "expected a parameter list"))?;
    items
        .iter()
        .map(|v| match v.sym() {
            Some("-") => Err(PddlError::Unsupported(":typing".to_string())),
            Some(x) if x.starts_with('?') => Ok(x.to_string()),
            _ => Err(err(v, "expected a variable")),
        })
        .collect()
}

fn action(items: &[Sexp], at: &Sexp) -> Result<Action, PddlError> {
    let name = items.get(1).and_then(Sexp::sym).ok_or_else(|| err(at, "action needs a name"))?.to_string();
    let mut a = Action { name, params: Vec::new(), pre: Vec::new(), add: Vec::new(), del: Vec::new() };
    let mut i = 2;
    while i < items.len() {
        let key = items[i].sym().ok_or_else(|| err(&items[i], "expected a keyword"))?;
        let val = items.get(i + 1).ok_or_else(|| err(&items[i], "missing value"))?;
        match key {
            ":parameters" => a.params = variables(val)?,
            ":precondition" => {
                for c in conjuncts(val)? {
                    if c.list().and_then(|l| l.first()).and_then(Sexp::sym) == Some("not") {
                        return Err(PddlError::Unsupported(":negative-preconditions".to_string()));
                    }
                    a.pre.push(atom(c)?);
                }
            }
            ":effect" => {
                for c in conjuncts(val)? {
                    let l = c.list().ok_or_else(|| err(c, "expected an effect"))?;
                    match l.first().and_then(Sexp::sym) {
                        Some("not") => {
                            let inner = l.get(1).ok_or_else(|| err(c, "empty `not`"))?;
                            a.del.push(atom(inner)?);
                        }
                        Some("when") => return Err(PddlError::Unsupported(":conditional-effects".to_string())),
                        Some("forall") => return Err(PddlError::Unsupported("quantified effects".to_string())),
                        _ => a.add.push(atom(c)?),
                    }
                }
            }
            other => return Err(err(&items[i], format!("unknown action field `{other}`"))),
        }
        i += 2;
    }
    for x in a.pre.iter().chain(&a.add).chain(&a.del) {
        for v in &x.args {
            if v.starts_with('?') && !a.params.contains(v) {
                return Err(PddlError::Undefined { kind: "variable", name: v.clone() });
            }
        }
    }
    Ok(a)
}

fn header<'a>(top: &'a Sexp, kind: &str) -> Result<(&'a [Sexp], String), PddlError> {
    let items = top.list().ok_or_else(|| err(top, "expected `(define ...)`"))?;
    if items.first().and_then(Sexp::sym) != Some("define") {
        return Err(err(top, "expected `define`"));
    }
    let h = items.get(1).and_then(Sexp::list).ok_or_else(|| err(top, "missing header"))?;
    if h.first().and_then(Sexp::sym) != Some(kind) {
        return Err(err(top, format!("expected `({kind} <name>)`")));
    }
    let name = h.get(1).and_then(Sexp::sym).ok_or_else(|| err(top, "missing name"))?.to_string();
    Ok((&items[2..], name))
}

fn domain_from(top: &Sexp) -> Result<Domain, PddlError> {
    let (sections, name) = header(top, "domain")?;
    let mut d = Domain { name, requirements: Vec::new(), predicates: Vec::new(), actions: Vec::new() };
    for s in sections {
        let items = s.list().ok_or_else(|| err(s, "expected a section"))?;
        match items.first().and_then(Sexp::sym) {
            Some(":requirements") => {
                for r in &items[1..] {
                    let r = r.sym().ok_or_else(|| err(r, "expected a requirement"))?;
                    if !SUPPORTED_REQUIREMENTS.contains(&r) {
                        return Err(PddlError::Unsupported(r.to_string()));
                    }
                    d.requirements.push(r.to_string());
                }
            }
            Some(":predicates") => {
                for p in &items[1..] {
                    let a = atom(p)?;
                    d.predicates.push((a.predicate, a.args));
                }
            }
            Some(":action") => d.actions.push(action(items, s)?),
            Some(other @ (":types" | ":constants" | ":functions" | ":derived" | ":durative-action")) => {
                return Err(PddlError::Unsupported(other.to_string()))
            }
            _ => return Err(err(s, "unknown domain section")),
        }
    }
    for a in &d.actions {
        for x in a.pre.iter().chain(&a.add).chain(&a.del) {
            match d.predicates.iter().find(|(p, _)| p == &x.predicate) {
                None => return Err(PddlError::Undefined { kind: "predicate", name: x.predicate.clone() }),
                Some((_, ps)) if ps.len() != x.args.len() => {
                    return Err(PddlError::Arity { name: x.predicate.clone(), expected: ps.len(), got: x.args.len() })
                }
                _ => {}
            }
        }
    }
    Ok(d)
}

fn problem_from(top: &Sexp) -> Result<Problem, PddlError> {
    let (sections, name) = header(top, "problem")?;
    let mut p = Problem { name, domain: String::new(), objects: Vec::new(), init: Vec::new(), goal: Vec::new() };
    for s in sections {
        let items = s.list().ok_or_else(|| err(s, "expected a section"))?;
        match items.first().and_then(Sexp::sym) {
            Some(":domain") => {
                p.domain = items.get(1).and_then(Sexp::sym).ok_or_else(|| err(s, "missing domain name"))?.to_string()
            }
            Some(":objects") => {
                for o in &items[1..] {
                    match o.sym() {
                        Some("-") => return Err(PddlError::Unsupported(":typing".to_string())),
                        Some(x) => p.objects.push(x.to_string()),
                        None => return Err(err(o, "expected an object")),
                    }
                }
            }
            Some(":init") => {
                for a in &items[1..] {
                    p.init.push(atom(a)?);
                }
            }
            Some(":goal") => {
                let g = items.get(1).ok_or_else(|| err(s, "missing goal"))?;
                for c in conjuncts(g)? {
                    p.goal.push(atom(c)?);
                }
            }
            Some(":requirements") => {}
            _ => return Err(err(s, "unknown problem section")),
        }
    }
    for a in p.init.iter().chain(&p.goal) {
        for o in &a.args {
            if !p.objects.contains(o) {
                return Err(PddlError::Undefined { kind: "object", name: o.clone() });
            }
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PddlFile {
    Domain(Domain),
    Problem(Problem),
}

/// Parses a domain or problem file.
pub fn parse_pddl(src: &str) -> Result<PddlFile, PddlError> {
    let tops = read(src)?;
    let top = match tops.as_slice() {
        [t] => t,
        [] => return Err(PddlError::Syntax { line: 1, col: 1, message: "empty input".to_string() }),
        [_, extra, ..] => return Err(err(extra, "trailing input")),
    };
    let kind = top
        .list()
        .and_then(|l| l.get(1))
        .and_then(Sexp::list)
        .and_then(|h| h.first())
        .and_then(Sexp::sym)
        .unwrap_or("");
    match kind {
        "domain" => domain_from(top).map(PddlFile::Domain),
        "problem" => problem_from(top).map(PddlFile::Problem),
        _ => Err(err(top, "expected a domain or problem definition")),
    }
}

pub fn parse_domain(src: &str) -> Result<Domain, PddlError> {
    match parse_pddl(src)? {
        PddlFile::Domain(d) => Ok(d),
        PddlFile::Problem(_) => Err(PddlError::Syntax { line: 1, col: 1, message: "expected a domain".to_string() }),
    }
}

pub fn parse_problem(src: &str) -> Result<Problem, PddlError> {
    match parse_pddl(src)? {
        PddlFile::Problem(p) => Ok(p),
        PddlFile::Domain(_) => Err(PddlError::Syntax { line: 1, col: 1, message: "expected a problem".to_string() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{print_domain, print_problem};

    pub const BLOCKSWORLD: &str = "
; four-operator blocksworld
(define (domain blocksworld)
  (:requirements :strips)
  (:predicates (clear ?x) (on-table ?x) (arm-empty) (holding ?x) (on ?x ?y))
  (:action pickup
    :parameters (?ob)
    :precondition (and (clear ?ob) (on-table ?ob) (arm-empty))
    :effect (and (holding ?ob) (not (clear ?ob)) (not (on-table ?ob)) (not (arm-empty))))
  (:action putdown
    :parameters (?ob)
    :precondition (holding ?ob)
    :effect (and (clear ?ob) (arm-empty) (on-table ?ob) (not (holding ?ob))))
  (:action stack
    :parameters (?ob ?underob)
    :precondition (and (clear ?underob) (holding ?ob))
    :effect (and (arm-empty) (clear ?ob) (on ?ob ?underob) (not (clear ?underob)) (not (holding ?ob))))
  (:action unstack
    :parameters (?ob ?underob)
    :precondition (and (on ?ob ?underob) (clear ?ob) (arm-empty))
    :effect (and (holding ?ob) (clear ?underob) (not (on ?ob ?underob)) (not (clear ?ob)) (not (arm-empty)))))
";

    #[test]
    fn blocksworld_parses_and_round_trips() {
        let d = parse_domain(BLOCKSWORLD).unwrap();
        assert_eq!(d.actions.len(), 4);
        assert_eq!(d.action("putdown").unwrap().pre.len(), 1);
        let text = print_domain(&d);
        assert_eq!(print_domain(&parse_domain(&text).unwrap()), text);
    }

    #[test]
    fn rejects_unsupported_features() {
        let adl = BLOCKSWORLD.replace(":strips", ":strips :adl");
        assert_eq!(parse_domain(&adl), Err(PddlError::Unsupported(":adl".to_string())));
        let ce = BLOCKSWORLD.replace(":strips", ":conditional-effects");
        assert_eq!(parse_domain(&ce), Err(PddlError::Unsupported(":conditional-effects".to_string())));
        let neg = BLOCKSWORLD.replace("(holding ?ob)\n", "(not (holding ?ob))\n");
        assert!(matches!(parse_domain(&neg), Err(PddlError::Unsupported(_))));
    }

    #[test]
    fn syntax_errors_have_positions() {
        match parse_pddl("(define (domain x)\n  (:predicates (p ?x)") {
            Err(PddlError::Syntax { line, .. }) => assert!(line >= 1),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_pddl("(a))"), Err(PddlError::Syntax { line: 1, col: 4, .. })));
    }

    #[test]
    fn problem_round_trip_and_undefined_objects() {
        let src = "(define (problem p1) (:domain blocksworld) (:objects a b)
          (:init (on-table a) (on-table b) (clear a) (clear b) (arm-empty))
          (:goal (and (on a b))))";
        let p = parse_problem(src).unwrap();
        let text = print_problem(&p);
        assert_eq!(print_problem(&parse_problem(&text).unwrap()), text);
        let bad = src.replace("(on a b)", "(on a c)");
        assert!(matches!(parse_problem(&bad), Err(PddlError::Undefined { kind: "object", .. })));
    }
}
