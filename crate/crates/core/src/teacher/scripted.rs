//! Deterministic backend: phrase tables for reasoning, the reference
//! library for coding, rule rewrites and a variant search for correction.

use std::collections::BTreeMap;

use super::concepts::{self, normalize_description, parse_body, Concept};
use super::goal::parse_goal;
use super::phrasebook::{match_phrase, phrasebook};
use super::{
    consistent_with_labels, FeedbackEvent, FeedbackKind, LabeledSnapshot, Naming, NewPrecondition, PredicateSpec,
    ReasonContext, ReasonerOutput, TeacherBackendConfig, TeacherError, TeacherModules, ACTION_PARAMS,
};
use crate::dsl::{
    Atom, BinOp, ExecError, ExecErrorKind, Expr, ExprKind, Item, ItemKind, Literal, Predicate, Program, Registry, Span,
};

/// Tolerances tried, smallest first, when re-fitting `approx` calls.
pub const TOLERANCE_GRID: [f64; 5] = [0.001, 0.01, 0.1, 0.5, 1.0];

const DIV_GUARD: f64 = 0.000001;

#[derive(Debug, Clone)]
pub struct ScriptedTeacher {
    config: TeacherBackendConfig,
}

impl ScriptedTeacher {
    pub fn new(config: TeacherBackendConfig) -> Self {
        ScriptedTeacher { config }
    }

    /// Name of the registered or pending predicate for `concept`, adding a
    /// request to `pending` when none exists yet.
    fn resolve(
        &self,
        concept: &Concept,
        suggested: Option<&str>,
        registry: &Registry,
        pending: &mut Vec<PredicateSpec>,
    ) -> String {
        let want = normalize_description(concept.description);
        if let Some(p) = registry.positives().find(|p| normalize_description(&p.description) == want) {
            return p.name.clone();
        }
        if let Some(s) = pending.iter().find(|s| normalize_description(&s.description) == want) {
            return s.name.clone();
        }
        let base = match self.config.naming {
            Naming::Canonical => concept.name,
            Naming::ByPhrase => suggested.unwrap_or(concept.name),
        };
        let mut name = base.to_string();
        let mut k = 2;
        while registry.contains(&name) || pending.iter().any(|s| s.name == name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        pending.push(PredicateSpec {
            name: name.clone(),
            params: concept.params.iter().map(|s| s.to_string()).collect(),
            description: concept.description.to_string(),
        });
        name
    }
}

fn concept(key: &str) -> Result<&'static Concept, TeacherError> {
    concepts::by_key(key).ok_or_else(|| TeacherError::UnknownConcept(key.to_string()))
}

/// Replaces the literal tolerance of every `approx` call.
pub fn with_tolerance(body: &Expr, tol: f64) -> Expr {
    body.map(&mut |e| match &e.kind {
        ExprKind::Call(n, args) if n == "approx" && args.len() == 3 && matches!(args[2].kind, ExprKind::Num(_)) => {
            let mut args = args.clone();
            args[2] = Expr::num(tol);
            Expr::at(ExprKind::Call(n.clone(), args), e.span)
        }
        _ => e,
    })
}

fn has_literal_tolerance(body: &Expr) -> bool {
    let mut found = false;
    body.walk(&mut |e| {
        if let ExprKind::Call(n, args) = &e.kind {
            found |= n == "approx" && args.len() == 3 && matches!(args[2].kind, ExprKind::Num(_));
        }
    });
    found
}

/// Rule rewrites for runtime errors; `None` when no rule applies.
pub fn rewrite_for_error(body: &Expr, kind: ExecErrorKind) -> Option<Expr> {
    let mut changed = false;
    let out = body.map(&mut |e| match (&e.kind, kind) {
        (ExprKind::Index(base, idx), ExecErrorKind::IndexOutOfRange) => match idx.kind {
            ExprKind::Num(k) if k != 0.0 && k != 1.0 => {
                changed = true;
                Expr::at(ExprKind::Index(base.clone(), Box::new(Expr::num(1.0))), e.span)
            }
            _ => e,
        },
        (ExprKind::Binary(BinOp::Div, l, r), ExecErrorKind::DivisionByZero) => {
            let guarded = matches!(&r.kind, ExprKind::Call(n, _) if n == "max");
            if guarded {
                e
            } else {
                changed = true;
                let guard = Expr::call("max", vec![(**r).clone(), Expr::num(DIV_GUARD)]);
                Expr::at(ExprKind::Binary(BinOp::Div, l.clone(), Box::new(guard)), e.span)
            }
        }
        _ => e,
    });
    changed.then_some(out)
}

/// Library utilities needed by `body`, dependencies first, skipping those
/// already registered.
fn missing_utilities(body: &Expr, registry: &Registry) -> Vec<Item> {
    fn visit(name: &str, registry: &Registry, seen: &mut Vec<String>, out: &mut Vec<Item>) {
        if seen.iter().any(|s| s == name) || registry.utility_def(name).is_some() {
            return;
        }
        let Some(u) = concepts::utility(name) else { return };
        seen.push(name.to_string());
        let body = parse_body(u.body);
        for c in body.called_names() {
            visit(&c, registry, seen, out);
        }
        let mut meta = BTreeMap::new();
        meta.insert("desc".to_string(), u.description.to_string());
        out.push(Item {
            kind: ItemKind::Util,
            name: u.name.to_string(),
            params: u.params.iter().map(|s| s.to_string()).collect(),
            meta,
            body,
            span: Span::default(),
        });
    }
    let mut seen = Vec::new();
    let mut out = Vec::new();
    for c in body.called_names() {
        visit(&c, registry, &mut seen, &mut out);
    }
    out
}

impl TeacherModules for ScriptedTeacher {
    fn reason(&mut self, event: &FeedbackEvent, ctx: &ReasonContext) -> Result<ReasonerOutput, TeacherError> {
        let mut out = ReasonerOutput::default();
        let mut pending = Vec::new();
        match event.kind {
            FeedbackKind::GoalSpec => {
                let lits =
                    parse_goal(&event.text, ctx.objects).ok_or_else(|| TeacherError::Unparsed(event.text.clone()))?;
                let mut goal = Vec::new();
                for l in lits {
                    let name = self.resolve(concept(l.concept)?, None, ctx.registry, &mut pending);
                    let args: Vec<&str> = l.args.iter().map(String::as_str).collect();
                    goal.push(Literal::new(Atom::new(name, &args), l.value));
                }
                out.symbolic_goal = Some(goal);
            }
            FeedbackKind::GoalAchievedSignal => {
                out.literal_labels = ctx.goal.map(<[Literal]>::to_vec).unwrap_or_default();
            }
            FeedbackKind::FeasibleActionSignal => {
                if let Some(a) = &event.action {
                    out.literal_labels = ctx.ledger.ground(a);
                }
            }
            FeedbackKind::UnsatisfiedGoalExplanation => {
                let m = match_phrase(&phrasebook().unsatisfied, &event.text, ctx.objects, &[])
                    .ok_or_else(|| TeacherError::Unparsed(event.text.clone()))?;
                let name =
                    self.resolve(concept(&m.entry.concept)?, m.phrase.name.as_deref(), ctx.registry, &mut pending);
                let args: Vec<&str> = m.objects.iter().map(String::as_str).collect();
                out.literal_labels.push(Literal::new(Atom::new(name, &args), m.entry.value));
            }
            FeedbackKind::InfeasibleActionExplanation => {
                let action = event.action.as_ref().ok_or_else(|| TeacherError::Unparsed(event.text.clone()))?;
                let m = match_phrase(&phrasebook().precondition, &event.text, ctx.objects, &action.args)
                    .ok_or_else(|| TeacherError::Unparsed(event.text.clone()))?;
                let name =
                    self.resolve(concept(&m.entry.concept)?, m.phrase.name.as_deref(), ctx.registry, &mut pending);
                let mut lifted = Vec::new();
                for o in &m.objects {
                    let i =
                        action.args.iter().position(|a| a.eq_ignore_ascii_case(o)).ok_or_else(|| {
                            TeacherError::Unliftable { object: o.clone(), action: action.to_string() }
                        })?;
                    lifted.push(ACTION_PARAMS[i]);
                }
                let ground: Vec<&str> = m.objects.iter().map(String::as_str).collect();
                out.literal_labels.push(Literal::new(Atom::new(name.clone(), &ground), !m.entry.value));
                out.new_action_preconditions = Some(NewPrecondition {
                    schema: action.schema.clone(),
                    literals: vec![Literal::new(Atom::new(name, &lifted), m.entry.value)],
                });
            }
        }
        out.new_predicate_descriptions = pending;
        Ok(out)
    }

    fn code(&mut self, specs: &[PredicateSpec], registry: &Registry) -> Result<Program, TeacherError> {
        let mut items: Vec<Item> = Vec::new();
        for spec in specs {
            let c = concepts::by_description(&spec.description)
                .ok_or_else(|| TeacherError::UnknownConcept(spec.description.clone()))?;
            let src = match (self.config.miscalibrated_drafts, c.draft) {
                (true, Some(d)) => d,
                _ => c.body,
            };
            let body = parse_body(src);
            for u in missing_utilities(&body, registry) {
                if !items.iter().any(|i| i.name == u.name) {
                    items.push(u);
                }
            }
            let mut meta = BTreeMap::new();
            meta.insert("desc".to_string(), spec.description.clone());
            items.push(Item {
                kind: ItemKind::Pred,
                name: spec.name.clone(),
                params: c.params.iter().map(|s| s.to_string()).collect(),
                meta,
                body,
                span: Span::default(),
            });
        }
        Ok(Program { items })
    }

    fn correct_execution(
        &mut self,
        pred: &Predicate,
        _registry: &Registry,
        error: &ExecError,
    ) -> Result<Expr, TeacherError> {
        rewrite_for_error(&pred.body, error.kind).ok_or_else(|| TeacherError::CorrectionFailed {
            predicate: pred.name.clone(),
            reason: format!("no rewrite for {}", error.kind),
        })
    }

    fn correct_alignment(
        &mut self,
        pred: &Predicate,
        registry: &Registry,
        labels: &[LabeledSnapshot],
    ) -> Result<Expr, TeacherError> {
        if consistent_with_labels(registry, pred, &pred.body, labels) {
            return Ok(pred.body.clone());
        }
        let mut candidates = Vec::new();
        if has_literal_tolerance(&pred.body) {
            candidates.extend(TOLERANCE_GRID.iter().map(|t| with_tolerance(&pred.body, *t)));
        }
        if let Some(c) = concepts::by_description(&pred.description) {
            let variants: Vec<Expr> = c.variants.iter().map(|v| parse_body(v)).collect();
            candidates.extend(variants.iter().cloned());
            for v in variants.iter().filter(|v| has_literal_tolerance(v)) {
                candidates.extend(TOLERANCE_GRID.iter().map(|t| with_tolerance(v, *t)));
            }
        }
        for cand in candidates {
            let mut probe = registry.clone();
            if probe.set_body(&pred.name, cand.clone()).is_err() {
                continue;
            }
            if consistent_with_labels(registry, pred, &cand, labels) {
                return Ok(cand);
            }
        }
        Err(TeacherError::CorrectionFailed {
            predicate: pred.name.clone(),
            reason: "no candidate body agrees with all labels".to_string(),
        })
    }

    fn translate_goal(
        &mut self,
        text: &str,
        registry: &Registry,
        objects: &[String],
    ) -> Result<Vec<Literal>, TeacherError> {
        if text.trim().is_empty() {
            return Err(TeacherError::EmptyGoal);
        }
        let lits = parse_goal(text, objects).ok_or_else(|| TeacherError::Translation(text.to_string()))?;
        lits.into_iter()
            .map(|l| {
                let want = normalize_description(concept(l.concept)?.description);
                let p = registry
                    .positives()
                    .find(|p| normalize_description(&p.description) == want)
                    .ok_or_else(|| TeacherError::Translation(format!("no learned predicate for `{}`", l.concept)))?;
                let args: Vec<&str> = l.args.iter().map(String::as_str).collect();
                Ok(Literal::new(Atom::new(p.name.clone(), &args), l.value))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{print_expr, PredicateSource};
    use crate::teacher::PreconditionLedger;
    use crate::world::{DomainId, GroundedAction, ObjectSpec, SceneSpec, WorldState};

    fn teacher() -> ScriptedTeacher {
        ScriptedTeacher::new(TeacherBackendConfig::default())
    }

    fn register(t: &mut ScriptedTeacher, r: &mut Registry, specs: &[PredicateSpec]) {
        let prog = t.code(specs, r).unwrap();
        for item in prog.items {
            let params: Vec<&str> = item.params.iter().map(String::as_str).collect();
            let desc = item.description().to_string();
            match item.kind {
                ItemKind::Util => r.add_utility(&item.name, &params, &desc, item.body).unwrap(),
                ItemKind::Pred => r.add_pair(&item.name, &params, &desc, item.body, PredicateSource::Scripted).unwrap(),
            }
        }
    }

    fn objs(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn event(kind: FeedbackKind, text: &str, action: Option<GroundedAction>) -> FeedbackEvent {
        FeedbackEvent { kind, text: text.to_string(), action, step: 0 }
    }

    #[test]
    fn infeasible_pick_yields_graspable_precondition() {
        let mut t = teacher();
        let r = Registry::new();
        let ledger = PreconditionLedger::new();
        let objects = objs(&["coaster", "red block"]);
        let ctx = ReasonContext {
            domain: DomainId::StoreObjects,
            objects: &objects,
            registry: &r,
            ledger: &ledger,
            goal: None,
        };
        let out = t
            .reason(
                &event(
                    FeedbackKind::InfeasibleActionExplanation,
                    "You can't pick up coaster it is too large to be grasped.",
                    Some(GroundedAction::new("pick_up", &["coaster"])),
                ),
                &ctx,
            )
            .unwrap();
        assert_eq!(out.new_predicate_descriptions.len(), 1);
        assert_eq!(out.new_predicate_descriptions[0].name, "obj_graspable");
        assert_eq!(out.literal_labels, vec![Literal::new(Atom::new("obj_graspable", &["coaster"]), false)]);
        let pre = out.new_action_preconditions.unwrap();
        assert_eq!(pre.schema, "pick_up");
        assert_eq!(pre.literals, vec![Literal::new(Atom::new("obj_graspable", &["a"]), true)]);
    }

    #[test]
    fn goal_spec_requests_unknown_goal_predicates() {
        let mut t = teacher();
        let r = Registry::new();
        let ledger = PreconditionLedger::new();
        let objects = objs(&["coaster", "red block"]);
        let ctx = ReasonContext {
            domain: DomainId::StoreObjects,
            objects: &objects,
            registry: &r,
            ledger: &ledger,
            goal: None,
        };
        let out = t.reason(&event(FeedbackKind::GoalSpec, "Stack red block on coaster.", None), &ctx).unwrap();
        assert_eq!(
            out.symbolic_goal.unwrap(),
            vec![Literal::new(Atom::new("obj_on_obj", &["red block", "coaster"]), true)]
        );
        assert_eq!(out.new_predicate_descriptions[0].params, objs(&["a", "b"]));
    }

    #[test]
    fn phrase_naming_reuses_by_description() {
        let mut t = ScriptedTeacher::new(TeacherBackendConfig { naming: Naming::ByPhrase, ..Default::default() });
        let mut r = Registry::new();
        let ledger = PreconditionLedger::new();
        let objects = objs(&["coaster", "red block"]);
        let pick = GroundedAction::new("pick_up", &["coaster"]);
        let ctx = ReasonContext {
            domain: DomainId::StoreObjects,
            objects: &objects,
            registry: &r,
            ledger: &ledger,
            goal: None,
        };
        let out = t
            .reason(
                &event(
                    FeedbackKind::InfeasibleActionExplanation,
                    "you can't execute pick_up(coaster) because object coaster is too large for the gripper to pick up",
                    Some(pick.clone()),
                ),
                &ctx,
            )
            .unwrap();
        assert_eq!(out.new_predicate_descriptions[0].name, "obj_size_ok_for_gripper");
        register(&mut t, &mut r, &out.new_predicate_descriptions);
        let ctx = ReasonContext {
            domain: DomainId::StoreObjects,
            objects: &objects,
            registry: &r,
            ledger: &ledger,
            goal: None,
        };
        let again = t
            .reason(
                &event(
                    FeedbackKind::InfeasibleActionExplanation,
                    "you can't execute pick_up(coaster) because coaster can not be grasped by the gripper as it is too wide",
                    Some(pick),
                ),
                &ctx,
            )
            .unwrap();
        assert!(again.new_predicate_descriptions.is_empty());
        assert_eq!(again.literal_labels[0].atom.predicate, "obj_size_ok_for_gripper");
    }

    #[test]
    fn translate_goal_examples() {
        let mut t = teacher();
        let mut r = Registry::new();
        let spec = |k: &str| {
            let c = concepts::by_key(k).unwrap();
            PredicateSpec {
                name: c.name.to_string(),
                params: c.params.iter().map(|s| s.to_string()).collect(),
                description: c.description.to_string(),
            }
        };
        register(&mut t, &mut r, &[spec("on_obj"), spec("on_table"), spec("filled"), spec("inside_obj")]);
        let g = t.translate_goal("put plate on table mat", &r, &objs(&["plate", "table mat"])).unwrap();
        assert_eq!(g, vec![Literal::new(Atom::new("obj_on_obj", &["plate", "table mat"]), true)]);
        let g = t
            .translate_goal(
                "pour water and put sausage in pot, pour water into cup and put it on table",
                &r,
                &objs(&["pot", "cup", "sausage"]),
            )
            .unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(t.translate_goal("  ", &r, &objs(&["pot"])), Err(TeacherError::EmptyGoal));
    }

    #[test]
    fn execution_rewrites() {
        let body = parse_body("get_object_size(a)[2] < 3.0");
        let fixed = rewrite_for_error(&body, ExecErrorKind::IndexOutOfRange).unwrap();
        assert_eq!(print_expr(&fixed), "get_object_size(a)[1] < 3");
        let body = parse_body("get_object_size(a)[0] / (get_object_size(a)[1] - get_object_size(a)[1]) > 1");
        let fixed = rewrite_for_error(&body, ExecErrorKind::DivisionByZero).unwrap();
        assert!(print_expr(&fixed).contains("max(get_object_size(a)[1] - get_object_size(a)[1], 0.000001)"));
        assert!(rewrite_for_error(&fixed, ExecErrorKind::DivisionByZero).is_none());
        assert!(rewrite_for_error(&parse_body("has_water(a)"), ExecErrorKind::ObjectNotFound).is_none());
    }

    fn stacked_world(top: &str, top_cat: &str) -> WorldState {
        let scene = SceneSpec {
            objects: vec![ObjectSpec::new(top, top_cat), ObjectSpec::new("blue block", "block")],
            stacked: vec![(top.to_string(), "blue block".to_string())],
        };
        WorldState::reset(DomainId::StoreObjects, &scene, 3).unwrap()
    }

    #[test]
    fn alignment_widens_containment_to_overlap() {
        let mut t = teacher();
        let mut r = Registry::new();
        let c = concepts::by_key("on_obj").unwrap();
        let spec = PredicateSpec { name: c.name.into(), params: objs(&["a", "b"]), description: c.description.into() };
        register(&mut t, &mut r, std::slice::from_ref(&spec));
        r.set_body("obj_on_obj", parse_body(c.variants[1])).unwrap();
        let w = stacked_world("green box", "box");
        let labels = vec![LabeledSnapshot {
            snapshot: w.perceive(),
            literal: Literal::new(Atom::new("obj_on_obj", &["green box", "blue block"]), true),
            step: 0,
        }];
        let p = r.get("obj_on_obj").unwrap().clone();
        assert!(!consistent_with_labels(&r, &p, &p.body, &labels));
        let fixed = t.correct_alignment(&p, &r, &labels).unwrap();
        assert_eq!(print_expr(&fixed), "rests_on(a, b)");
    }

    #[test]
    fn alignment_is_identity_without_disagreement() {
        let mut t = teacher();
        let mut r = Registry::new();
        let c = concepts::by_key("on_obj").unwrap();
        let spec = PredicateSpec { name: c.name.into(), params: objs(&["a", "b"]), description: c.description.into() };
        register(&mut t, &mut r, &[spec]);
        let p = r.get("obj_on_obj").unwrap().clone();
        assert_eq!(t.correct_alignment(&p, &r, &[]).unwrap(), p.body);
    }

    #[test]
    fn alignment_picks_smallest_sufficient_tolerance() {
        let mut t = teacher();
        let mut r = Registry::new();
        r.add_pair(
            "near_top",
            &["a", "b"],
            "object a sits at the top of object b",
            parse_body("approx(get_object_center(a)[1] - get_object_size(a)[1] / 2, get_object_center(b)[1] + get_object_size(b)[1] / 2 + 0.05, 0.01)"),
            PredicateSource::Remote,
        )
        .unwrap();
        let w = stacked_world("red block", "block");
        let labels = vec![LabeledSnapshot {
            snapshot: w.perceive(),
            literal: Literal::new(Atom::new("near_top", &["red block", "blue block"]), true),
            step: 0,
        }];
        let p = r.get("near_top").unwrap().clone();
        let fixed = t.correct_alignment(&p, &r, &labels).unwrap();
        assert!(print_expr(&fixed).ends_with(", 0.1)"), "{}", print_expr(&fixed));
    }
}
