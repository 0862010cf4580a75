mod common;

use common::{reachable_worlds, train};
use predlearn::dsl::{
    ordered_tuples, parse_expr, print_expr, Atom, BinOp, Expr, ExprKind, Quantifier, Registry, UnOp, NEG_PREFIX,
};
use predlearn::world::DomainId;
use proptest::prelude::*;

const BINOPS: [BinOp; 12] = [
    BinOp::Or,
    BinOp::And,
    BinOp::Eq,
    BinOp::Ne,
    BinOp::Lt,
    BinOp::Le,
    BinOp::Gt,
    BinOp::Ge,
    BinOp::Add,
    BinOp::Sub,
    BinOp::Mul,
    BinOp::Div,
];

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (-40i32..40).prop_map(|k| Expr::num(k as f64 / 4.0)),
        "[a-z \"\\\\\n\t]{0,6}".prop_map(|s| Expr::new(ExprKind::Str(s))),
        any::<bool>().prop_map(|b| Expr::new(ExprKind::Bool(b))),
        prop::sample::select(vec!["x", "y", "obj", "a1"]).prop_map(Expr::var),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 48, 3, |inner| {
        prop_oneof![
            (prop::sample::select(vec!["f", "get_object_center", "g2"]), prop::collection::vec(inner.clone(), 0..3))
                .prop_map(|(n, args)| Expr::call(n, args)),
            (inner.clone(), inner.clone()).prop_map(|(b, i)| Expr::new(ExprKind::Index(Box::new(b), Box::new(i)))),
            (any::<bool>(), inner.clone()).prop_map(|(not, e)| {
                Expr::new(ExprKind::Unary(if not { UnOp::Not } else { UnOp::Neg }, Box::new(e)))
            }),
            (prop::sample::select(BINOPS.to_vec()), inner.clone(), inner.clone())
                .prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            (inner.clone(), inner.clone(), inner.clone()).prop_map(|(c, t, e)| Expr::new(ExprKind::If(
                Box::new(c),
                Box::new(t),
                Box::new(e)
            ))),
            (any::<bool>(), prop::sample::select(vec!["o", "z"]), inner).prop_map(|(all, v, e)| {
                let q = if all { Quantifier::All } else { Quantifier::Any };
                Expr::new(ExprKind::Quant(q, v.to_string(), Box::new(e)))
            }),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn printed_expressions_parse_back(e in expr()) {
        let text = print_expr(&e);
        let back = parse_expr(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        prop_assert_eq!(&back, &e, "{}", text);
        prop_assert_eq!(print_expr(&back), text);
    }
}

fn trained_registries() -> Vec<(DomainId, Registry)> {
    DomainId::ALL.iter().map(|&d| (d, train(d, 0, false).session.registry().clone())).collect()
}

#[test]
fn learned_programs_are_fixed_points() {
    for (domain, reg) in trained_registries() {
        let text = reg.to_pscript();
        let back = Registry::from_pscript(&text).unwrap();
        assert_eq!(back.to_pscript(), text, "{domain}");
        assert_eq!(back.positive_names(), reg.positive_names());
        let worlds: Vec<_> = reachable_worlds(domain, 40, 1).iter().map(|w| w.perceive()).collect();
        for name in reg.positive_names() {
            assert!(predlearn::dsl::extensionally_equal((&reg, &name), (&back, &name), &worlds).unwrap());
        }
    }
}

#[test]
fn complements_partition_every_tuple() {
    for (domain, reg) in trained_registries() {
        for w in reachable_worlds(domain, 120, 9) {
            let snap = w.perceive();
            let state = reg.parse_state(&snap).unwrap();
            let objects: Vec<&str> = snap.object_names().collect();
            for p in reg.positives() {
                let neg = format!("{NEG_PREFIX}{}", p.name);
                for t in ordered_tuples(&objects, p.arity()) {
                    let pos = reg.evaluate(&p.name, &snap, &t).unwrap();
                    assert_ne!(pos, reg.evaluate(&neg, &snap, &t).unwrap(), "{domain} {}{t:?}", p.name);
                    let a = state.contains(&Atom::new(p.name.clone(), &t));
                    let b = state.contains(&Atom::new(neg.clone(), &t));
                    assert!(a ^ b, "{domain}: exactly one of {}{t:?} and its complement", p.name);
                    assert_eq!(a, pos);
                }
            }
        }
    }
}

#[test]
fn removing_a_pair_only_drops_its_atoms() {
    for (domain, reg) in trained_registries() {
        let worlds = reachable_worlds(domain, 30, 4);
        for name in reg.positive_names() {
            let mut smaller = reg.clone();
            smaller.remove_pair(&name).unwrap();
            let neg = format!("{NEG_PREFIX}{name}");
            for w in &worlds {
                let full = reg.parse_state(&w.perceive()).unwrap();
                let part = smaller.parse_state(&w.perceive()).unwrap();
                assert!(part.iter().all(|a| full.contains(a)));
                assert!(full.minus(&part).iter().all(|a| a.predicate == name || a.predicate == neg));
            }
        }
    }
}
