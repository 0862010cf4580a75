use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::DslError;

pub const MAX_QUANTIFIER_DEPTH: usize = 2;
pub const MAX_PREDICATE_ARITY: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ty {
    Num,
    Vec2,
    Str,
    Bool,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ty::Num => "num",
            Ty::Vec2 => "vec2",
            Ty::Str => "str",
            Ty::Bool => "bool",
        })
    }
}

/// Perception builtins and numeric helpers: `(name, parameter types, result)`.
pub const BUILTINS: &[(&str, &[Ty], Ty)] = &[
    ("get_object_center", &[Ty::Str], Ty::Vec2),
    ("get_object_size", &[Ty::Str], Ty::Vec2),
    ("get_object_category", &[Ty::Str], Ty::Str),
    ("gripper_holding", &[], Ty::Str),
    ("table_height", &[], Ty::Num),
    ("has_water", &[Ty::Str], Ty::Bool),
    ("inside_container", &[Ty::Str], Ty::Str),
    ("min", &[Ty::Num, Ty::Num], Ty::Num),
    ("max", &[Ty::Num, Ty::Num], Ty::Num),
    ("abs", &[Ty::Num], Ty::Num),
    ("approx", &[Ty::Num, Ty::Num, Ty::Num], Ty::Bool),
];

pub fn builtin(name: &str) -> Option<(&'static [Ty], Ty)> {
    BUILTINS.iter().find(|b| b.0 == name).map(|b| (b.1, b.2))
}

/// Signature lookup for user utilities: parameter count and result type.
pub trait Signatures {
    fn utility_signature(&self, name: &str) -> Option<(usize, Ty)>;
}

impl<F: Fn(&str) -> Option<(usize, Ty)>> Signatures for F {
    fn utility_signature(&self, name: &str) -> Option<(usize, Ty)> {
        self(name)
    }
}

fn type_err(e: &Expr, msg: impl Into<String>) -> DslError {
    DslError::Type { line: e.span.line, col: e.span.col, message: msg.into() }
}

/// Checks an item and returns the type of its body.
pub fn check_item(item: &Item, sigs: &dyn Signatures) -> Result<Ty, DslError> {
    if item.kind == ItemKind::Pred && item.params.len() > MAX_PREDICATE_ARITY {
        return Err(type_err(
            &item.body,
            format!("predicate `{}` has more than {MAX_PREDICATE_ARITY} parameters", item.name),
        ));
    }
    if item.body.quantifier_depth() > MAX_QUANTIFIER_DEPTH {
        return Err(type_err(&item.body, format!("quantifier nesting deeper than {MAX_QUANTIFIER_DEPTH}")));
    }
    let mut scope: Vec<String> = item.params.clone();
    let ty = infer(&item.body, &mut scope, sigs)?;
    if item.kind == ItemKind::Pred && ty != Ty::Bool {
        return Err(type_err(&item.body, format!("predicate `{}` must return bool, found {ty}", item.name)));
    }
    Ok(ty)
}

pub fn infer(e: &Expr, scope: &mut Vec<String>, sigs: &dyn Signatures) -> Result<Ty, DslError> {
    let expect = |got: Ty, want: Ty, at: &Expr| {
        if got == want {
            Ok(())
        } else {
            Err(type_err(at, format!("expected {want}, found {got}")))
        }
    };
    Ok(match &e.kind {
        ExprKind::Num(_) => Ty::Num,
        ExprKind::Str(_) => Ty::Str,
        ExprKind::Bool(_) => Ty::Bool,
        ExprKind::Var(v) => {
            if scope.iter().any(|s| s == v) {
                Ty::Str
            } else {
                return Err(type_err(e, format!("unknown variable `{v}`")));
            }
        }
        ExprKind::Call(name, args) => {
            let (params, ret): (Vec<Ty>, Ty) = if let Some((p, r)) = builtin(name) {
                (p.to_vec(), r)
            } else if let Some((n, r)) = sigs.utility_signature(name) {
                (vec![Ty::Str; n], r)
            } else if name == "objects" {
                return Err(type_err(e, "`objects()` may only appear in a quantifier"));
            } else {
                return Err(type_err(e, format!("unknown function `{name}`")));
            };
            if params.len() != args.len() {
                return Err(type_err(e, format!("`{name}` takes {} arguments, got {}", params.len(), args.len())));
            }
            for (a, want) in args.iter().zip(params) {
                let got = infer(a, scope, sigs)?;
                expect(got, want, a)?;
            }
            ret
        }
        ExprKind::Index(base, idx) => {
            expect(infer(base, scope, sigs)?, Ty::Vec2, base)?;
            expect(infer(idx, scope, sigs)?, Ty::Num, idx)?;
            Ty::Num
        }
        ExprKind::Unary(UnOp::Not, inner) => {
            expect(infer(inner, scope, sigs)?, Ty::Bool, inner)?;
            Ty::Bool
        }
        ExprKind::Unary(UnOp::Neg, inner) => match infer(inner, scope, sigs)? {
            t @ (Ty::Num | Ty::Vec2) => t,
            t => return Err(type_err(inner, format!("cannot negate {t}"))),
        },
        ExprKind::Binary(op, l, r) => {
            let lt = infer(l, scope, sigs)?;
            let rt = infer(r, scope, sigs)?;
            match op {
                BinOp::And | BinOp::Or => {
                    expect(lt, Ty::Bool, l)?;
                    expect(rt, Ty::Bool, r)?;
                    Ty::Bool
                }
                BinOp::Eq | BinOp::Ne => {
                    expect(rt, lt, r)?;
                    Ty::Bool
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    expect(lt, Ty::Num, l)?;
                    expect(rt, Ty::Num, r)?;
                    Ty::Bool
                }
                BinOp::Add | BinOp::Sub => match (lt, rt) {
                    (Ty::Num, Ty::Num) => Ty::Num,
                    (Ty::Vec2, Ty::Vec2) => Ty::Vec2,
                    _ => return Err(type_err(e, format!("cannot apply `{}` to {lt} and {rt}", op.symbol()))),
                },
                BinOp::Mul => match (lt, rt) {
                    (Ty::Num, Ty::Num) => Ty::Num,
                    (Ty::Vec2, Ty::Num) | (Ty::Num, Ty::Vec2) => Ty::Vec2,
                    _ => return Err(type_err(e, format!("cannot multiply {lt} by {rt}"))),
                },
                BinOp::Div => match (lt, rt) {
                    (Ty::Num, Ty::Num) => Ty::Num,
                    (Ty::Vec2, Ty::Num) => Ty::Vec2,
                    _ => return Err(type_err(e, format!("cannot divide {lt} by {rt}"))),
                },
            }
        }
        ExprKind::If(c, t, f) => {
            expect(infer(c, scope, sigs)?, Ty::Bool, c)?;
            let tt = infer(t, scope, sigs)?;
            let ft = infer(f, scope, sigs)?;
            expect(ft, tt, f)?;
            tt
        }
        ExprKind::Quant(_, v, body) => {
            scope.push(v.clone());
            let bt = infer(body, scope, sigs);
            scope.pop();
            expect(bt?, Ty::Bool, body)?;
            Ty::Bool
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parser::parse_program;

    fn check(src: &str) -> Result<Ty, DslError> {
        let p = parse_program(src).unwrap();
        let none = |_: &str| -> Option<(usize, Ty)> { None };
        check_item(&p.items[0], &none)
    }

    #[test]
    fn well_typed_examples() {
        assert_eq!(check("pred gripper_empty() { gripper_holding() == \"\" }").unwrap(), Ty::Bool);
        assert_eq!(
            check("pred obj_on_table(a) { approx(get_object_center(a)[1] - get_object_size(a)[1]/2, table_height(), 0.1) }")
                .unwrap(),
            Ty::Bool
        );
        assert_eq!(check("util half(a) { get_object_size(a) / 2 }").unwrap(), Ty::Vec2);
    }

    #[test]
    fn object_parameter_is_not_a_number() {
        assert!(matches!(check("pred bad(a) { a + 1 }"), Err(DslError::Type { .. })));
    }

    #[test]
    fn other_type_errors() {
        for bad in [
            "pred p(a) { get_object_size(a) }",
            "pred p(a) { b == a }",
            "pred p(a) { unknown(a) }",
            "pred p(a, b, c) { true }",
            "pred p() { any x in objects(): any y in objects(): any z in objects(): x == z }",
            "pred p(a) { has_water(a, a) }",
            "pred p(a) { objects() == a }",
            "pred p(a) { if true then 1 else \"x\" }",
        ] {
            assert!(matches!(check(bad), Err(DslError::Type { .. })), "{bad}");
        }
    }
}
