use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::*;
use super::printer::print_expr;
use crate::world::{PerceptionError, PerceptionSnapshot};

const MAX_CALL_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Vec2([f64; 2]),
    Str(String),
    Bool(bool),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(n) => write!(f, "{n}"),
            Value::Vec2([x, y]) => write!(f, "({x}, {y})"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecErrorKind {
    ObjectNotFound,
    DivisionByZero,
    IndexOutOfRange,
    TypeMismatch,
    UnknownFunction,
    ArityMismatch,
    RecursionLimit,
}

impl fmt::Display for ExecErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExecErrorKind::ObjectNotFound => "object not found",
            ExecErrorKind::DivisionByZero => "division by zero",
            ExecErrorKind::IndexOutOfRange => "index out of range",
            ExecErrorKind::TypeMismatch => "type mismatch",
            ExecErrorKind::UnknownFunction => "unknown function",
            ExecErrorKind::ArityMismatch => "arity mismatch",
            ExecErrorKind::RecursionLimit => "call depth exceeded",
        })
    }
}

/// A runtime failure with the chain of frames it propagated through,
/// innermost first.
#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{kind}: {message}")]
pub struct ExecError {
    pub kind: ExecErrorKind,
    pub message: String,
    pub trace: Vec<String>,
}

impl ExecError {
    pub fn new(kind: ExecErrorKind, message: impl Into<String>, at: &Expr) -> ExecError {
        ExecError {
            kind,
            message: message.into(),
            trace: vec![format!("at {}:{} `{}`", at.span.line, at.span.col, print_expr(at))],
        }
    }

    pub fn with_frame(mut self, frame: impl Into<String>) -> ExecError {
        self.trace.push(frame.into());
        self
    }

    /// Multi-line rendering used in correction prompts and logs.
    pub fn render(&self) -> String {
        let mut s = format!("ExecError: {self}");
        for f in &self.trace {
            s.push_str("\n  ");
            s.push_str(f);
        }
        s
    }
}

/// Resolves user utilities during evaluation.
pub trait UtilityLookup {
    fn utility(&self, name: &str) -> Option<(&[String], &Expr)>;
}

pub struct NoUtilities;

impl UtilityLookup for NoUtilities {
    fn utility(&self, _: &str) -> Option<(&[String], &Expr)> {
        None
    }
}

pub struct Evaluator<'a> {
    pub snapshot: &'a PerceptionSnapshot,
    pub utils: &'a dyn UtilityLookup,
    depth: usize,
}

type Env = Vec<(String, Value)>;

impl<'a> Evaluator<'a> {
    pub fn new(snapshot: &'a PerceptionSnapshot, utils: &'a dyn UtilityLookup) -> Self {
        Evaluator { snapshot, utils, depth: 0 }
    }

    /// Evaluates `body` with `params` bound to object names.
    pub fn call(&mut self, params: &[String], args: &[&str], body: &Expr) -> Result<Value, ExecError> {
        if params.len() != args.len() {
            return Err(ExecError::new(
                ExecErrorKind::ArityMismatch,
                format!("expected {} arguments, got {}", params.len(), args.len()),
                body,
            ));
        }
        let mut env: Env = params.iter().zip(args).map(|(p, a)| (p.clone(), Value::Str(a.to_string()))).collect();
        self.eval(body, &mut env)
    }

    pub fn eval_bool(&mut self, params: &[String], args: &[&str], body: &Expr) -> Result<bool, ExecError> {
        match self.call(params, args, body)? {
            Value::Bool(b) => Ok(b),
            other => Err(ExecError::new(ExecErrorKind::TypeMismatch, format!("expected bool, got {other}"), body)),
        }
    }

    fn perception<T>(&self, r: Result<T, PerceptionError>, at: &Expr) -> Result<T, ExecError> {
        r.map_err(|e| ExecError::new(ExecErrorKind::ObjectNotFound, e.to_string(), at))
    }

    fn eval(&mut self, e: &Expr, env: &mut Env) -> Result<Value, ExecError> {
        let mismatch = |what: &str| ExecError::new(ExecErrorKind::TypeMismatch, what.to_string(), e);
        match &e.kind {
            ExprKind::Num(n) => Ok(Value::Num(*n)),
            ExprKind::Str(s) => Ok(Value::Str(s.clone())),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Var(v) => env
                .iter()
                .rev()
                .find(|(n, _)| n == v)
                .map(|(_, val)| val.clone())
                .ok_or_else(|| mismatch(&format!("unbound variable `{v}`"))),
            ExprKind::Call(name, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a, env)?);
                }
                self.apply(name, vals, e)
            }
            ExprKind::Index(base, idx) => {
                let b = self.eval(base, env)?;
                let i = self.eval(idx, env)?;
                match (b, i) {
                    (Value::Vec2(v), Value::Num(i)) => {
                        if i == 0.0 || i == 1.0 {
                            Ok(Value::Num(v[i as usize]))
                        } else {
                            Err(ExecError::new(
                                ExecErrorKind::IndexOutOfRange,
                                format!("index {i} out of range for a 2-vector"),
                                e,
                            ))
                        }
                    }
                    _ => Err(mismatch("indexing needs a vec2 and a number")),
                }
            }
            ExprKind::Unary(UnOp::Not, inner) => match self.eval(inner, env)? {
                Value::Bool(b) => Ok(Value::Bool(!b)),
                _ => Err(mismatch("`not` needs a bool")),
            },
            ExprKind::Unary(UnOp::Neg, inner) => match self.eval(inner, env)? {
                Value::Num(n) => Ok(Value::Num(-n)),
                Value::Vec2([x, y]) => Ok(Value::Vec2([-x, -y])),
                _ => Err(mismatch("`-` needs a number")),
            },
            ExprKind::Binary(op, l, r) => self.binary(*op, l, r, env, e),
            ExprKind::If(c, t, f) => match self.eval(c, env)? {
                Value::Bool(true) => self.eval(t, env),
                Value::Bool(false) => self.eval(f, env),
                _ => Err(mismatch("`if` condition must be bool")),
            },
            ExprKind::Quant(q, v, body) => {
                let names: Vec<String> = self.snapshot.object_names().map(str::to_string).collect();
                for n in names {
                    env.push((v.clone(), Value::Str(n)));
                    let r = self.eval(body, env);
                    env.pop();
                    match (r?, q) {
                        (Value::Bool(true), Quantifier::Any) => return Ok(Value::Bool(true)),
                        (Value::Bool(false), Quantifier::All) => return Ok(Value::Bool(false)),
                        (Value::Bool(_), _) => {}
                        _ => return Err(mismatch("quantifier body must be bool")),
                    }
                }
                Ok(Value::Bool(*q == Quantifier::All))
            }
        }
    }

    fn binary(&mut self, op: BinOp, l: &Expr, r: &Expr, env: &mut Env, e: &Expr) -> Result<Value, ExecError> {
        let mismatch = || ExecError::new(ExecErrorKind::TypeMismatch, format!("bad operands for `{}`", op.symbol()), e);
        if matches!(op, BinOp::And | BinOp::Or) {
            let Value::Bool(lv) = self.eval(l, env)? else { return Err(mismatch()) };
            if (op == BinOp::And && !lv) || (op == BinOp::Or && lv) {
                return Ok(Value::Bool(lv));
            }
            let Value::Bool(rv) = self.eval(r, env)? else { return Err(mismatch()) };
            return Ok(Value::Bool(rv));
        }
        let lv = self.eval(l, env)?;
        let rv = self.eval(r, env)?;
        use Value::*;
        Ok(match (op, lv, rv) {
            (BinOp::Eq, a, b) => Bool(a == b),
            (BinOp::Ne, a, b) => Bool(a != b),
            (BinOp::Lt, Num(a), Num(b)) => Bool(a < b),
            (BinOp::Le, Num(a), Num(b)) => Bool(a <= b),
            (BinOp::Gt, Num(a), Num(b)) => Bool(a > b),
            (BinOp::Ge, Num(a), Num(b)) => Bool(a >= b),
            (BinOp::Add, Num(a), Num(b)) => Num(a + b),
            (BinOp::Sub, Num(a), Num(b)) => Num(a - b),
            (BinOp::Add, Vec2(a), Vec2(b)) => Vec2([a[0] + b[0], a[1] + b[1]]),
            (BinOp::Sub, Vec2(a), Vec2(b)) => Vec2([a[0] - b[0], a[1] - b[1]]),
            (BinOp::Mul, Num(a), Num(b)) => Num(a * b),
            (BinOp::Mul, Vec2(a), Num(k)) | (BinOp::Mul, Num(k), Vec2(a)) => Vec2([a[0] * k, a[1] * k]),
            (BinOp::Div, _, Num(0.0)) => {
                return Err(ExecError::new(ExecErrorKind::DivisionByZero, "division by zero", e))
            }
            (BinOp::Div, Num(a), Num(b)) => Num(a / b),
            (BinOp::Div, Vec2(a), Num(k)) => Vec2([a[0] / k, a[1] / k]),
            _ => return Err(mismatch()),
        })
    }

    fn apply(&mut self, name: &str, args: Vec<Value>, at: &Expr) -> Result<Value, ExecError> {
        use Value::*;
        let s = self.snapshot;
        let bad = || ExecError::new(ExecErrorKind::TypeMismatch, format!("bad arguments for `{name}`"), at);
        match (name, args.as_slice()) {
            ("get_object_center", [Str(o)]) => Ok(Vec2(self.perception(s.get_object_center(o), at)?)),
            ("get_object_size", [Str(o)]) => Ok(Vec2(self.perception(s.get_object_size(o), at)?)),
            ("get_object_category", [Str(o)]) => Ok(Str(self.perception(s.get_object_category(o), at)?.to_string())),
            ("gripper_holding", []) => Ok(Str(s.gripper_holding().to_string())),
            ("table_height", []) => Ok(Num(s.table_height())),
            ("has_water", [Str(o)]) => Ok(Bool(self.perception(s.has_water(o), at)?)),
            ("inside_container", [Str(o)]) => Ok(Str(self.perception(s.inside_container(o), at)?.to_string())),
            ("min", [Num(a), Num(b)]) => Ok(Num(a.min(*b))),
            ("max", [Num(a), Num(b)]) => Ok(Num(a.max(*b))),
            ("abs", [Num(a)]) => Ok(Num(a.abs())),
            ("approx", [Num(a), Num(b), Num(tol)]) => Ok(Bool((a - b).abs() <= *tol)),
            (
                "get_object_center"
                | "get_object_size"
                | "get_object_category"
                | "gripper_holding"
                | "table_height"
                | "has_water"
                | "inside_container"
                | "min"
                | "max"
                | "abs"
                | "approx",
                _,
            ) => Err(bad()),
            _ => {
                let Some((params, body)) = self.utils.utility(name) else {
                    return Err(ExecError::new(
                        ExecErrorKind::UnknownFunction,
                        format!("unknown function `{name}`"),
                        at,
                    ));
                };
                if params.len() != args.len() {
                    return Err(ExecError::new(ExecErrorKind::ArityMismatch, format!("`{name}` arity"), at));
                }
                if self.depth >= MAX_CALL_DEPTH {
                    return Err(ExecError::new(ExecErrorKind::RecursionLimit, format!("calling `{name}`"), at));
                }
                let mut env: Env = params.iter().cloned().zip(args.iter().cloned()).collect();
                let frame = format!(
                    "in util {name}({})",
                    params.iter().zip(&args).map(|(p, v)| format!("{p} = {v}")).collect::<Vec<_>>().join(", ")
                );
                self.depth += 1;
                let r = self.eval(body, &mut env);
                self.depth -= 1;
                r.map_err(|e| e.with_frame(frame))
            }
        }
    }
}
