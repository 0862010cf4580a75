//! PredScript: the predicate language, its checker and evaluator, and the
//! predicate registry that parses continuous states into symbolic ones.
//!
//! ```text
//! # desc: check whether object a is on the table
//! pred obj_on_table(a) {
//!     approx(get_object_center(a)[1] - get_object_size(a)[1] / 2, table_height(), 0.1)
//! }
//! ```

pub mod ast;
pub mod eval;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod registry;
pub mod state;
pub mod typeck;

use thiserror::Error;

pub use ast::{BinOp, Expr, ExprKind, Item, ItemKind, Program, Quantifier, Span, UnOp};
pub use eval::{ExecError, ExecErrorKind, Value};
pub use parser::{parse_expr, parse_program};
pub use printer::{print_expr, print_item, print_program};
pub use registry::{Predicate, PredicateSource, Registry, Utility, NEG_PREFIX};
pub use state::{ordered_tuples, Atom, Literal, SymbolicState};
pub use typeck::Ty;

use crate::world::PerceptionSnapshot;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("type error at {line}:{col}: {message}")]
    Type { line: u32, col: u32, message: String },
    #[error("malformed literal `{0}`")]
    Literal(String),
    #[error("`{0}` is already defined")]
    Duplicate(String),
    #[error("invalid name `{0}`")]
    InvalidName(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("utility call cycle: {0}")]
    Cycle(String),
    #[error("`{name}` takes {expected} arguments, got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("evaluating {atom}: {error}")]
    Exec { atom: Atom, error: ExecError },
}

impl DslError {
    pub fn exec_error(&self) -> Option<&ExecError> {
        match self {
            DslError::Exec { error, .. } => Some(error),
            _ => None,
        }
    }
}

/// True iff the two predicates agree on every ordered tuple of distinct
/// objects in every snapshot.
pub fn extensionally_equal(
    p: (&Registry, &str),
    q: (&Registry, &str),
    snapshots: &[PerceptionSnapshot],
) -> Result<bool, DslError> {
    let pp = p.0.get(p.1).ok_or_else(|| DslError::UnknownPredicate(p.1.to_string()))?;
    let qq = q.0.get(q.1).ok_or_else(|| DslError::UnknownPredicate(q.1.to_string()))?;
    if pp.arity() != qq.arity() {
        return Err(DslError::Arity { name: q.1.to_string(), expected: pp.arity(), got: qq.arity() });
    }
    for s in snapshots {
        let objects: Vec<&str> = s.object_names().collect();
        for t in ordered_tuples(&objects, pp.arity()) {
            if p.0.evaluate(p.1, s, &t)? != q.0.evaluate(q.1, s, &t)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
