use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Source location of a node; ignored by equality.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub start: usize,
    pub end: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "or",
            BinOp::And => "and",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 2,
            BinOp::And => 3,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 5,
            BinOp::Add | BinOp::Sub => 6,
            BinOp::Mul | BinOp::Div => 7,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantifier {
    Any,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExprKind {
    Num(f64),
    Str(String),
    Bool(bool),
    Var(String),
    Call(String, Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Quant(Quantifier, String, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind) -> Expr {
        Expr { kind, span: Span::default() }
    }

    pub fn at(kind: ExprKind, span: Span) -> Expr {
        Expr { kind, span }
    }

    pub fn num(v: f64) -> Expr {
        Expr::new(ExprKind::Num(v))
    }

    pub fn var(name: &str) -> Expr {
        Expr::new(ExprKind::Var(name.to_string()))
    }

    pub fn call(name: &str, args: Vec<Expr>) -> Expr {
        Expr::new(ExprKind::Call(name.to_string(), args))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        Expr::new(ExprKind::Unary(UnOp::Not, Box::new(e)))
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::new(ExprKind::Binary(op, Box::new(l), Box::new(r)))
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Num(_) | ExprKind::Str(_) | ExprKind::Bool(_) | ExprKind::Var(_) => {}
            ExprKind::Call(_, args) => args.iter().for_each(|a| a.walk(f)),
            ExprKind::Index(b, i) => {
                b.walk(f);
                i.walk(f);
            }
            ExprKind::Unary(_, e) | ExprKind::Quant(_, _, e) => e.walk(f),
            ExprKind::Binary(_, l, r) => {
                l.walk(f);
                r.walk(f);
            }
            ExprKind::If(c, t, e) => {
                c.walk(f);
                t.walk(f);
                e.walk(f);
            }
        }
    }

    /// Rebuilds the tree bottom-up through `f`.
    pub fn map(&self, f: &mut dyn FnMut(Expr) -> Expr) -> Expr {
        let kind = match &self.kind {
            k @ (ExprKind::Num(_) | ExprKind::Str(_) | ExprKind::Bool(_) | ExprKind::Var(_)) => k.clone(),
            ExprKind::Call(n, args) => ExprKind::Call(n.clone(), args.iter().map(|a| a.map(f)).collect()),
            ExprKind::Index(b, i) => ExprKind::Index(Box::new(b.map(f)), Box::new(i.map(f))),
            ExprKind::Unary(op, e) => ExprKind::Unary(*op, Box::new(e.map(f))),
            ExprKind::Binary(op, l, r) => ExprKind::Binary(*op, Box::new(l.map(f)), Box::new(r.map(f))),
            ExprKind::If(c, t, e) => ExprKind::If(Box::new(c.map(f)), Box::new(t.map(f)), Box::new(e.map(f))),
            ExprKind::Quant(q, v, e) => ExprKind::Quant(*q, v.clone(), Box::new(e.map(f))),
        };
        f(Expr { kind, span: self.span })
    }

    /// Names of every function called in this expression.
    pub fn called_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let ExprKind::Call(n, _) = &e.kind {
                out.push(n.clone());
            }
        });
        out
    }

    pub fn quantifier_depth(&self) -> usize {
        match &self.kind {
            ExprKind::Quant(_, _, e) => 1 + e.quantifier_depth(),
            ExprKind::Num(_) | ExprKind::Str(_) | ExprKind::Bool(_) | ExprKind::Var(_) => 0,
            ExprKind::Call(_, args) => args.iter().map(Expr::quantifier_depth).max().unwrap_or(0),
            ExprKind::Index(a, b) | ExprKind::Binary(_, a, b) => a.quantifier_depth().max(b.quantifier_depth()),
            ExprKind::Unary(_, e) => e.quantifier_depth(),
            ExprKind::If(c, t, e) => c.quantifier_depth().max(t.quantifier_depth()).max(e.quantifier_depth()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Util,
    Pred,
}

/// One `util` or `pred` definition with its `# key: value` metadata lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub kind: ItemKind,
    pub name: String,
    pub params: Vec<String>,
    pub meta: BTreeMap<String, String>,
    pub body: Expr,
    pub span: Span,
}

impl Item {
    pub fn description(&self) -> &str {
        self.meta.get("desc").map(String::as_str).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Program {
    pub items: Vec<Item>,
}
