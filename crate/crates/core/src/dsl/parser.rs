use std::collections::BTreeMap;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::DslError;

pub const KEYWORDS: [&str; 13] =
    ["util", "pred", "and", "or", "not", "if", "then", "else", "any", "all", "in", "true", "false"];

pub fn parse_program(src: &str) -> Result<Program, DslError> {
    let mut p = Parser { toks: tokenize(src)?, pos: 0 };
    let mut items = Vec::new();
    loop {
        let mut meta = BTreeMap::new();
        while let Tok::Meta(k, v) = &p.peek().tok {
            let entry: &mut String = meta.entry(k.clone()).or_default();
            if !entry.is_empty() {
                entry.push(' ');
            }
            entry.push_str(v);
            p.pos += 1;
        }
        if p.peek().tok == Tok::Eof {
            break;
        }
        items.push(p.item(meta)?);
    }
    Ok(Program { items })
}

/// Parses a single expression.
pub fn parse_expr(src: &str) -> Result<Expr, DslError> {
    let mut p = Parser { toks: tokenize(src)?, pos: 0 };
    p.skip_meta();
    let e = p.expr()?;
    p.skip_meta();
    p.expect(&Tok::Eof)?;
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn skip_meta(&mut self) {
        while matches!(self.peek().tok, Tok::Meta(..)) {
            self.pos += 1;
        }
    }

    fn error_at(&self, t: &Token, msg: impl Into<String>) -> DslError {
        DslError::Syntax { line: t.span.line, col: t.span.col, message: msg.into() }
    }

    fn unexpected(&self, what: &str) -> DslError {
        let t = self.peek();
        self.error_at(t, format!("expected {what}, found {}", t.tok.describe()))
    }

    fn expect(&mut self, tok: &Tok) -> Result<Token, DslError> {
        if &self.peek().tok == tok {
            Ok(self.next())
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> Result<Token, DslError> {
        if self.is_kw(kw) {
            Ok(self.next())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self) -> Result<String, DslError> {
        match &self.peek().tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn span_from(&self, start: &Token) -> Span {
        let end = self.toks[self.pos.saturating_sub(1)].span.end;
        Span { end, ..start.span }
    }

    fn item(&mut self, meta: BTreeMap<String, String>) -> Result<Item, DslError> {
        let start = self.peek().clone();
        let kind = if self.is_kw("util") {
            ItemKind::Util
        } else if self.is_kw("pred") {
            ItemKind::Pred
        } else {
            return Err(self.unexpected("`util` or `pred`"));
        };
        self.next();
        let name = self.ident()?;
        self.expect(&Tok::LParen)?;
        let mut params = Vec::new();
        if self.peek().tok != Tok::RParen {
            loop {
                let t = self.peek().clone();
                let p = self.ident()?;
                if params.contains(&p) {
                    return Err(self.error_at(&t, format!("duplicate parameter `{p}`")));
                }
                params.push(p);
                if self.peek().tok == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(&Tok::RParen)?;
        self.expect(&Tok::LBrace)?;
        let body = self.expr()?;
        self.expect(&Tok::RBrace)?;
        Ok(Item { kind, name, params, meta, body, span: self.span_from(&start) })
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        if self.is_kw("if") || self.is_kw("any") || self.is_kw("all") {
            self.compound()
        } else {
            self.or()
        }
    }

    fn compound(&mut self) -> Result<Expr, DslError> {
        let start = self.next();
        let kind = match &start.tok {
            Tok::Ident(k) if k == "if" => {
                let c = self.expr()?;
                self.expect_kw("then")?;
                let t = self.expr()?;
                self.expect_kw("else")?;
                let e = self.expr()?;
                ExprKind::If(Box::new(c), Box::new(t), Box::new(e))
            }
            Tok::Ident(k) => {
                let q = if k == "any" { Quantifier::Any } else { Quantifier::All };
                let v = self.ident()?;
                self.expect_kw("in")?;
                let t = self.peek().clone();
                if self.ident()? != "objects" {
                    return Err(self.error_at(&t, "quantifiers range over `objects()`"));
                }
                self.expect(&Tok::LParen)?;
                self.expect(&Tok::RParen)?;
                self.expect(&Tok::Colon)?;
                let body = self.expr()?;
                ExprKind::Quant(q, v, Box::new(body))
            }
            _ => unreachable!("compound called on a keyword"),
        };
        Ok(Expr::at(kind, self.span_from(&start)))
    }

    fn binary_chain(
        &mut self,
        next: fn(&mut Self) -> Result<Expr, DslError>,
        op_of: fn(&Tok) -> Option<BinOp>,
    ) -> Result<Expr, DslError> {
        let start = self.peek().clone();
        let mut lhs = next(self)?;
        while let Some(op) = op_of(&self.peek().tok) {
            self.next();
            let rhs = next(self)?;
            lhs = Expr::at(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), self.span_from(&start));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr, DslError> {
        self.binary_chain(Self::and, |t| matches!(t, Tok::Ident(s) if s == "or").then_some(BinOp::Or))
    }

    fn and(&mut self) -> Result<Expr, DslError> {
        self.binary_chain(Self::not, |t| matches!(t, Tok::Ident(s) if s == "and").then_some(BinOp::And))
    }

    fn not(&mut self) -> Result<Expr, DslError> {
        if self.is_kw("not") {
            let start = self.next();
            let e = self.not()?;
            return Ok(Expr::at(ExprKind::Unary(UnOp::Not, Box::new(e)), self.span_from(&start)));
        }
        self.cmp()
    }

    fn cmp(&mut self) -> Result<Expr, DslError> {
        let start = self.peek().clone();
        let lhs = self.add()?;
        let Some(op) = cmp_op(&self.peek().tok) else {
            return Ok(lhs);
        };
        self.next();
        let rhs = self.add()?;
        if cmp_op(&self.peek().tok).is_some() {
            return Err(self.error_at(&self.peek().clone(), "comparisons do not chain; add parentheses"));
        }
        Ok(Expr::at(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), self.span_from(&start)))
    }

    fn add(&mut self) -> Result<Expr, DslError> {
        self.binary_chain(Self::mul, |t| match t {
            Tok::Plus => Some(BinOp::Add),
            Tok::Minus => Some(BinOp::Sub),
            _ => None,
        })
    }

    fn mul(&mut self) -> Result<Expr, DslError> {
        self.binary_chain(Self::unary, |t| match t {
            Tok::Star => Some(BinOp::Mul),
            Tok::Slash => Some(BinOp::Div),
            _ => None,
        })
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if self.peek().tok == Tok::Minus {
            let start = self.next();
            if let Tok::Num(n) = self.peek().tok {
                self.next();
                let lit = Expr::at(ExprKind::Num(-n), self.span_from(&start));
                return self.postfix_on(lit, &start);
            }
            let e = self.unary()?;
            return Ok(Expr::at(ExprKind::Unary(UnOp::Neg, Box::new(e)), self.span_from(&start)));
        }
        let start = self.peek().clone();
        let base = self.primary()?;
        self.postfix_on(base, &start)
    }

    fn postfix_on(&mut self, mut base: Expr, start: &Token) -> Result<Expr, DslError> {
        while self.peek().tok == Tok::LBracket {
            self.next();
            let idx = self.expr()?;
            self.expect(&Tok::RBracket)?;
            base = Expr::at(ExprKind::Index(Box::new(base), Box::new(idx)), self.span_from(start));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        let start = self.peek().clone();
        let kind = match &start.tok {
            Tok::Num(n) => {
                self.next();
                ExprKind::Num(*n)
            }
            Tok::Str(s) => {
                self.next();
                ExprKind::Str(s.clone())
            }
            Tok::LParen => {
                self.next();
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                return Ok(e);
            }
            Tok::Ident(k) if k == "true" || k == "false" => {
                self.next();
                ExprKind::Bool(k == "true")
            }
            Tok::Ident(k) if k == "if" || k == "any" || k == "all" => return self.compound(),
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.peek().tok == Tok::LParen {
                    self.next();
                    let mut args = Vec::new();
                    if self.peek().tok != Tok::RParen {
                        loop {
                            args.push(self.expr()?);
                            if self.peek().tok == Tok::Comma {
                                self.next();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(&Tok::RParen)?;
                    ExprKind::Call(name, args)
                } else {
                    ExprKind::Var(name)
                }
            }
            _ => return Err(self.unexpected("expression")),
        };
        Ok(Expr::at(kind, self.span_from(&start)))
    }
}

fn cmp_op(t: &Tok) -> Option<BinOp> {
    match t {
        Tok::EqEq => Some(BinOp::Eq),
        Tok::Ne => Some(BinOp::Ne),
        Tok::Lt => Some(BinOp::Lt),
        Tok::Le => Some(BinOp::Le),
        Tok::Gt => Some(BinOp::Gt),
        Tok::Ge => Some(BinOp::Ge),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_predicate() {
        let p = parse_program("pred gripper_empty() { gripper_holding() == \"\" }").unwrap();
        assert_eq!(p.items.len(), 1);
        assert_eq!(p.items[0].kind, ItemKind::Pred);
        assert!(p.items[0].params.is_empty());
    }

    #[test]
    fn precedence() {
        let e = parse_expr("1 + 2 * 3 < 4 and not x or y").unwrap();
        let ExprKind::Binary(BinOp::Or, l, _) = e.kind else { panic!() };
        let ExprKind::Binary(BinOp::And, cmp, not) = l.kind else { panic!() };
        assert!(matches!(not.kind, ExprKind::Unary(UnOp::Not, _)));
        let ExprKind::Binary(BinOp::Lt, sum, _) = cmp.kind else { panic!() };
        let ExprKind::Binary(BinOp::Add, _, prod) = sum.kind else { panic!() };
        assert!(matches!(prod.kind, ExprKind::Binary(BinOp::Mul, _, _)));
    }

    #[test]
    fn negative_literals_fold() {
        assert_eq!(parse_expr("-1").unwrap(), Expr::num(-1.0));
        assert!(matches!(parse_expr("-(1)").unwrap().kind, ExprKind::Unary(UnOp::Neg, _)));
        assert!(matches!(parse_expr("3 - 1").unwrap().kind, ExprKind::Binary(BinOp::Sub, _, _)));
    }

    #[test]
    fn meta_lines_attach_to_items() {
        let p = parse_program("# desc: first line\n# desc: second\nutil f(a) { 1 }").unwrap();
        assert_eq!(p.items[0].description(), "first line second");
    }

    #[test]
    fn syntax_errors() {
        for bad in [
            "pred p(a) { }",
            "pred p(a, a) { true }",
            "pred p() { 1 < 2 < 3 }",
            "pred if() { 1 }",
            "pred p() { any v in things(): true }",
        ] {
            assert!(matches!(parse_program(bad), Err(DslError::Syntax { .. })), "{bad}");
        }
    }
}
