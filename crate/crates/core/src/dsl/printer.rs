use super::ast::*;

const PREC_COMPOUND: u8 = 1;
const PREC_NOT: u8 = 4;
const PREC_NEG: u8 = 8;
const PREC_POSTFIX: u8 = 9;
const PREC_ATOM: u8 = 10;

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::If(..) | ExprKind::Quant(..) => PREC_COMPOUND,
        ExprKind::Binary(op, ..) => op.precedence(),
        ExprKind::Unary(UnOp::Not, _) => PREC_NOT,
        ExprKind::Unary(UnOp::Neg, _) => PREC_NEG,
        ExprKind::Num(n) if n.is_sign_negative() => PREC_NEG,
        ExprKind::Index(..) => PREC_POSTFIX,
        _ => PREC_ATOM,
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn write_child(out: &mut String, e: &Expr, min: u8) {
    if prec(e) < min {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Num(n) => out.push_str(&format_num(*n)),
        ExprKind::Str(s) => {
            out.push('"');
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    c => out.push(c),
                }
            }
            out.push('"');
        }
        ExprKind::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ExprKind::Var(v) => out.push_str(v),
        ExprKind::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a);
            }
            out.push(')');
        }
        ExprKind::Index(base, idx) => {
            write_child(out, base, PREC_POSTFIX);
            out.push('[');
            write_expr(out, idx);
            out.push(']');
        }
        ExprKind::Unary(UnOp::Not, inner) => {
            out.push_str("not ");
            write_child(out, inner, PREC_NOT);
        }
        ExprKind::Unary(UnOp::Neg, inner) => {
            out.push('-');
            let mut s = String::new();
            write_child(&mut s, inner, PREC_NEG);
            // a digit right after `-` would fold into a negative literal
            if s.starts_with(|c: char| c.is_ascii_digit()) {
                out.push('(');
                out.push_str(&s);
                out.push(')');
            } else {
                out.push_str(&s);
            }
        }
        ExprKind::Binary(op, l, r) => {
            let p = op.precedence();
            let left_min = if op.is_comparison() { p + 1 } else { p };
            write_child(out, l, left_min);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_child(out, r, p + 1);
        }
        ExprKind::If(c, t, f) => {
            out.push_str("if ");
            write_expr(out, c);
            out.push_str(" then ");
            write_expr(out, t);
            out.push_str(" else ");
            write_expr(out, f);
        }
        ExprKind::Quant(q, v, body) => {
            out.push_str(match q {
                Quantifier::Any => "any ",
                Quantifier::All => "all ",
            });
            out.push_str(v);
            out.push_str(" in objects(): ");
            write_expr(out, body);
        }
    }
}

fn format_num(n: f64) -> String {
    format!("{n}")
}

pub fn print_item(item: &Item) -> String {
    let mut out = String::new();
    for (k, v) in &item.meta {
        out.push_str(&format!("# {k}: {v}\n"));
    }
    let kw = match item.kind {
        ItemKind::Util => "util",
        ItemKind::Pred => "pred",
    };
    out.push_str(&format!("{kw} {}({}) {{\n    {}\n}}\n", item.name, item.params.join(", "), print_expr(&item.body)));
    out
}

pub fn print_program(p: &Program) -> String {
    p.items.iter().map(print_item).collect::<Vec<_>>().join("\n")
}
