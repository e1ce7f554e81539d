use std::fmt::Write;

use super::{BinOp, CheckOrigin, Expr, Instr, InstrKind, Routine, UnOp};

const INDENT: &str = "  ";

fn precedence(op: BinOp) -> u8 {
    match op {
        BinOp::Implies => 1,
        BinOp::Or => 2,
        BinOp::And => 3,
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => 4,
        BinOp::Add | BinOp::Sub => 5,
        BinOp::Mul | BinOp::Div | BinOp::Mod => 6,
    }
}

const UNARY: u8 = 7;

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => precedence(*op),
        Expr::Unary(..) => UNARY,
        _ => 8,
    }
}

fn render(e: &Expr, ctx: u8) -> String {
    let s = match e {
        Expr::Int(v) => v.to_string(),
        Expr::Bool(b) => b.to_string(),
        Expr::Var(n) => n.clone(),
        Expr::Index { array, index } => format!("{array}[{}]", render(index, 0)),
        Expr::Count(n) => format!("{n}.count"),
        Expr::Unary(UnOp::Not, inner) => format!("not {}", render(inner, UNARY)),
        Expr::Unary(UnOp::Neg, inner) => {
            let s = render(inner, UNARY);
            // Keep `-` from fusing with a literal or another minus.
            if matches!(**inner, Expr::Int(_)) || s.starts_with('-') {
                format!("-({s})")
            } else {
                format!("-{s}")
            }
        }
        Expr::Binary(op, l, r) => {
            let p = precedence(*op);
            let (lc, rc) = match op {
                BinOp::Implies => (p + 1, p),
                _ if op.is_relational() => (p + 1, p + 1),
                _ => (p, p + 1),
            };
            format!("{} {} {}", render(l, lc), op.symbol(), render(r, rc))
        }
        Expr::Across {
            var,
            lo,
            hi,
            quantifier,
            body,
        } => format!(
            "across {} .. {} as {var} {} {} end",
            render(lo, 0),
            render(hi, 0),
            quantifier.keyword(),
            render(body, 0)
        ),
    };
    if expr_prec(e) < ctx {
        format!("({s})")
    } else {
        s
    }
}

/// Renders an expression with the minimum number of parentheses.
pub fn pretty_expr(e: &Expr) -> String {
    render(e, 0)
}

/// Canonical source text for a routine; `parse` reads it back unchanged.
pub fn pretty(r: &Routine) -> String {
    let mut out = String::new();
    let params: Vec<String> = r.params.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect();
    let _ = writeln!(out, "routine {} ({})", r.name, params.join(", "));
    if let Some(req) = &r.require {
        let _ = writeln!(out, "{INDENT}require\n{INDENT}{INDENT}{}", pretty_expr(req));
    }
    if !r.locals.is_empty() {
        let _ = writeln!(out, "{INDENT}local");
        for l in &r.locals {
            let _ = write!(out, "{INDENT}{INDENT}{}: {}", l.name, l.ty);
            if let Some(init) = &l.init {
                let _ = write!(out, " := {}", pretty_expr(init));
            }
            out.push('\n');
        }
    }
    let _ = writeln!(out, "{INDENT}do");
    block(&mut out, &r.body, 2);
    if !r.ensure.is_empty() {
        let _ = writeln!(out, "{INDENT}ensure");
        for c in &r.ensure {
            let _ = writeln!(out, "{INDENT}{INDENT}{}: {}", c.tag, pretty_expr(&c.expr));
        }
    }
    let _ = writeln!(out, "{INDENT}end");
    out
}

fn line(out: &mut String, depth: usize, text: &str) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
    out.push_str(text);
    out.push('\n');
}

fn block(out: &mut String, b: &[Instr], depth: usize) {
    for instr in b {
        instruction(out, instr, depth);
    }
}

fn instruction(out: &mut String, instr: &Instr, depth: usize) {
    match &instr.kind {
        InstrKind::Assign { target, value } => {
            line(out, depth, &format!("{target} := {}", pretty_expr(value)));
        }
        InstrKind::AssignIndex { array, index, value } => line(
            out,
            depth,
            &format!("{array}[{}] := {}", pretty_expr(index), pretty_expr(value)),
        ),
        InstrKind::If { .. } => {
            let mut current = instr;
            let mut keyword = "if";
            loop {
                let InstrKind::If {
                    cond,
                    then_branch,
                    else_branch,
                } = &current.kind
                else {
                    unreachable!()
                };
                line(out, depth, &format!("{keyword} {} then", pretty_expr(cond)));
                block(out, then_branch, depth + 1);
                match else_branch.as_deref() {
                    Some([nested]) if matches!(nested.kind, InstrKind::If { .. }) => {
                        current = nested;
                        keyword = "elseif";
                    }
                    Some(b) => {
                        line(out, depth, "else");
                        block(out, b, depth + 1);
                        break;
                    }
                    None => break,
                }
            }
            line(out, depth, "end");
        }
        InstrKind::Loop {
            from, until, body, ..
        } => {
            if let Some(f) = from {
                line(out, depth, "from");
                block(out, f, depth + 1);
            }
            line(out, depth, "until");
            line(out, depth + 1, &pretty_expr(until));
            line(out, depth, "loop");
            block(out, body, depth + 1);
            line(out, depth, "end");
        }
        InstrKind::Check { cond, tag, origin } => {
            let mut text = match tag {
                Some(t) => format!("check {t}: {} end", pretty_expr(cond)),
                None => format!("check {} end", pretty_expr(cond)),
            };
            if let CheckOrigin::Seeded { target } = origin {
                let _ = write!(text, " -- [target {target}]");
            }
            line(out, depth, &text);
        }
    }
}
