//! Canonical pretty-printer. Output reparses to an identical tree.

use super::ast::*;
use std::fmt::Write;

pub fn pretty_print(program: &Program) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "program {};", program.name);
    for class in &program.classes {
        let _ = writeln!(out, "\nclass {} {{", class.name);
        for (i, m) in class.methods.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let params: Vec<String> = m.params.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect();
            let ret = m.ret.map(|t| format!(" -> {t}")).unwrap_or_default();
            let _ = write!(out, "    fn {}({}){} ", m.name, params.join(", "), ret);
            block(&mut out, &m.body, 1);
            out.push('\n');
        }
        out.push_str("}\n");
    }
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn block(out: &mut String, stmts: &[Stmt], level: usize) {
    out.push_str("{\n");
    for s in stmts {
        indent(out, level + 1);
        stmt(out, s, level + 1);
        out.push('\n');
    }
    indent(out, level);
    out.push('}');
}

fn stmt(out: &mut String, s: &Stmt, level: usize) {
    match s {
        Stmt::Let { var, value } => {
            let _ = write!(out, "let {} = {};", var.name, expr(value));
        }
        Stmt::Assign { var, value } => {
            let _ = write!(out, "{} = {};", var.name, expr(value));
        }
        Stmt::If {
            cond,
            then_block,
            else_block,
            ..
        } => {
            let _ = write!(out, "if ({}) ", expr(cond));
            block(out, then_block, level);
            match else_block.as_deref() {
                None => {}
                Some([nested @ Stmt::If { .. }]) => {
                    out.push_str(" else ");
                    stmt(out, nested, level);
                }
                Some(b) => {
                    out.push_str(" else ");
                    block(out, b, level);
                }
            }
        }
        Stmt::While {
            cond,
            max_iter,
            body,
            ..
        } => {
            let _ = write!(out, "while ({}) @maxiter {} ", expr(cond), max_iter);
            block(out, body, level);
        }
        Stmt::Return(None) => out.push_str("return;"),
        Stmt::Return(Some(e)) => {
            let _ = write!(out, "return {};", expr(e));
        }
        Stmt::Trap { id, guard } => match guard {
            None => {
                let _ = write!(out, "trap \"{id}\";");
            }
            Some(g) => {
                let _ = write!(out, "trap \"{id}\" if ({});", expr(g));
            }
        },
        Stmt::Call(c) => {
            let _ = write!(out, "{};", call(c));
        }
    }
}

fn call(c: &Call) -> String {
    let args: Vec<String> = c.args.iter().map(expr).collect();
    format!("{}({})", c.name, args.join(", "))
}

/// Precedence of the expression as an operand; atoms bind tightest.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op, .. } => op.precedence(),
        // A negative literal must not follow another operator unparenthesised.
        Expr::Int(v) if *v < 0 => 7,
        Expr::Unary { .. } => 7,
        _ => 8,
    }
}

pub fn expr(e: &Expr) -> String {
    match e {
        Expr::Int(v) => v.to_string(),
        Expr::Bool(b) => b.to_string(),
        Expr::Var(v) => v.name.clone(),
        Expr::Unary { op, operand } => {
            let sym = match op {
                UnaryOp::Neg => "-",
                UnaryOp::Not => "!",
            };
            // `-5` would reparse as a literal, so literal operands keep parens.
            let inner = if prec(operand) >= 8 && !matches!(**operand, Expr::Int(_)) {
                expr(operand)
            } else {
                format!("({})", expr(operand))
            };
            format!("{sym}{inner}")
        }
        Expr::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            let l = if prec(lhs) < p {
                format!("({})", expr(lhs))
            } else {
                expr(lhs)
            };
            let r = if prec(rhs) <= p {
                format!("({})", expr(rhs))
            } else {
                expr(rhs)
            };
            format!("{l} {} {r}", op.symbol())
        }
        Expr::Builtin { func, arg } => format!("{}({})", func.name(), expr(arg)),
        Expr::Call(c) => call(c),
    }
}
