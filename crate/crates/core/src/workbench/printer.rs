//! Pretty-printer producing source that parses back to the same tree.

use super::ast::{Expr, Function, Program, Stmt, StmtKind, UnOp};
use std::fmt::Write;

impl Program {
    /// Renders the program as toy-language source with four-space indents.
    ///
    /// Re-parsing the output yields a structurally identical program, with
    /// statement IDs renumbered densely if a mutation removed statements.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        for (i, f) in self.functions.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            write_function(&mut out, f);
        }
        out
    }
}

fn write_function(out: &mut String, f: &Function) {
    let _ = writeln!(out, "fn {}({}) {{", f.name, f.params.join(", "));
    write_block(out, &f.body, 1);
    out.push_str("}\n");
}

fn write_block(out: &mut String, block: &[Stmt], depth: usize) {
    for s in block {
        write_stmt(out, s, depth);
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::Assign { name, value } => {
            let _ = writeln!(out, "{name} = {};", expr_to_string(value));
        }
        StmtKind::If {
            cond,
            then_block,
            else_block,
        } => {
            let _ = writeln!(out, "if ({}) {{", expr_to_string(cond));
            write_block(out, then_block, depth + 1);
            indent(out, depth);
            match else_block {
                Some(b) => {
                    out.push_str("} else {\n");
                    write_block(out, b, depth + 1);
                    indent(out, depth);
                    out.push_str("}\n");
                }
                None => out.push_str("}\n"),
            }
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "while ({}) {{", expr_to_string(cond));
            write_block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Return(None) => out.push_str("return;\n"),
        StmtKind::Return(Some(e)) => {
            let _ = writeln!(out, "return {};", expr_to_string(e));
        }
        StmtKind::Print(e) => {
            let _ = writeln!(out, "print({});", expr_to_string(e));
        }
        StmtKind::Expr(e) => {
            let _ = writeln!(out, "{};", expr_to_string(e));
        }
    }
}

/// Fully parenthesizes compound subexpressions so precedence never matters.
pub fn expr_to_string(e: &Expr) -> String {
    match e {
        Expr::Int(v) if *v < 0 => format!("(0 - {})", v.unsigned_abs()),
        Expr::Int(v) => v.to_string(),
        Expr::Str(s) => quote(s),
        Expr::Bool(b) => b.to_string(),
        Expr::Var(n) => n.clone(),
        Expr::Unary(UnOp::Neg, x) => format!("-{}", atom(x)),
        Expr::Unary(UnOp::Not, x) => format!("!{}", atom(x)),
        Expr::Binary(op, a, b) => format!("{} {} {}", atom(a), op.symbol(), atom(b)),
        Expr::Cond(c, a, b) => format!(
            "{} ? {} : {}",
            atom(c),
            expr_to_string(a),
            expr_to_string(b)
        ),
        Expr::Call(name, args) => format!(
            "{name}({})",
            args.iter()
                .map(expr_to_string)
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

fn atom(e: &Expr) -> String {
    match e {
        Expr::Binary(..) | Expr::Cond(..) => format!("({})", expr_to_string(e)),
        _ => expr_to_string(e),
    }
}

fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            '\t' => q.push_str("\\t"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}
