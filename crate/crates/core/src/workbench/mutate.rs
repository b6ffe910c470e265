//! Mutation operators: assignment faults (constant edits, arithmetic
//! operator swaps) and predicate faults (negation, else deletion, decision
//! operator swaps).

use super::ast::{BinOp, Expr, Program, StmtId, StmtKind, UnOp};
use super::printer::expr_to_string;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    AssignmentFault,
    PredicateFault,
}

/// Literal replacement value for a constant edit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Literal {
    Int(i64),
    Str(String),
    Bool(bool),
}

impl Literal {
    fn to_expr(&self) -> Expr {
        match self {
            Literal::Int(v) => Expr::Int(*v),
            Literal::Str(s) => Expr::Str(s.clone()),
            Literal::Bool(b) => Expr::Bool(*b),
        }
    }
}

/// Concrete rewrite applied at the target statement. `index` counts nodes of
/// the relevant sort (literal or binary operator) in a pre-order walk over the
/// statement's own expressions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Edit {
    ReplaceConstant { index: usize, value: Literal },
    SwapOperator { index: usize, to: BinOp },
    NegateCondition,
    DeleteElse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutant {
    pub kind: FaultKind,
    pub target: StmtId,
    pub edit: Edit,
    /// Human-readable summary, e.g. `s8: "*1*" -> "?1*"`.
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MutationError {
    #[error("statement s{0} is targeted by more than one mutant")]
    OverlappingTargets(StmtId),
    #[error("statement s{0} does not exist")]
    MissingTarget(StmtId),
    #[error("edit does not apply to s{target}: {reason}")]
    Inapplicable { target: StmtId, reason: String },
}

fn literal_of(e: &Expr) -> Option<Literal> {
    match e {
        Expr::Int(v) => Some(Literal::Int(*v)),
        Expr::Str(s) => Some(Literal::Str(s.clone())),
        Expr::Bool(b) => Some(Literal::Bool(*b)),
        _ => None,
    }
}

/// Replacement candidates for a constant. Integers stay nonnegative so the
/// printed form parses back to a literal.
fn constant_variants(lit: &Literal) -> Vec<Literal> {
    match lit {
        Literal::Int(v) => {
            let mut out = BTreeSet::new();
            out.insert(v + 1);
            if *v > 0 {
                out.insert(v - 1);
                out.insert(0);
            }
            if *v != 1 {
                out.insert(1);
            }
            out.remove(v);
            out.into_iter().map(Literal::Int).collect()
        }
        Literal::Str(s) if !s.is_empty() => {
            let mut chars: Vec<char> = s.chars().collect();
            let last = chars.len() - 1;
            chars[last] = if chars[last] == '?' { '!' } else { '?' };
            vec![Literal::Str(chars.into_iter().collect())]
        }
        Literal::Str(_) => vec![Literal::Str("?".into())],
        Literal::Bool(b) => vec![Literal::Bool(!b)],
    }
}

/// Every mutant the two operator classes can produce on `program`, in
/// statement-ID order. Statement kinds decide the class: edits on `if` and
/// `while` headers are predicate faults, everything else assignment faults.
pub fn enumerate_mutants(program: &Program) -> Vec<Mutant> {
    let mut out = Vec::new();
    for id in 1..=program.statement_count() {
        let Some(stmt) = program.find_stmt(id) else {
            continue;
        };
        let kind = if stmt.kind.is_predicate() {
            FaultKind::PredicateFault
        } else {
            FaultKind::AssignmentFault
        };
        let mut literals = Vec::new();
        let mut operators = Vec::new();
        for e in stmt.kind.own_exprs() {
            e.visit(&mut |x| {
                if let Some(l) = literal_of(x) {
                    literals.push(l);
                }
                if let Expr::Binary(op, ..) = x {
                    operators.push(*op);
                }
            });
        }
        for (index, lit) in literals.iter().enumerate() {
            for value in constant_variants(lit) {
                out.push(Mutant {
                    kind,
                    target: id,
                    description: format!(
                        "s{id}: constant #{index} {} -> {}",
                        expr_to_string(&lit.to_expr()),
                        expr_to_string(&value.to_expr())
                    ),
                    edit: Edit::ReplaceConstant { index, value },
                });
            }
        }
        for (index, op) in operators.iter().enumerate() {
            for &to in op.swap_family() {
                if to != *op {
                    out.push(Mutant {
                        kind,
                        target: id,
                        description: format!(
                            "s{id}: operator #{index} `{}` -> `{}`",
                            op.symbol(),
                            to.symbol()
                        ),
                        edit: Edit::SwapOperator { index, to },
                    });
                }
            }
        }
        if let StmtKind::If { else_block, .. } = &stmt.kind {
            out.push(Mutant {
                kind,
                target: id,
                edit: Edit::NegateCondition,
                description: format!("s{id}: negate condition"),
            });
            if else_block.is_some() {
                out.push(Mutant {
                    kind,
                    target: id,
                    edit: Edit::DeleteElse,
                    description: format!("s{id}: delete else branch"),
                });
            }
        } else if let StmtKind::While { .. } = &stmt.kind {
            out.push(Mutant {
                kind,
                target: id,
                edit: Edit::NegateCondition,
                description: format!("s{id}: negate condition"),
            });
        }
    }
    out
}

/// Applies all mutants to a copy of `program`. Statement IDs keep their
/// original numbering.
pub fn apply_mutants(program: &Program, mutants: &[Mutant]) -> Result<Program, MutationError> {
    let mut seen = BTreeSet::new();
    for m in mutants {
        if !seen.insert(m.target) {
            return Err(MutationError::OverlappingTargets(m.target));
        }
    }
    let mut out = program.clone();
    for m in mutants {
        let stmt = out
            .find_stmt_mut(m.target)
            .ok_or(MutationError::MissingTarget(m.target))?;
        let inapplicable = |reason: &str| MutationError::Inapplicable {
            target: m.target,
            reason: reason.to_string(),
        };
        match &m.edit {
            Edit::ReplaceConstant { index, value } => {
                let mut seen = 0usize;
                let mut done = false;
                for e in stmt.kind.own_exprs_mut() {
                    e.visit_mut(&mut |x| {
                        if literal_of(x).is_some() {
                            if seen == *index && !done {
                                *x = value.to_expr();
                                done = true;
                            }
                            seen += 1;
                        }
                    });
                }
                if !done {
                    return Err(inapplicable("constant index out of range"));
                }
            }
            Edit::SwapOperator { index, to } => {
                let mut seen = 0usize;
                let mut done = false;
                for e in stmt.kind.own_exprs_mut() {
                    e.visit_mut(&mut |x| {
                        if let Expr::Binary(op, ..) = x {
                            if seen == *index && !done {
                                *op = *to;
                                done = true;
                            }
                            seen += 1;
                        }
                    });
                }
                if !done {
                    return Err(inapplicable("operator index out of range"));
                }
            }
            Edit::NegateCondition => match &mut stmt.kind {
                StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => {
                    let inner = std::mem::replace(cond, Expr::Bool(false));
                    *cond = Expr::Unary(UnOp::Not, Box::new(inner));
                }
                _ => return Err(inapplicable("not a predicate")),
            },
            Edit::DeleteElse => match &mut stmt.kind {
                StmtKind::If { else_block, .. } if else_block.is_some() => *else_block = None,
                _ => return Err(inapplicable("no else branch")),
            },
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workbench::parse_program;

    const SRC: &str = "fn main(a) {\n  x = a + 2;\n  if (x > 3) {\n    y = 1;\n  } else {\n    y = 0;\n  }\n  return y;\n}\n";

    #[test]
    fn mutation_is_local() {
        let p = parse_program(SRC).unwrap();
        for m in enumerate_mutants(&p) {
            let q = apply_mutants(&p, std::slice::from_ref(&m)).unwrap();
            assert_ne!(p, q, "{}", m.description);
            for id in 1..=p.statement_count() {
                if id == m.target {
                    continue;
                }
                // statements nested in a deleted else disappear with it
                if m.edit == Edit::DeleteElse && q.find_stmt(id).is_none() {
                    continue;
                }
                let (a, b) = (p.find_stmt(id), q.find_stmt(id));
                if let (Some(a), Some(b)) = (a, b) {
                    if !a.kind.is_predicate() {
                        assert_eq!(a, b, "s{id} changed by {}", m.description);
                    }
                }
            }
        }
    }

    #[test]
    fn mutants_still_parse() {
        let p = parse_program(SRC).unwrap();
        for m in enumerate_mutants(&p) {
            let q = apply_mutants(&p, &[m]).unwrap();
            parse_program(&q.to_source()).unwrap();
        }
    }

    #[test]
    fn overlapping_targets_rejected() {
        let p = parse_program(SRC).unwrap();
        let ms = enumerate_mutants(&p);
        let on_two: Vec<_> = ms
            .iter()
            .filter(|m| m.target == 2)
            .take(2)
            .cloned()
            .collect();
        assert_eq!(
            apply_mutants(&p, &on_two).unwrap_err(),
            MutationError::OverlappingTargets(2)
        );
    }

    #[test]
    fn classes_follow_statement_kind() {
        let p = parse_program(SRC).unwrap();
        for m in enumerate_mutants(&p) {
            let expect = if m.target == 3 {
                FaultKind::PredicateFault
            } else {
                FaultKind::AssignmentFault
            };
            assert_eq!(m.kind, expect);
        }
        assert!(enumerate_mutants(&p)
            .iter()
            .any(|m| m.edit == Edit::DeleteElse));
    }

    #[test]
    fn delete_else_keeps_numbering() {
        let p = parse_program(SRC).unwrap();
        let m = Mutant {
            kind: FaultKind::PredicateFault,
            target: 3,
            edit: Edit::DeleteElse,
            description: String::new(),
        };
        let q = apply_mutants(&p, &[m]).unwrap();
        assert_eq!(q.statement_count(), p.statement_count());
        assert!(q.find_stmt(5).is_none());
        assert!(q.find_stmt(6).is_some());
    }
}
