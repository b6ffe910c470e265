//! Tree-walking interpreter with statement coverage and an execution hook.

use super::ast::{BinOp, Expr, Function, Program, Stmt, StmtId, StmtKind, UnOp};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000;
pub const MAX_CALL_DEPTH: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Str(String),
    #[serde(skip)]
    Unit,
}

impl Value {
    /// Canonical string form used for output and memory snapshots.
    pub fn render(&self) -> String {
        match self {
            Value::Bool(b) => b.to_string(),
            Value::Int(v) => v.to_string(),
            Value::Str(s) => s.clone(),
            Value::Unit => "unit".to_string(),
        }
    }

    fn type_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Str(_) => "string",
            Value::Unit => "unit",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Faults that end a run early but still count as a (failed) test outcome.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeFault {
    #[error("undefined variable `{0}`")]
    UndefinedVariable(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("`{name}` expects {expected} arguments, got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("type error: {0}")]
    Type(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("call stack exceeded {MAX_CALL_DEPTH} frames")]
    StackOverflow,
}

/// Conditions under which a run produces no usable trace at all.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("run exceeded the step budget of {0} steps (nonterminating?)")]
    StepBudgetExceeded(u64),
    #[error("entry function `{function}` has no input named `{param}`")]
    MissingInput { function: String, param: String },
}

/// One activation record. Variables keep their first-assignment order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub function: String,
    pub vars: Vec<(String, Value)>,
}

impl Frame {
    fn get(&self, name: &str) -> Option<&Value> {
        self.vars.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    fn set(&mut self, name: &str, value: Value) {
        match self.vars.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = value,
            None => self.vars.push((name.to_string(), value)),
        }
    }
}

/// Called once a statement has finished executing, with the live call stack
/// (outermost frame first). For `if`/`while` headers that is right after the
/// condition is evaluated; for `return` it is before the frame is dropped.
pub trait ExecObserver {
    fn after_statement(&mut self, id: StmtId, stack: &[Frame]);
}

pub struct NoObserver;

impl ExecObserver for NoObserver {
    fn after_statement(&mut self, _: StmtId, _: &[Frame]) {}
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    /// Execution count per statement, indexed by `id - 1`.
    pub hit_counts: Vec<u64>,
    pub output: String,
    pub fault: Option<RuntimeFault>,
}

enum Halt {
    Fault(RuntimeFault),
    Budget,
}

impl From<RuntimeFault> for Halt {
    fn from(f: RuntimeFault) -> Self {
        Halt::Fault(f)
    }
}

enum Flow {
    Normal,
    Return(Value),
}

struct Machine<'p, O> {
    program: &'p Program,
    stack: Vec<Frame>,
    hits: Vec<u64>,
    output: String,
    steps: u64,
    budget: u64,
    observer: &'p mut O,
}

/// Runs the entry function with `inputs` bound to its parameters by name.
///
/// Output is everything printed (one line per `print`) followed by the
/// rendered return value of the entry function, if it returns one.
pub fn execute<O: ExecObserver>(
    program: &Program,
    inputs: &BTreeMap<String, Value>,
    step_budget: u64,
    observer: &mut O,
) -> Result<Execution, RunError> {
    let entry = program.entry();
    let mut args = Vec::with_capacity(entry.params.len());
    for p in &entry.params {
        let v = inputs.get(p).ok_or_else(|| RunError::MissingInput {
            function: entry.name.clone(),
            param: p.clone(),
        })?;
        args.push(v.clone());
    }
    let mut m = Machine {
        program,
        stack: Vec::new(),
        hits: vec![0; program.statement_count() as usize],
        output: String::new(),
        steps: 0,
        budget: step_budget,
        observer,
    };
    let fault = match m.call(entry, args) {
        Ok(Value::Unit) => None,
        Ok(v) => {
            m.output.push_str(&v.render());
            None
        }
        Err(Halt::Budget) => return Err(RunError::StepBudgetExceeded(step_budget)),
        Err(Halt::Fault(f)) => {
            m.output.push_str(&format!("runtime error: {f}"));
            Some(f)
        }
    };
    Ok(Execution {
        hit_counts: m.hits,
        output: m.output,
        fault,
    })
}

impl<O: ExecObserver> Machine<'_, O> {
    fn tick(&mut self, id: StmtId) -> Result<(), Halt> {
        self.steps += 1;
        if self.steps > self.budget {
            return Err(Halt::Budget);
        }
        self.hits[id as usize - 1] += 1;
        Ok(())
    }

    fn call(&mut self, f: &Function, args: Vec<Value>) -> Result<Value, Halt> {
        if self.stack.len() >= MAX_CALL_DEPTH {
            return Err(RuntimeFault::StackOverflow.into());
        }
        self.tick(f.id)?;
        let vars = f.params.iter().cloned().zip(args).collect();
        self.stack.push(Frame {
            function: f.name.clone(),
            vars,
        });
        self.observer.after_statement(f.id, &self.stack);
        let result = match self.block(&f.body) {
            Ok(Flow::Return(v)) => Ok(v),
            Ok(Flow::Normal) => Ok(Value::Unit),
            Err(h) => Err(h),
        };
        self.stack.pop();
        result
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<Flow, Halt> {
        for s in stmts {
            if let Flow::Return(v) = self.stmt(s)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn frame(&mut self) -> &mut Frame {
        self.stack
            .last_mut()
            .expect("statement executed outside a frame")
    }

    fn stmt(&mut self, s: &Stmt) -> Result<Flow, Halt> {
        match &s.kind {
            StmtKind::Assign { name, value } => {
                self.tick(s.id)?;
                let v = self.eval(value)?;
                self.frame().set(name, v);
                self.observer.after_statement(s.id, &self.stack);
                Ok(Flow::Normal)
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.tick(s.id)?;
                let c = self.truthy(cond)?;
                self.observer.after_statement(s.id, &self.stack);
                if c {
                    self.block(then_block)
                } else if let Some(b) = else_block {
                    self.block(b)
                } else {
                    Ok(Flow::Normal)
                }
            }
            StmtKind::While { cond, body } => loop {
                self.tick(s.id)?;
                let c = self.truthy(cond)?;
                self.observer.after_statement(s.id, &self.stack);
                if !c {
                    return Ok(Flow::Normal);
                }
                if let Flow::Return(v) = self.block(body)? {
                    return Ok(Flow::Return(v));
                }
            },
            StmtKind::Return(e) => {
                self.tick(s.id)?;
                let v = match e {
                    Some(e) => self.eval(e)?,
                    None => Value::Unit,
                };
                self.observer.after_statement(s.id, &self.stack);
                Ok(Flow::Return(v))
            }
            StmtKind::Print(e) => {
                self.tick(s.id)?;
                let v = self.eval(e)?;
                self.output.push_str(&v.render());
                self.output.push('\n');
                self.observer.after_statement(s.id, &self.stack);
                Ok(Flow::Normal)
            }
            StmtKind::Expr(e) => {
                self.tick(s.id)?;
                self.eval(e)?;
                self.observer.after_statement(s.id, &self.stack);
                Ok(Flow::Normal)
            }
        }
    }

    fn truthy(&mut self, e: &Expr) -> Result<bool, Halt> {
        match self.eval(e)? {
            Value::Bool(b) => Ok(b),
            other => Err(RuntimeFault::Type(format!(
                "condition must be bool, got {}",
                other.type_name()
            ))
            .into()),
        }
    }

    fn eval(&mut self, e: &Expr) -> Result<Value, Halt> {
        Ok(match e {
            Expr::Int(v) => Value::Int(*v),
            Expr::Str(s) => Value::Str(s.clone()),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Var(name) => self
                .frame()
                .get(name)
                .cloned()
                .ok_or_else(|| RuntimeFault::UndefinedVariable(name.clone()))?,
            Expr::Unary(op, x) => match (op, self.eval(x)?) {
                (UnOp::Neg, Value::Int(v)) => {
                    Value::Int(v.checked_neg().ok_or(RuntimeFault::Overflow)?)
                }
                (UnOp::Not, Value::Bool(b)) => Value::Bool(!b),
                (op, v) => {
                    return Err(RuntimeFault::Type(format!(
                        "cannot apply {op:?} to {}",
                        v.type_name()
                    ))
                    .into())
                }
            },
            Expr::Binary(BinOp::And, a, b) => Value::Bool(self.truthy(a)? && self.truthy(b)?),
            Expr::Binary(BinOp::Or, a, b) => Value::Bool(self.truthy(a)? || self.truthy(b)?),
            Expr::Binary(op, a, b) => {
                let a = self.eval(a)?;
                let b = self.eval(b)?;
                binary(*op, a, b)?
            }
            Expr::Cond(c, a, b) => {
                if self.truthy(c)? {
                    self.eval(a)?
                } else {
                    self.eval(b)?
                }
            }
            Expr::Call(name, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a)?);
                }
                match self.program.function(name) {
                    Some(f) => {
                        if f.params.len() != vals.len() {
                            return Err(RuntimeFault::Arity {
                                name: name.clone(),
                                expected: f.params.len(),
                                got: vals.len(),
                            }
                            .into());
                        }
                        self.call(f, vals)?
                    }
                    None => builtin(name, vals)?,
                }
            }
        })
    }
}

fn binary(op: BinOp, a: Value, b: Value) -> Result<Value, RuntimeFault> {
    use Value::*;
    let overflow = || RuntimeFault::Overflow;
    Ok(match (op, a, b) {
        (BinOp::Add, Int(x), Int(y)) => Int(x.checked_add(y).ok_or_else(overflow)?),
        (BinOp::Add, x @ Str(_), y) | (BinOp::Add, x, y @ Str(_)) => {
            Str(format!("{}{}", x.render(), y.render()))
        }
        (BinOp::Sub, Int(x), Int(y)) => Int(x.checked_sub(y).ok_or_else(overflow)?),
        (BinOp::Mul, Int(x), Int(y)) => Int(x.checked_mul(y).ok_or_else(overflow)?),
        (BinOp::Div | BinOp::Rem, Int(_), Int(0)) => return Err(RuntimeFault::DivisionByZero),
        (BinOp::Div, Int(x), Int(y)) => Int(x.checked_div(y).ok_or_else(overflow)?),
        (BinOp::Rem, Int(x), Int(y)) => Int(x.checked_rem(y).ok_or_else(overflow)?),
        (BinOp::Eq, x, y) => Bool(x == y),
        (BinOp::Ne, x, y) => Bool(x != y),
        (BinOp::Lt, Int(x), Int(y)) => Bool(x < y),
        (BinOp::Le, Int(x), Int(y)) => Bool(x <= y),
        (BinOp::Gt, Int(x), Int(y)) => Bool(x > y),
        (BinOp::Ge, Int(x), Int(y)) => Bool(x >= y),
        (BinOp::Lt, Str(x), Str(y)) => Bool(x < y),
        (BinOp::Le, Str(x), Str(y)) => Bool(x <= y),
        (BinOp::Gt, Str(x), Str(y)) => Bool(x > y),
        (BinOp::Ge, Str(x), Str(y)) => Bool(x >= y),
        (op, x, y) => {
            return Err(RuntimeFault::Type(format!(
                "cannot apply `{}` to {} and {}",
                op.symbol(),
                x.type_name(),
                y.type_name()
            )))
        }
    })
}

/// Built-in string and integer helpers, resolved when no user function of
/// the same name exists.
fn builtin(name: &str, args: Vec<Value>) -> Result<Value, RuntimeFault> {
    use Value::*;
    let arity = |expected: usize| RuntimeFault::Arity {
        name: name.to_string(),
        expected,
        got: args.len(),
    };
    let bad = || RuntimeFault::Type(format!("bad arguments to `{name}`"));
    Ok(match name {
        "contains" => match args.as_slice() {
            [Str(s), Str(t)] => Bool(s.contains(t.as_str())),
            [_, _] => return Err(bad()),
            _ => return Err(arity(2)),
        },
        "replace" => match args.as_slice() {
            [Str(s), Str(from), Str(to)] if from.is_empty() => {
                let _ = to;
                Str(s.clone())
            }
            [Str(s), Str(from), Str(to)] => Str(s.replace(from.as_str(), to)),
            [_, _, _] => return Err(bad()),
            _ => return Err(arity(3)),
        },
        "len" => match args.as_slice() {
            [Str(s)] => Int(s.chars().count() as i64),
            [_] => return Err(bad()),
            _ => return Err(arity(1)),
        },
        "str" => match args.as_slice() {
            [v] => Str(v.render()),
            _ => return Err(arity(1)),
        },
        "abs" => match args.as_slice() {
            [Int(v)] => Int(v.checked_abs().ok_or(RuntimeFault::Overflow)?),
            [_] => return Err(bad()),
            _ => return Err(arity(1)),
        },
        "min" | "max" => match args.as_slice() {
            [Int(a), Int(b)] => Int(if name == "min" { *a.min(b) } else { *a.max(b) }),
            [_, _] => return Err(bad()),
            _ => return Err(arity(2)),
        },
        "substr" => match args.as_slice() {
            [Str(s), Int(start), Int(n)] => {
                let start = (*start).max(0) as usize;
                let n = (*n).max(0) as usize;
                Str(s.chars().skip(start).take(n).collect())
            }
            [_, _, _] => return Err(bad()),
            _ => return Err(arity(3)),
        },
        "index_of" => match args.as_slice() {
            [Str(s), Str(t)] => Int(s
                .find(t.as_str())
                .map(|b| s[..b].chars().count() as i64)
                .unwrap_or(-1)),
            [_, _] => return Err(bad()),
            _ => return Err(arity(2)),
        },
        _ => return Err(RuntimeFault::UnknownFunction(name.to_string())),
    })
}

/// Convenience wrapper for callers that only need coverage and output.
pub fn execute_plain(
    program: &Program,
    inputs: &BTreeMap<String, Value>,
    step_budget: u64,
) -> Result<Execution, RunError> {
    execute(program, inputs, step_budget, &mut NoObserver)
}
