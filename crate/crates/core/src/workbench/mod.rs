//! Execution substrate: a small imperative language with statement
//! coverage, breakpoint hooks and mutation-based fault injection.

mod ast;
pub mod fixtures;
mod interp;
mod mutate;
mod parser;
mod printer;

pub use ast::{visit_block, BinOp, Expr, Function, Program, Stmt, StmtId, StmtKind, UnOp};
pub use interp::{
    execute, execute_plain, ExecObserver, Execution, Frame, NoObserver, RunError, RuntimeFault,
    Value, DEFAULT_STEP_BUDGET, MAX_CALL_DEPTH,
};
pub use mutate::{
    apply_mutants, enumerate_mutants, Edit, FaultKind, Literal, Mutant, MutationError,
};
pub use parser::{parse_program, ParseError};
pub use printer::expr_to_string;

use crate::memcollect::{BreakpointSet, Collector, MemoryTrace};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub inputs: BTreeMap<String, Value>,
    pub expected_output: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Failed,
    Passed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestTrace {
    pub test_id: String,
    pub outcome: Outcome,
    /// Execution count for every statement executed at least once.
    pub hit_counts: BTreeMap<StmtId, u64>,
    pub output: String,
}

impl TestTrace {
    pub fn failed(&self) -> bool {
        self.outcome == Outcome::Failed
    }
}

/// Runs one test. With breakpoints, also collects the memory trace
/// (regardless of outcome; callers decide whether a passing run matters).
pub fn run_test(
    program: &Program,
    test: &TestCase,
    breakpoints: Option<&BreakpointSet>,
    step_budget: u64,
) -> Result<(TestTrace, Option<MemoryTrace>), RunError> {
    let (exec, memory) = match breakpoints {
        Some(bps) => {
            let mut collector = Collector::new(bps, program.statement_count());
            let exec = execute(program, &test.inputs, step_budget, &mut collector)?;
            (exec, Some(collector.finish(&test.id)))
        }
        None => (execute_plain(program, &test.inputs, step_budget)?, None),
    };
    let outcome = if exec.fault.is_some() || exec.output != test.expected_output {
        Outcome::Failed
    } else {
        Outcome::Passed
    };
    let hit_counts = exec
        .hit_counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (i as StmtId + 1, c))
        .collect();
    Ok((
        TestTrace {
            test_id: test.id.clone(),
            outcome,
            hit_counts,
            output: exec.output,
        },
        memory,
    ))
}

/// Runs a whole suite without breakpoints.
pub fn run_suite(
    program: &Program,
    suite: &[TestCase],
    step_budget: u64,
) -> Result<Vec<TestTrace>, RunError> {
    suite
        .iter()
        .map(|t| run_test(program, t, None, step_budget).map(|(tr, _)| tr))
        .collect()
}

pub fn failing_ids(traces: &[TestTrace]) -> BTreeSet<String> {
    traces
        .iter()
        .filter(|t| t.failed())
        .map(|t| t.test_id.clone())
        .collect()
}

/// A multi-fault program together with the ground-truth culprit of each of
/// its failures.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultyVersion {
    pub base: Program,
    pub faults: Vec<Mutant>,
    pub program: Program,
    /// Failing test id -> index into `faults`.
    pub oracle: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("fault {0} causes no failure on its own")]
    NoFailures(usize),
    #[error("faults {0} and {1} fail the same test {2}")]
    Interfering(usize, usize, String),
    #[error("failure {test} of the composed version is caused by {culprits} single faults")]
    Ambiguous { test: String, culprits: usize },
}

/// Runs the suite on every single-fault version and on the composition, and
/// attributes each composed failure to the unique fault that fails it alone.
pub fn build_oracle(
    base: &Program,
    faults: &[Mutant],
    suite: &[TestCase],
    step_budget: u64,
) -> Result<FaultyVersion, OracleError> {
    let program = apply_mutants(base, faults)?;
    let mut single: Vec<BTreeSet<String>> = Vec::with_capacity(faults.len());
    for (i, m) in faults.iter().enumerate() {
        let p = apply_mutants(base, std::slice::from_ref(m))?;
        let fails = failing_ids(&run_suite(&p, suite, step_budget)?);
        if fails.is_empty() {
            return Err(OracleError::NoFailures(i));
        }
        for (j, earlier) in single.iter().enumerate() {
            if let Some(t) = earlier.intersection(&fails).next() {
                return Err(OracleError::Interfering(j, i, t.clone()));
            }
        }
        single.push(fails);
    }
    let composed = failing_ids(&run_suite(&program, suite, step_budget)?);
    let mut oracle = BTreeMap::new();
    for t in composed {
        let culprits: Vec<usize> = (0..faults.len())
            .filter(|&i| single[i].contains(&t))
            .collect();
        if culprits.len() != 1 {
            return Err(OracleError::Ambiguous {
                test: t,
                culprits: culprits.len(),
            });
        }
        oracle.insert(t, culprits[0]);
    }
    Ok(FaultyVersion {
        base: base.clone(),
        faults: faults.to_vec(),
        program,
        oracle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "fn main(a, b) {\n  x = a;\n  if (a > 3) {\n    x = a + 1;\n  }\n  y = b;\n  if (b > 3) {\n    y = b * 2;\n  }\n  return x + \",\" + y;\n}\n";

    fn suite() -> Vec<TestCase> {
        let clean = parse_program(SRC).unwrap();
        [(5, 0), (6, 1), (0, 0), (0, 1), (1, 2), (0, 7)]
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| {
                let inputs: BTreeMap<String, Value> = [
                    ("a".to_string(), Value::Int(a)),
                    ("b".to_string(), Value::Int(b)),
                ]
                .into();
                let e = execute_plain(&clean, &inputs, DEFAULT_STEP_BUDGET).unwrap();
                TestCase {
                    id: format!("t{i}"),
                    inputs,
                    expected_output: e.output,
                }
            })
            .collect()
    }

    fn mutant(target: StmtId, edit: Edit) -> Mutant {
        Mutant {
            kind: FaultKind::AssignmentFault,
            target,
            edit,
            description: String::new(),
        }
    }

    fn fault_a() -> Mutant {
        mutant(
            4,
            Edit::SwapOperator {
                index: 0,
                to: BinOp::Sub,
            },
        )
    }

    fn fault_b() -> Mutant {
        mutant(
            7,
            Edit::SwapOperator {
                index: 0,
                to: BinOp::Add,
            },
        )
    }

    #[test]
    fn expected_output_decides_outcome() {
        let p = parse_program(SRC).unwrap();
        let traces = run_suite(&p, &suite(), DEFAULT_STEP_BUDGET).unwrap();
        assert!(traces.iter().all(|t| t.outcome == Outcome::Passed));
        // t0 skips the second branch body only
        assert_eq!(
            traces[0].hit_counts.keys().copied().collect::<Vec<_>>(),
            vec![1, 2, 3, 4, 5, 6, 8]
        );
    }

    #[test]
    fn determinism() {
        let p = apply_mutants(&parse_program(SRC).unwrap(), &[fault_a()]).unwrap();
        let a = run_suite(&p, &suite(), DEFAULT_STEP_BUDGET).unwrap();
        let b = run_suite(&p, &suite(), DEFAULT_STEP_BUDGET).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oracle_is_disjoint_union() {
        let base = parse_program(SRC).unwrap();
        let v = build_oracle(
            &base,
            &[fault_a(), fault_b()],
            &suite(),
            DEFAULT_STEP_BUDGET,
        )
        .unwrap();
        let expect: BTreeMap<String, usize> =
            [("t0".into(), 0), ("t1".into(), 0), ("t5".into(), 1)].into();
        assert_eq!(v.oracle, expect);
    }

    #[test]
    fn single_fault_maps_everything_to_it() {
        let base = parse_program(SRC).unwrap();
        let v = build_oracle(&base, &[fault_b()], &suite(), DEFAULT_STEP_BUDGET).unwrap();
        assert_eq!(v.oracle.len(), 1);
        assert!(v.oracle.values().all(|&f| f == 0));
    }

    // Negating `a > 3` and breaking `x = a + 1` both corrupt x for a > 3.
    #[test]
    fn interfering_faults_rejected() {
        let base = parse_program(SRC).unwrap();
        let c = mutant(3, Edit::NegateCondition);
        let err = build_oracle(&base, &[fault_a(), c], &suite(), DEFAULT_STEP_BUDGET).unwrap_err();
        assert!(matches!(err, OracleError::Interfering(0, 1, _)), "{err}");
    }

    // No test has a == 3, so `a >= 3` is never observed.
    #[test]
    fn fault_without_failures_rejected() {
        let base = parse_program(SRC).unwrap();
        let m = mutant(
            3,
            Edit::SwapOperator {
                index: 0,
                to: BinOp::Ge,
            },
        );
        let err = build_oracle(&base, &[m], &suite(), DEFAULT_STEP_BUDGET).unwrap_err();
        assert_eq!(err, OracleError::NoFailures(0));
    }

    #[test]
    fn overlapping_mutants_are_a_composition_error() {
        let base = parse_program(SRC).unwrap();
        let err = build_oracle(
            &base,
            &[fault_a(), fault_a()],
            &suite(),
            DEFAULT_STEP_BUDGET,
        )
        .unwrap_err();
        assert_eq!(
            err,
            OracleError::Mutation(MutationError::OverlappingTargets(4))
        );
    }
}
