//! Built-in programs and suites.
//!
//! The word-replacement program below is the two-fault example used
//! throughout the test suite: six failures with identical coverage, four
//! caused by a wrong replacement constant and two by a wrong comparison.

use super::{
    build_oracle, parse_program, BinOp, Edit, FaultKind, FaultyVersion, Literal, Mutant, Program,
    TestCase, Value, DEFAULT_STEP_BUDGET,
};
use std::collections::BTreeMap;

pub const WORDS_CLEAN: &str = include_str!("../../fixtures/motivating/clean.toy");
pub const WORDS_FAULTY: &str = include_str!("../../fixtures/motivating/program.toy");

/// (input, expected output of the correct program).
const WORDS_CASES: [(&str, &str); 12] = [
    ("speak wordNone", "speak *1*//wordNone recognized"),
    ("wordNone", "*1*//wordNone recognized"),
    ("wordNonecontained", "*1*contained//wordNone recognized"),
    ("wwwwordNoneeee", "www*1*eee//wordNone recognized"),
    ("has wordNtwo", "has *2*//wordNtwo recognized"),
    ("wordNtwo", "*2*//wordNtwo recognized"),
    ("", "//pass"),
    ("midd*1*le", ""),
    ("*1*2*", ""),
    ("a normal sentence", "a normal sentence//pass"),
    ("wordnonewordNtw", "wordnonewordNtw//pass"),
    ("wordNone and wordNtwo", "both pattern recognized"),
];

pub fn words_clean() -> Program {
    parse_program(WORDS_CLEAN).expect("built-in fixture parses")
}

pub fn words_suite() -> Vec<TestCase> {
    WORDS_CASES
        .iter()
        .enumerate()
        .map(|(i, (input, expected))| TestCase {
            id: format!("t{}", i + 1),
            inputs: BTreeMap::from([("s".to_string(), Value::Str(input.to_string()))]),
            expected_output: expected.to_string(),
        })
        .collect()
}

/// The two injected faults, relative to [`words_clean`].
pub fn words_faults() -> Vec<Mutant> {
    vec![
        Mutant {
            kind: FaultKind::AssignmentFault,
            target: 8,
            edit: Edit::ReplaceConstant {
                index: 1,
                value: Literal::Str("?1?".into()),
            },
            description: "s8: replacement \"*1*\" -> \"?1?\"".into(),
        },
        Mutant {
            kind: FaultKind::AssignmentFault,
            target: 16,
            edit: Edit::SwapOperator {
                index: 0,
                to: BinOp::Gt,
            },
            description: "s16: `==` -> `>`".into(),
        },
    ]
}

pub fn words_version() -> FaultyVersion {
    build_oracle(
        &words_clean(),
        &words_faults(),
        &words_suite(),
        DEFAULT_STEP_BUDGET,
    )
    .expect("built-in faults are non-interfering")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workbench::{execute_plain, run_suite, Outcome};

    #[test]
    fn clean_program_meets_every_expectation() {
        let p = words_clean();
        for t in words_suite() {
            let e = execute_plain(&p, &t.inputs, DEFAULT_STEP_BUDGET).unwrap();
            assert_eq!(e.output, t.expected_output, "{}", t.id);
        }
    }

    #[test]
    fn composed_faults_reproduce_the_faulty_listing() {
        let v = words_version();
        assert_eq!(v.program, parse_program(WORDS_FAULTY).unwrap());
        assert_eq!(v.program.statement_count(), 17);
    }

    #[test]
    fn oracle_splits_four_and_two() {
        let v = words_version();
        let expect: BTreeMap<String, usize> = [
            ("t1", 0),
            ("t2", 0),
            ("t3", 0),
            ("t4", 0),
            ("t5", 1),
            ("t6", 1),
        ]
        .iter()
        .map(|(t, f)| (t.to_string(), *f))
        .collect();
        assert_eq!(v.oracle, expect);
        let traces = run_suite(&v.program, &words_suite(), DEFAULT_STEP_BUDGET).unwrap();
        let failed: Vec<_> = traces
            .iter()
            .filter(|t| t.outcome == Outcome::Failed)
            .map(|t| t.test_id.as_str())
            .collect();
        assert_eq!(failed, ["t1", "t2", "t3", "t4", "t5", "t6"]);
    }
}
