//! Breakpoint selection and run-time memory collection.
//!
//! Breakpoints are the Top-x% statements by suspiciousness. While a failed
//! test runs, every time a breakpoint statement finishes executing the whole
//! live call stack is captured. A breakpoint that executes repeatedly keeps a
//! single snapshot, placed where it first executed, holding the values from
//! its last execution.

use crate::workbench::{ExecObserver, Frame, RunError, StmtId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TOP_X: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakpointSet {
    /// Statement IDs in descending suspiciousness.
    pub statements: Vec<StmtId>,
}

impl BreakpointSet {
    pub fn q(&self) -> usize {
        self.statements.len()
    }

    pub fn contains(&self, id: StmtId) -> bool {
        self.statements.contains(&id)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BreakpointError {
    #[error("top-x percentage must be in (0, 100], got {0}")]
    BadPercentage(f64),
    #[error("floor({l} * {x}%) = 0 breakpoints; raise x")]
    Empty { l: usize, x: f64 },
}

/// Picks the `floor(l * x / 100)` statements with the highest score. Equal
/// scores are taken in statement-ID order. `scores[i]` belongs to statement
/// `i + 1`.
pub fn select_breakpoints(scores: &[f64], x: f64) -> Result<BreakpointSet, BreakpointError> {
    if !(x > 0.0 && x <= 100.0) {
        return Err(BreakpointError::BadPercentage(x));
    }
    let l = scores.len();
    let q = ((l as f64) * x / 100.0).floor() as usize;
    if q == 0 {
        return Err(BreakpointError::Empty { l, x });
    }
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(BreakpointSet {
        statements: order[..q].iter().map(|&i| i as StmtId + 1).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub name: String,
    pub value: String,
    /// 1-based depth of the frame owning the variable (entry function = 1).
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemorySnapshot {
    pub breakpoint: StmtId,
    /// Position `j` (1-based) of this breakpoint in first-execution order.
    pub seq: u32,
    pub entries: Vec<MemoryEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryTrace {
    pub test_id: String,
    pub snapshots: Vec<MemorySnapshot>,
    /// Total number of entries over all snapshots.
    pub m: usize,
}

impl MemoryTrace {
    pub fn new(test_id: impl Into<String>, snapshots: Vec<MemorySnapshot>) -> Self {
        let m = snapshots.iter().map(|s| s.entries.len()).sum();
        MemoryTrace {
            test_id: test_id.into(),
            snapshots,
            m,
        }
    }

    /// Checks `m` against the snapshots and that `seq` strictly increases.
    pub fn is_consistent(&self) -> bool {
        let m: usize = self.snapshots.iter().map(|s| s.entries.len()).sum();
        m == self.m && self.snapshots.windows(2).all(|w| w[0].seq < w[1].seq)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CollectError {
    #[error("test {0} passes on this program; memory is only collected for failures")]
    Misclassified(String),
    #[error(transparent)]
    Run(#[from] RunError),
}

/// Execution observer that records breakpoint snapshots.
pub(crate) struct Collector {
    is_breakpoint: Vec<bool>,
    slot: Vec<Option<usize>>,
    snapshots: Vec<MemorySnapshot>,
}

impl Collector {
    pub(crate) fn new(bps: &BreakpointSet, statement_count: u32) -> Self {
        let mut is_breakpoint = vec![false; statement_count as usize];
        for &id in &bps.statements {
            if let Some(b) = is_breakpoint.get_mut(id as usize - 1) {
                *b = true;
            }
        }
        Collector {
            is_breakpoint,
            slot: vec![None; statement_count as usize],
            snapshots: Vec::new(),
        }
    }

    pub(crate) fn finish(self, test_id: &str) -> MemoryTrace {
        MemoryTrace::new(test_id, self.snapshots)
    }
}

fn capture(stack: &[Frame]) -> Vec<MemoryEntry> {
    stack
        .iter()
        .enumerate()
        .flat_map(|(d, frame)| {
            frame.vars.iter().map(move |(name, value)| MemoryEntry {
                name: name.clone(),
                value: value.render(),
                depth: d as u32 + 1,
            })
        })
        .collect()
}

impl ExecObserver for Collector {
    fn after_statement(&mut self, id: StmtId, stack: &[Frame]) {
        let idx = id as usize - 1;
        if !self.is_breakpoint[idx] {
            return;
        }
        let entries = capture(stack);
        match self.slot[idx] {
            Some(i) => self.snapshots[i].entries = entries,
            None => {
                self.slot[idx] = Some(self.snapshots.len());
                self.snapshots.push(MemorySnapshot {
                    breakpoint: id,
                    seq: self.snapshots.len() as u32 + 1,
                    entries,
                });
            }
        }
    }
}

/// Runs a failed test with breakpoints set and returns its memory trace.
pub fn collect_memory(
    program: &crate::workbench::Program,
    test: &crate::workbench::TestCase,
    bps: &BreakpointSet,
    step_budget: u64,
) -> Result<MemoryTrace, CollectError> {
    let (trace, memory) = crate::workbench::run_test(program, test, Some(bps), step_budget)?;
    if trace.outcome == crate::workbench::Outcome::Passed {
        return Err(CollectError::Misclassified(test.id.clone()));
    }
    Ok(memory.expect("breakpoints were given"))
}
