//! External clustering metrics and benchmark aggregation.
//!
//! Pair-based metrics (FMI, JC) compare every pair of failures between the
//! generated and the ground-truth partition. Case-based metrics (PR, RR)
//! first align clusters to faults with the accuracy-maximizing bijection and
//! then count one-vs-rest outcomes per fault.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("partitions cover different failure sets ({0} vs {1} failures)")]
    Mismatch(usize, usize),
    #[error("alignment needs k = r, got k = {k}, r = {r}")]
    CountMismatch { k: usize, r: usize },
    #[error("alignment enumerates r! bijections; r = {0} exceeds the limit of 5")]
    TooManyFaults(usize),
    #[error("label {label} is outside 0..{bound}")]
    LabelOutOfRange { label: usize, bound: usize },
    #[error("no failures to evaluate")]
    Empty,
}

/// Pair classification: first letter is the generated partition, second the
/// oracle (S = same group, D = different groups).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairCounts {
    pub ss: u64,
    pub sd: u64,
    pub ds: u64,
    pub dd: u64,
}

fn choose2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Counts pairs through the contingency table of the two labelings.
pub fn pair_counts(generated: &[usize], oracle: &[usize]) -> Result<PairCounts, EvalError> {
    if generated.len() != oracle.len() {
        return Err(EvalError::Mismatch(generated.len(), oracle.len()));
    }
    let mut cell: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&g, &o) in generated.iter().zip(oracle) {
        *cell.entry((g, o)).or_default() += 1;
        *rows.entry(g).or_default() += 1;
        *cols.entry(o).or_default() += 1;
    }
    let ss: u64 = cell.values().map(|&c| choose2(c)).sum();
    let same_gen: u64 = rows.values().map(|&c| choose2(c)).sum();
    let same_orc: u64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(generated.len() as u64);
    Ok(PairCounts {
        ss,
        sd: same_gen - ss,
        ds: same_orc - ss,
        dd: total + ss - same_gen - same_orc,
    })
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Fowlkes-Mallows index.
pub fn fmi(pc: &PairCounts) -> f64 {
    (ratio(pc.ss, pc.ss + pc.sd) * ratio(pc.ss, pc.ss + pc.ds)).sqrt()
}

/// Jaccard coefficient.
pub fn jc(pc: &PairCounts) -> f64 {
    ratio(pc.ss, pc.ss + pc.sd + pc.ds)
}

/// Next lexicographic permutation in place; false when `p` was the last.
fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len())
        .rev()
        .find(|&j| p[j] > p[i - 1])
        .expect("pivot exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn check_labels(labels: &[usize], bound: usize) -> Result<(), EvalError> {
    match labels.iter().find(|&&l| l >= bound) {
        Some(&label) => Err(EvalError::LabelOutOfRange { label, bound }),
        None => Ok(()),
    }
}

/// Bijection `cluster -> fault` with the most correctly placed failures.
/// Candidates are enumerated in lexicographic order; the first best wins.
pub fn align_clusters(
    generated: &[usize],
    oracle: &[usize],
    k: usize,
    r: usize,
) -> Result<Vec<usize>, EvalError> {
    if generated.len() != oracle.len() {
        return Err(EvalError::Mismatch(generated.len(), oracle.len()));
    }
    if k != r {
        return Err(EvalError::CountMismatch { k, r });
    }
    if r > 5 {
        return Err(EvalError::TooManyFaults(r));
    }
    check_labels(generated, k)?;
    check_labels(oracle, r)?;
    let mut table = vec![vec![0usize; r]; k];
    for (&g, &o) in generated.iter().zip(oracle) {
        table[g][o] += 1;
    }
    let mut perm: Vec<usize> = (0..r).collect();
    let mut best = perm.clone();
    let mut best_hits = None;
    loop {
        let hits: usize = (0..k).map(|c| table[c][perm[c]]).sum();
        if best_hits.is_none_or(|b| hits > b) {
            best_hits = Some(hits);
            best.clone_from(&perm);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CaseCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

/// One-vs-rest counts per fault under `bijection`, summed over faults.
pub fn case_counts(
    generated: &[usize],
    oracle: &[usize],
    bijection: &[usize],
) -> Result<CaseCounts, EvalError> {
    if generated.len() != oracle.len() {
        return Err(EvalError::Mismatch(generated.len(), oracle.len()));
    }
    if generated.is_empty() {
        return Err(EvalError::Empty);
    }
    check_labels(generated, bijection.len())?;
    let mut cc = CaseCounts::default();
    for (c, &f) in bijection.iter().enumerate() {
        for (&g, &o) in generated.iter().zip(oracle) {
            match (g == c, o == f) {
                (true, true) => cc.tp += 1,
                (true, false) => cc.fp += 1,
                (false, true) => cc.fn_ += 1,
                (false, false) => cc.tn += 1,
            }
        }
    }
    Ok(cc)
}

pub fn pr(cc: &CaseCounts) -> f64 {
    ratio(cc.tp, cc.tp + cc.fp)
}

pub fn rr(cc: &CaseCounts) -> f64 {
    ratio(cc.tp, cc.tp + cc.fn_)
}

/// Metrics of one faulty version; the clustering metrics are only present
/// when the estimated count is right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionEval {
    pub version: String,
    pub r: usize,
    pub k: usize,
    pub k_equals_r: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fmi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rr: Option<f64>,
}

/// Scores one version. `generated[i]` and `oracle[i]` label the same
/// failure; labels run over `0..k` and `0..r` respectively.
pub fn evaluate_version(
    version: &str,
    generated: &[usize],
    k: usize,
    oracle: &[usize],
    r: usize,
) -> Result<VersionEval, EvalError> {
    if generated.len() != oracle.len() {
        return Err(EvalError::Mismatch(generated.len(), oracle.len()));
    }
    let mut ev = VersionEval {
        version: version.to_string(),
        r,
        k,
        k_equals_r: k == r,
        fmi: None,
        jc: None,
        pr: None,
        rr: None,
    };
    if k == r {
        let pc = pair_counts(generated, oracle)?;
        let bij = align_clusters(generated, oracle, k, r)?;
        let cc = case_counts(generated, oracle, &bij)?;
        ev.fmi = Some(fmi(&pc));
        ev.jc = Some(jc(&pc));
        ev.pr = Some(pr(&cc));
        ev.rr = Some(rr(&cc));
    }
    Ok(ev)
}

/// Number of versions with `k = r` and metric sums over exactly those.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub versions: usize,
    pub v_equal: usize,
    pub s_fmi: f64,
    pub s_jc: f64,
    pub s_pr: f64,
    pub s_rr: f64,
}

pub fn aggregate(evals: &[VersionEval]) -> Summary {
    let mut s = Summary {
        versions: evals.len(),
        ..Summary::default()
    };
    for e in evals.iter().filter(|e| e.k_equals_r) {
        s.v_equal += 1;
        s.s_fmi += e.fmi.unwrap_or(0.0);
        s.s_jc += e.jc.unwrap_or(0.0);
        s.s_pr += e.pr.unwrap_or(0.0);
        s.s_rr += e.rr.unwrap_or(0.0);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueReport {
    pub summary: Summary,
    pub versions: Vec<VersionEval>,
}

/// Per-technique results keyed by technique name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub techniques: BTreeMap<String, TechniqueReport>,
}

impl EvalReport {
    pub fn insert(&mut self, technique: &str, versions: Vec<VersionEval>) {
        let summary = aggregate(&versions);
        self.techniques
            .insert(technique.to_string(), TechniqueReport { summary, versions });
    }

    /// Fixed-width text table, one row per technique.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:>8} {:>8} {:>9} {:>9} {:>9} {:>9}",
            "technique", "versions", "V_equal", "S_M_FMI", "S_M_JC", "S_M_PR", "S_M_RR"
        );
        for (name, t) in &self.techniques {
            let s = &t.summary;
            let _ = writeln!(
                out,
                "{:<12} {:>8} {:>8} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
                name, s.versions, s.v_equal, s.s_fmi, s.s_jc, s.s_pr, s.s_rr
            );
        }
        out
    }
}
