//! Spectrum counts, SBFL suspiciousness, tie-aware rankings and the
//! coverage/ranking fingerprints used by the baseline proximities.

use crate::workbench::TestTrace;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Per-statement counts of covering/non-covering failed/passed tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub ncf: u32,
    pub ncs: u32,
    pub nuf: u32,
    pub nus: u32,
}

impl Counts {
    pub fn total(&self) -> u32 {
        self.ncf + self.ncs + self.nuf + self.nus
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrumCounts {
    /// Index `i` holds statement `i + 1`.
    pub statements: Vec<Counts>,
}

/// Tallies coverage over `traces` for statements `1..=l`.
pub fn spectrum_counts(traces: &[TestTrace], l: u32) -> SpectrumCounts {
    let mut statements = vec![Counts::default(); l as usize];
    for t in traces {
        let failed = t.failed();
        for (i, c) in statements.iter_mut().enumerate() {
            let covered = t.hit_counts.contains_key(&(i as u32 + 1));
            match (covered, failed) {
                (true, true) => c.ncf += 1,
                (true, false) => c.ncs += 1,
                (false, true) => c.nuf += 1,
                (false, false) => c.nus += 1,
            }
        }
    }
    SpectrumCounts { statements }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formula {
    Gp03,
    Dstar2,
    Gp19,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown formula `{0}` (expected gp03, dstar2 or gp19)")]
pub struct UnknownFormula(pub String);

impl FromStr for Formula {
    type Err = UnknownFormula;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gp03" => Ok(Formula::Gp03),
            "dstar2" => Ok(Formula::Dstar2),
            "gp19" => Ok(Formula::Gp19),
            _ => Err(UnknownFormula(s.to_string())),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formula::Gp03 => "gp03",
            Formula::Dstar2 => "dstar2",
            Formula::Gp19 => "gp19",
        })
    }
}

impl Formula {
    /// Score of one statement. DStar with a zero denominator returns
    /// `+inf` when the statement is covered by a failure and 0 otherwise.
    pub fn score(self, c: Counts) -> f64 {
        let (ncf, ncs, nuf, nus) = (c.ncf as f64, c.ncs as f64, c.nuf as f64, c.nus as f64);
        match self {
            Formula::Gp03 => (ncf * ncf - ncs.sqrt()).abs().sqrt(),
            Formula::Dstar2 => {
                let den = ncs + nuf;
                if den == 0.0 {
                    if c.ncf > 0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    ncf * ncf / den
                }
            }
            Formula::Gp19 => ncf * (ncs - ncf + nuf - nus).abs().sqrt(),
        }
    }
}

pub fn suspiciousness(counts: &SpectrumCounts, formula: Formula) -> Vec<f64> {
    counts
        .statements
        .iter()
        .map(|&c| formula.score(c))
        .collect()
}

/// Ranks in descending score order; a tie takes the position where it starts.
pub fn rank_with_ties(scores: &[f64]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut ranks = vec![0u32; scores.len()];
    let mut start = 0;
    for (pos, &i) in order.iter().enumerate() {
        if pos == 0 || scores[i] != scores[order[pos - 1]] {
            start = pos as u32 + 1;
        }
        ranks[i] = start;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverageVariant {
    Hit,
    Count,
}

/// Coverage vector of one trace over statements `1..=l`.
pub fn coverage_fingerprint(trace: &TestTrace, l: u32, variant: CoverageVariant) -> Vec<f64> {
    (1..=l)
        .map(|id| match (trace.hit_counts.get(&id), variant) {
            (None, _) => 0.0,
            (Some(_), CoverageVariant::Hit) => 1.0,
            (Some(&c), CoverageVariant::Count) => c as f64,
        })
        .collect()
}

/// Ranking-list fingerprint of one failure: the ranking produced by
/// `formula` over the suite made of that failure plus every passing test.
pub fn ranking_fingerprint(
    failure: &TestTrace,
    passed: &[&TestTrace],
    l: u32,
    formula: Formula,
) -> Vec<u32> {
    let mut suite: Vec<TestTrace> = Vec::with_capacity(passed.len() + 1);
    suite.push(failure.clone());
    suite.extend(passed.iter().map(|&t| t.clone()));
    rank_with_ties(&suspiciousness(&spectrum_counts(&suite, l), formula))
}
