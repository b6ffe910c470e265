//! Desk-scale benchmark: seeded multi-fault versions of a few small subject
//! programs, a version-level train/test split and training-pair extraction.

use crate::pms::PmsImage;
use crate::simnet::{resize_uniform, Input, TrainingPair};
use crate::workbench::{
    build_oracle, enumerate_mutants, execute_plain, parse_program, FaultyVersion, Mutant,
    OracleError, ParseError, Program, TestCase, Value, DEFAULT_STEP_BUDGET,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGen {
    /// Uniform integer in `lo..=hi`.
    Int { lo: i64, hi: i64 },
    /// Concatenation of up to `max` tokens drawn from `pool`.
    Tokens {
        pool: &'static [&'static str],
        max: usize,
    },
}

impl ParamGen {
    fn sample(&self, rng: &mut impl Rng) -> Value {
        match *self {
            ParamGen::Int { lo, hi } => Value::Int(rng.random_range(lo..=hi)),
            ParamGen::Tokens { pool, max } => {
                let n = rng.random_range(0..=max);
                let s: String = (0..n).map(|_| *pool.choose(rng).expect("pool")).collect();
                Value::Str(s)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Subject {
    pub name: &'static str,
    pub source: &'static str,
    pub params: &'static [(&'static str, ParamGen)],
}

const WORD_TOKENS: &[&str] = &[
    "wordNone", "wordNtwo", "ab", "word", "None", " ", "*1", "2*", "x",
];

pub const SUBJECTS: [Subject; 4] = [
    Subject {
        name: "words",
        source: include_str!("../fixtures/subjects/words.toy"),
        params: &[(
            "s",
            ParamGen::Tokens {
                pool: WORD_TOKENS,
                max: 4,
            },
        )],
    },
    Subject {
        name: "grades",
        source: include_str!("../fixtures/subjects/grades.toy"),
        params: &[
            ("a", ParamGen::Int { lo: 30, hi: 100 }),
            ("b", ParamGen::Int { lo: 30, hi: 100 }),
            ("c", ParamGen::Int { lo: 30, hi: 100 }),
        ],
    },
    Subject {
        name: "account",
        source: include_str!("../fixtures/subjects/account.toy"),
        params: &[
            ("n", ParamGen::Int { lo: 0, hi: 6 }),
            ("rate", ParamGen::Int { lo: 0, hi: 30 }),
            ("fee", ParamGen::Int { lo: 0, hi: 40 }),
        ],
    },
    Subject {
        name: "triangle",
        source: include_str!("../fixtures/subjects/triangle.toy"),
        params: &[
            ("a", ParamGen::Int { lo: 0, hi: 8 }),
            ("b", ParamGen::Int { lo: 0, hi: 8 }),
            ("c", ParamGen::Int { lo: 0, hi: 8 }),
        ],
    },
];

pub fn subject(name: &str) -> Option<&'static Subject> {
    SUBJECTS.iter().find(|s| s.name == name)
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("subject `{0}`: {1}")]
    Parse(&'static str, ParseError),
    #[error("subject `{0}`: {1}")]
    Oracle(&'static str, OracleError),
    #[error("gave up on version {index} after {attempts} attempts")]
    Exhausted { index: usize, attempts: usize },
    #[error("bad benchmark configuration: {0}")]
    Config(String),
}

impl Subject {
    pub fn program(&self) -> Result<Program, BenchError> {
        parse_program(self.source).map_err(|e| BenchError::Parse(self.name, e))
    }

    /// `n` tests with random inputs. The expected output is whatever the
    /// clean program prints; inputs on which it faults are redrawn.
    pub fn suite(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<TestCase>, BenchError> {
        let clean = self.program()?;
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let inputs: BTreeMap<String, Value> = self
                .params
                .iter()
                .map(|(name, g)| (name.to_string(), g.sample(rng)))
                .collect();
            let exec = execute_plain(&clean, &inputs, DEFAULT_STEP_BUDGET)
                .map_err(|e| BenchError::Oracle(self.name, e.into()))?;
            if exec.fault.is_some() {
                continue;
            }
            out.push(TestCase {
                id: format!("t{}", out.len() + 1),
                inputs,
                expected_output: exec.output,
            });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub versions: usize,
    pub tests_per_subject: usize,
    pub max_faults: usize,
    /// Bounds on the number of failures of an accepted version.
    pub min_failures: usize,
    pub max_failures: usize,
    pub max_attempts: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            versions: 40,
            tests_per_subject: 60,
            max_faults: 3,
            min_failures: 2,
            max_failures: 30,
            max_attempts: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchVersion {
    pub id: String,
    pub subject: &'static str,
    pub suite: Vec<TestCase>,
    pub version: FaultyVersion,
}

impl BenchVersion {
    pub fn r(&self) -> usize {
        self.version.faults.len()
    }
}

/// Draws `r` mutants on distinct statements, or `None` when the subject has
/// too few mutable statements.
fn sample_faults(pool: &[Mutant], r: usize, rng: &mut impl Rng) -> Option<Vec<Mutant>> {
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    idx.shuffle(rng);
    let mut targets = BTreeSet::new();
    let mut out = Vec::with_capacity(r);
    for i in idx {
        if targets.insert(pool[i].target) {
            out.push(pool[i].clone());
            if out.len() == r {
                return Some(out);
            }
        }
    }
    None
}

/// Subjects are used round-robin; the fault count is uniform in
/// `1..=max_faults`. A candidate is kept when its faults are
/// non-interfering, every fault still causes a failure in the composed
/// program, and the failure count lies within the configured bounds. When a
/// subject yields no candidate within `max_attempts`, the next subject is
/// tried with the same fault count.
pub fn generate_versions(
    cfg: &BenchConfig,
    rng: &mut impl Rng,
) -> Result<Vec<BenchVersion>, BenchError> {
    if cfg.max_faults == 0 || cfg.min_failures > cfg.max_failures {
        return Err(BenchError::Config(format!("{cfg:?}")));
    }
    let mut suites = Vec::with_capacity(SUBJECTS.len());
    let mut pools = Vec::with_capacity(SUBJECTS.len());
    for s in &SUBJECTS {
        suites.push(s.suite(cfg.tests_per_subject, rng)?);
        pools.push(enumerate_mutants(&s.program()?));
    }
    let programs = SUBJECTS
        .iter()
        .map(|s| s.program())
        .collect::<Result<Vec<_>, _>>()?;
    let mut out: Vec<BenchVersion> = Vec::with_capacity(cfg.versions);
    for index in 0..cfg.versions {
        let r = rng.random_range(1..=cfg.max_faults);
        let mut accepted = None;
        for si in (0..SUBJECTS.len()).map(|k| (index + k) % SUBJECTS.len()) {
            let name = SUBJECTS[si].name;
            for _ in 0..cfg.max_attempts {
                let Some(faults) = sample_faults(&pools[si], r, rng) else {
                    break;
                };
                let Ok(v) = build_oracle(&programs[si], &faults, &suites[si], DEFAULT_STEP_BUDGET)
                else {
                    continue;
                };
                let culprits: BTreeSet<usize> = v.oracle.values().copied().collect();
                let fits = (cfg.min_failures..=cfg.max_failures).contains(&v.oracle.len());
                let seen = out
                    .iter()
                    .any(|o| o.subject == name && o.version.faults == v.faults);
                if culprits.len() == r && fits && !seen {
                    accepted = Some((si, v));
                    break;
                }
            }
            if accepted.is_some() {
                break;
            }
            log::warn!("version {}: no {r}-fault candidate on `{name}`", index + 1);
        }
        let (si, version) = accepted.ok_or(BenchError::Exhausted {
            index,
            attempts: cfg.max_attempts,
        })?;
        out.push(BenchVersion {
            id: format!("v{:03}", index + 1),
            subject: SUBJECTS[si].name,
            suite: suites[si].clone(),
            version,
        });
    }
    Ok(out)
}

/// Number of training versions: `fraction * n` rounded, at least 1 when
/// `n > 0`.
pub fn train_count(n: usize, fraction: f64) -> usize {
    if n == 0 {
        return 0;
    }
    ((n as f64 * fraction).round() as usize).clamp(1, n)
}

/// Seeded version-level split into sorted (train, test) index lists.
pub fn split_versions(n: usize, fraction: f64, rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let k = train_count(n, fraction);
    let mut train = idx[..k].to_vec();
    let mut test = idx[k..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Spectra of one version's failures with their culprit fault labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSpectra {
    pub images: Vec<PmsImage>,
    pub labels: Vec<usize>,
}

/// Every within-version pair of failures, labelled by whether both share a
/// culprit. Pairs never cross versions.
pub fn training_pairs(versions: &[LabeledSpectra], side: usize) -> (Vec<Input>, Vec<TrainingPair>) {
    let mut inputs = Vec::new();
    let mut pairs = Vec::new();
    for v in versions {
        let base = inputs.len();
        inputs.extend(v.images.iter().map(|img| resize_uniform(img, side)));
        for i in 0..v.labels.len() {
            for j in i + 1..v.labels.len() {
                pairs.push(TrainingPair {
                    a: base + i,
                    b: base + j,
                    same: v.labels[i] == v.labels[j],
                });
            }
        }
    }
    (inputs, pairs)
}
