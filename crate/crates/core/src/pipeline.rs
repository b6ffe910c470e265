//! Per-version glue between the stages: run the suite, pick breakpoints,
//! collect memory of the failures, render spectra and build the distance
//! matrix of a technique.

use crate::indexer::{self, ClusteringResult, DistanceMatrix, IndexError, Method, MountainConfig};
use crate::memcollect::{self, BreakpointError, BreakpointSet, CollectError, MemoryTrace};
use crate::pms::{PmsError, PmsImage, Sidecar};
use crate::simnet::{self, Network, SimnetError};
use crate::spectrum::{self, CoverageVariant, Formula};
use crate::workbench::{self, Program, RunError, TestCase, TestTrace};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Breakpoint(#[from] BreakpointError),
    #[error(transparent)]
    Collect(#[from] CollectError),
    #[error(transparent)]
    Pms(#[from] PmsError),
    #[error(transparent)]
    Simnet(#[from] SimnetError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("the suite is empty")]
    EmptySuite,
    #[error("no test fails, nothing to index")]
    NoFailures,
    #[error("method `sure` needs a trained model")]
    MissingModel,
    #[error("{0} spectra given for {1} failures")]
    SpectrumCount(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub formula: Formula,
    pub top_x: f64,
    pub step_budget: u64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            formula: Formula::Dstar2,
            top_x: memcollect::DEFAULT_TOP_X,
            step_budget: workbench::DEFAULT_STEP_BUDGET,
        }
    }
}

/// Everything observed while running one version's suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionTrace {
    /// Statement count of the program.
    pub l: u32,
    pub traces: Vec<TestTrace>,
    pub breakpoints: BreakpointSet,
    /// One per failed test, in suite order.
    pub memory: Vec<MemoryTrace>,
}

impl VersionTrace {
    pub fn failed(&self) -> Vec<&TestTrace> {
        self.traces.iter().filter(|t| t.failed()).collect()
    }

    pub fn passed(&self) -> Vec<&TestTrace> {
        self.traces.iter().filter(|t| !t.failed()).collect()
    }
}

/// Runs the suite, ranks statements over all tests and reruns each failure
/// with the Top-x% statements as breakpoints.
pub fn trace_version(
    program: &Program,
    suite: &[TestCase],
    cfg: &TraceConfig,
) -> Result<VersionTrace, PipelineError> {
    if suite.is_empty() {
        return Err(PipelineError::EmptySuite);
    }
    let l = program.statement_count();
    let traces = workbench::run_suite(program, suite, cfg.step_budget)?;
    let counts = spectrum::spectrum_counts(&traces, l);
    let scores = spectrum::suspiciousness(&counts, cfg.formula);
    let breakpoints = memcollect::select_breakpoints(&scores, cfg.top_x)?;
    let memory = suite
        .iter()
        .zip(&traces)
        .filter(|(_, t)| t.failed())
        .map(|(tc, _)| memcollect::collect_memory(program, tc, &breakpoints, cfg.step_budget))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VersionTrace {
        l,
        traces,
        breakpoints,
        memory,
    })
}

/// Spectrum of one failure. A failure that never reached a breakpoint gets
/// the 1x1 blank image so it can still be indexed.
pub fn spectrum_image(mt: &MemoryTrace) -> Result<(PmsImage, Sidecar), PmsError> {
    if mt.m == 0 {
        log::warn!(
            "{}: no breakpoint reached, using a blank spectrum",
            mt.test_id
        );
        let img = PmsImage::blank();
        return Ok((
            img,
            Sidecar {
                original_side: 1,
                m: 0,
            },
        ));
    }
    let img = PmsImage::from_trace(mt)?;
    let sidecar = Sidecar {
        original_side: img.side,
        m: mt.m,
    };
    Ok((img, sidecar))
}

pub fn spectrum_images(memory: &[MemoryTrace]) -> Result<Vec<PmsImage>, PmsError> {
    memory
        .iter()
        .map(|mt| spectrum_image(mt).map(|(img, _)| img))
        .collect()
}

pub fn coverage_distances(
    failed: &[&TestTrace],
    l: u32,
    variant: CoverageVariant,
) -> Result<DistanceMatrix, IndexError> {
    let fps: Vec<Vec<f64>> = failed
        .iter()
        .map(|t| spectrum::coverage_fingerprint(t, l, variant))
        .collect();
    let mut err = None;
    let d = DistanceMatrix::from_fn(fps.len(), |i, j| {
        indexer::euclidean(&fps[i], &fps[j]).unwrap_or_else(|e| {
            err = Some(e);
            0.0
        })
    })?;
    err.map_or(Ok(d), Err)
}

/// Kendall distances between the GP19 ranking lists of each failure.
pub fn ranking_distances(
    failed: &[&TestTrace],
    passed: &[&TestTrace],
    l: u32,
) -> Result<DistanceMatrix, IndexError> {
    let fps: Vec<Vec<u32>> = failed
        .iter()
        .map(|t| spectrum::ranking_fingerprint(t, passed, l, Formula::Gp19))
        .collect();
    let mut err = None;
    let d = DistanceMatrix::from_fn(fps.len(), |i, j| {
        indexer::kendall_distance(&fps[i], &fps[j]).unwrap_or_else(|e| {
            err = Some(e);
            0.0
        })
    })?;
    err.map_or(Ok(d), Err)
}

/// `(1 - similarity) * SizeDiv` over the spectra, resized to the model input.
pub fn sure_distances(net: &Network, images: &[PmsImage]) -> Result<DistanceMatrix, PipelineError> {
    let side = net.config.input_side;
    let inputs: Vec<simnet::Input> = images
        .iter()
        .map(|img| simnet::resize_uniform(img, side))
        .collect();
    let sim = simnet::similarity_matrix(net, &inputs)?;
    Ok(DistanceMatrix::from_fn(inputs.len(), |i, j| {
        let sd = indexer::size_div(inputs[i].original_side, inputs[j].original_side);
        indexer::pms_distance(sim[i][j], sd)
    })?)
}

/// Distance matrix of `method` over the failures of `trace`. `images` must
/// hold one spectrum per failure for `sure` and is ignored otherwise.
pub fn distances(
    method: Method,
    trace: &VersionTrace,
    images: &[PmsImage],
    model: Option<&Network>,
) -> Result<DistanceMatrix, PipelineError> {
    let failed = trace.failed();
    if failed.is_empty() {
        return Err(PipelineError::NoFailures);
    }
    Ok(match method {
        Method::Sure => {
            let net = model.ok_or(PipelineError::MissingModel)?;
            if images.len() != failed.len() {
                return Err(PipelineError::SpectrumCount(images.len(), failed.len()));
            }
            sure_distances(net, images)?
        }
        Method::CovHit => coverage_distances(&failed, trace.l, CoverageVariant::Hit)?,
        Method::CovCount => coverage_distances(&failed, trace.l, CoverageVariant::Count)?,
        Method::MseerGp19 => ranking_distances(&failed, &trace.passed(), trace.l)?,
    })
}

/// True when the technique's proxy is the same for every failure (and there
/// are at least two), so no distance can separate them.
pub fn fingerprints_identical(method: Method, trace: &VersionTrace, images: &[PmsImage]) -> bool {
    fn all_equal<T: PartialEq>(v: &[T]) -> bool {
        v.len() > 1 && v.windows(2).all(|w| w[0] == w[1])
    }
    let failed = trace.failed();
    match method {
        Method::Sure => all_equal(images),
        Method::CovHit | Method::CovCount => {
            let variant = if method == Method::CovHit {
                CoverageVariant::Hit
            } else {
                CoverageVariant::Count
            };
            let fps: Vec<Vec<f64>> = failed
                .iter()
                .map(|t| spectrum::coverage_fingerprint(t, trace.l, variant))
                .collect();
            all_equal(&fps)
        }
        Method::MseerGp19 => {
            let passed = trace.passed();
            let fps: Vec<Vec<u32>> = failed
                .iter()
                .map(|t| spectrum::ranking_fingerprint(t, &passed, trace.l, Formula::Gp19))
                .collect();
            all_equal(&fps)
        }
    }
}

/// Distances followed by count estimation and K-medoids.
pub fn index_failures(
    method: Method,
    trace: &VersionTrace,
    images: &[PmsImage],
    model: Option<&Network>,
    mountain: &MountainConfig,
) -> Result<(DistanceMatrix, ClusteringResult), PipelineError> {
    let d = distances(method, trace, images, model)?;
    let c = indexer::cluster(&d, mountain)?;
    Ok((d, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::NetConfig;
    use crate::workbench::fixtures::{words_suite, words_version};

    fn words_trace() -> VersionTrace {
        trace_version(
            &words_version().program,
            &words_suite(),
            &TraceConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn word_example_trace() {
        let vt = words_trace();
        assert_eq!(vt.l, 17);
        assert_eq!(vt.failed().len(), 6);
        assert_eq!(vt.breakpoints.q(), 1);
        assert_eq!(vt.memory.len(), 6);
        let ids: Vec<&str> = vt.memory.iter().map(|m| m.test_id.as_str()).collect();
        assert_eq!(ids, ["t1", "t2", "t3", "t4", "t5", "t6"]);
    }

    #[test]
    fn identical_coverage_collapses_to_one_cluster() {
        let vt = words_trace();
        let (d, c) =
            index_failures(Method::CovHit, &vt, &[], None, &MountainConfig::default()).unwrap();
        assert!(d.rows().iter().flatten().all(|&v| v == 0.0));
        assert_eq!(c.k, 1);
        assert_eq!(c.assignment, vec![0; 6]);
        assert!(fingerprints_identical(Method::CovHit, &vt, &[]));
        let images = spectrum_images(&vt.memory).unwrap();
        assert!(!fingerprints_identical(Method::Sure, &vt, &images));
    }

    #[test]
    fn every_method_yields_a_valid_matrix() {
        let vt = words_trace();
        let images = spectrum_images(&vt.memory).unwrap();
        let net = Network::new(NetConfig::preset("tiny", 8).unwrap(), 3).unwrap();
        for m in Method::ALL {
            let d = distances(m, &vt, &images, Some(&net)).unwrap();
            assert_eq!(d.len(), 6, "{m}");
        }
        assert!(matches!(
            distances(Method::Sure, &vt, &images, None),
            Err(PipelineError::MissingModel)
        ));
        assert!(matches!(
            distances(Method::Sure, &vt, &images[..2], Some(&net)),
            Err(PipelineError::SpectrumCount(2, 6))
        ));
    }

    #[test]
    fn unreached_breakpoints_give_a_blank_spectrum() {
        let (img, side) = spectrum_image(&MemoryTrace::new("t", vec![])).unwrap();
        assert_eq!(img, PmsImage::blank());
        assert_eq!(
            side,
            Sidecar {
                original_side: 1,
                m: 0
            }
        );
    }

    #[test]
    fn empty_suite_is_rejected() {
        let p = words_version().program;
        assert!(matches!(
            trace_version(&p, &[], &TraceConfig::default()),
            Err(PipelineError::EmptySuite)
        ));
    }
}
