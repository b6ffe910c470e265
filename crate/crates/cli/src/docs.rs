//! On-disk JSON documents. Every document carries a schema name and version
//! that readers check before trusting the payload.

use crate::error::{CliError, Result};
use failidx::indexer::{ClusteringResult, DistanceMatrix, Method};
use failidx::memcollect::{BreakpointSet, MemoryTrace};
use failidx::pipeline::VersionTrace;
use failidx::simnet::TrainReport;
use failidx::spectrum::Formula;
use failidx::workbench::{Mutant, StmtId, TestTrace};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// Implemented by every document type; ties it to its schema name.
pub trait Document: Serialize + DeserializeOwned {
    const SCHEMA: &'static str;

    fn header(&self) -> &Header;

    /// Content checks beyond the schema header.
    fn check(&self) -> std::result::Result<(), String> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub schema: String,
    pub schema_version: u32,
}

impl Header {
    pub fn of<D: Document>() -> Self {
        Header {
            schema: D::SCHEMA.to_string(),
            schema_version: SCHEMA_VERSION,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::data(path.display(), e))
}

pub fn write_doc<D: Document>(path: &Path, doc: &D) -> Result<()> {
    write_json(path, doc)
}

/// Reads a document and validates its header and content.
pub fn read_doc<D: Document>(path: &Path) -> Result<D> {
    let doc: D = read_json(path)?;
    let h = doc.header();
    if h.schema != D::SCHEMA || h.schema_version != SCHEMA_VERSION {
        return Err(CliError::Data(format!(
            "{}: expected schema {} v{}, found {} v{}",
            path.display(),
            D::SCHEMA,
            SCHEMA_VERSION,
            h.schema,
            h.schema_version
        )));
    }
    doc.check()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteMeta {
    pub tests: usize,
    pub failed: usize,
    pub passed: usize,
}

/// Output of `trace`: coverage of every test plus the memory of every
/// failure at the chosen breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDocument {
    #[serde(flatten)]
    pub header: Header,
    pub version_id: String,
    pub formula: Formula,
    pub top_x: f64,
    /// Statement count of the traced program.
    pub statements: u32,
    pub suite: SuiteMeta,
    pub breakpoints: Vec<StmtId>,
    pub traces: Vec<TestTrace>,
    pub memory: Vec<MemoryTrace>,
}

impl Document for TraceDocument {
    const SCHEMA: &'static str = "failidx.traces";

    fn header(&self) -> &Header {
        &self.header
    }

    fn check(&self) -> std::result::Result<(), String> {
        let failed: Vec<&str> = self
            .traces
            .iter()
            .filter(|t| t.failed())
            .map(|t| t.test_id.as_str())
            .collect();
        let memory: Vec<&str> = self.memory.iter().map(|m| m.test_id.as_str()).collect();
        if failed != memory {
            return Err("memory traces do not match the failed tests".into());
        }
        if let Some(t) = self
            .traces
            .iter()
            .find(|t| t.hit_counts.keys().any(|&s| s == 0 || s > self.statements))
        {
            return Err(format!(
                "{} covers a statement outside 1..={}",
                t.test_id, self.statements
            ));
        }
        if self.memory.iter().any(|m| !m.is_consistent()) {
            return Err("a memory trace disagrees with its entry count".into());
        }
        Ok(())
    }
}

impl TraceDocument {
    pub fn new(version_id: &str, formula: Formula, top_x: f64, vt: VersionTrace) -> Self {
        let failed = vt.failed().len();
        TraceDocument {
            header: Header::of::<Self>(),
            version_id: version_id.to_string(),
            formula,
            top_x,
            statements: vt.l,
            suite: SuiteMeta {
                tests: vt.traces.len(),
                failed,
                passed: vt.traces.len() - failed,
            },
            breakpoints: vt.breakpoints.statements,
            traces: vt.traces,
            memory: vt.memory,
        }
    }

    pub fn version_trace(&self) -> VersionTrace {
        VersionTrace {
            l: self.statements,
            traces: self.traces.clone(),
            breakpoints: BreakpointSet {
                statements: self.breakpoints.clone(),
            },
            memory: self.memory.clone(),
        }
    }

    pub fn failed_ids(&self) -> Vec<String> {
        self.memory.iter().map(|m| m.test_id.clone()).collect()
    }
}

/// Injected faults of a generated version and the culprit of each failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultsDocument {
    #[serde(flatten)]
    pub header: Header,
    pub version_id: String,
    pub subject: String,
    pub faults: Vec<Mutant>,
    /// Failing test id -> index into `faults`.
    pub oracle: BTreeMap<String, usize>,
}

impl Document for FaultsDocument {
    const SCHEMA: &'static str = "failidx.faults";

    fn header(&self) -> &Header {
        &self.header
    }

    fn check(&self) -> std::result::Result<(), String> {
        match self.oracle.iter().find(|(_, &f)| f >= self.faults.len()) {
            Some((t, f)) => Err(format!("{t} blames fault {f} of {}", self.faults.len())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceDocument {
    #[serde(flatten)]
    pub header: Header,
    pub version_id: String,
    pub method: Method,
    pub failures: Vec<String>,
    pub matrix: DistanceMatrix,
}

impl Document for DistanceDocument {
    const SCHEMA: &'static str = "failidx.distances";

    fn header(&self) -> &Header {
        &self.header
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.failures.len() != self.matrix.len() {
            return Err("matrix size differs from the failure count".into());
        }
        Ok(())
    }
}

/// Output of `index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDocument {
    #[serde(flatten)]
    pub header: Header,
    pub version_id: String,
    pub method: Method,
    /// Failed test ids; `clusters.assignment[i]` belongs to `failures[i]`.
    pub failures: Vec<String>,
    pub clusters: ClusteringResult,
    /// Set when every failure got the same fingerprint, so the technique
    /// cannot tell any of them apart.
    pub identical_fingerprints: bool,
}

impl Document for ClusterDocument {
    const SCHEMA: &'static str = "failidx.clusters";

    fn header(&self) -> &Header {
        &self.header
    }

    fn check(&self) -> std::result::Result<(), String> {
        let c = &self.clusters;
        if c.assignment.len() != self.failures.len() || c.medoids.len() != c.k {
            return Err("assignment or medoids do not match the failures".into());
        }
        if c.assignment.iter().any(|&a| a >= c.k) {
            return Err(format!("assignment refers past k = {}", c.k));
        }
        Ok(())
    }
}

/// Output of `train`, stored next to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainDocument {
    #[serde(flatten)]
    pub header: Header,
    pub seed: u64,
    pub arch: String,
    pub uniform_side: usize,
    pub train_versions: Vec<String>,
    pub test_versions: Vec<String>,
    pub spectra: usize,
    pub pairs: usize,
    pub positive_pairs: usize,
    pub report: TrainReport,
}

impl Document for TrainDocument {
    const SCHEMA: &'static str = "failidx.train";

    fn header(&self) -> &Header {
        &self.header
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self
            .train_versions
            .iter()
            .any(|v| self.test_versions.contains(v))
        {
            return Err("a version is in both splits".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use failidx::workbench::Outcome;

    fn trace_doc() -> TraceDocument {
        let t = |id: &str, outcome| TestTrace {
            test_id: id.into(),
            outcome,
            hit_counts: [(1, 1), (2, 3)].into(),
            output: String::new(),
        };
        TraceDocument {
            header: Header::of::<TraceDocument>(),
            version_id: "v".into(),
            formula: Formula::Dstar2,
            top_x: 10.0,
            statements: 2,
            suite: SuiteMeta {
                tests: 2,
                failed: 1,
                passed: 1,
            },
            breakpoints: vec![2],
            traces: vec![t("a", Outcome::Failed), t("b", Outcome::Passed)],
            memory: vec![MemoryTrace::new("a", vec![])],
        }
    }

    #[test]
    fn round_trip_and_header_checks() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("traces.json");
        let doc = trace_doc();
        write_doc(&p, &doc).unwrap();
        assert_eq!(read_doc::<TraceDocument>(&p).unwrap(), doc);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("\"schema\": \"failidx.traces\""));
        std::fs::write(
            &p,
            text.replace("\"schema_version\": 1", "\"schema_version\": 7"),
        )
        .unwrap();
        let e = read_doc::<TraceDocument>(&p).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(read_doc::<ClusterDocument>(&dir.path().join("missing.json")).is_err());
    }

    #[test]
    fn trace_document_checks_memory_against_failures() {
        let mut doc = trace_doc();
        assert!(doc.check().is_ok());
        doc.memory.clear();
        assert!(doc.check().is_err());
        let mut doc = trace_doc();
        doc.statements = 1;
        assert!(doc.check().is_err());
    }
}
