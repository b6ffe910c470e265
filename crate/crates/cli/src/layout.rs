//! Paths of the benchmark tree:
//!
//! ```text
//! <root>/fixtures/<subject>/program.toy
//! <root>/versions/<id>/{program.toy, faults.json, suite.json}
//! <root>/runs/<id>/{traces.json, pms/, <method>/{distances.json, clusters.json}}
//! <root>/model/{model.bin, train.json}
//! <root>/reports/{eval.json, eval.txt}
//! ```

use crate::error::{CliError, Result};
use failidx::indexer::Method;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn fixture_dir(&self, subject: &str) -> PathBuf {
        self.root.join("fixtures").join(subject)
    }

    pub fn versions_dir(&self) -> PathBuf {
        self.root.join("versions")
    }

    pub fn version_dir(&self, id: &str) -> PathBuf {
        self.versions_dir().join(id)
    }

    pub fn run_dir(&self, id: &str) -> PathBuf {
        self.root.join("runs").join(id)
    }

    pub fn model_dir(&self) -> PathBuf {
        self.root.join("model")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    /// Sorted ids of the generated versions.
    pub fn version_ids(&self) -> Result<Vec<String>> {
        list_dirs(&self.versions_dir())
    }
}

pub fn program_file(version_dir: &Path) -> PathBuf {
    version_dir.join("program.toy")
}

pub fn suite_file(version_dir: &Path) -> PathBuf {
    version_dir.join("suite.json")
}

pub fn faults_file(version_dir: &Path) -> PathBuf {
    version_dir.join("faults.json")
}

pub fn traces_file(run_dir: &Path) -> PathBuf {
    run_dir.join("traces.json")
}

pub fn pms_dir(run_dir: &Path) -> PathBuf {
    run_dir.join("pms")
}

pub fn method_dir(run_dir: &Path, method: Method) -> PathBuf {
    run_dir.join(method.name())
}

pub fn model_file(model_dir: &Path) -> PathBuf {
    model_dir.join("model.bin")
}

/// Sorted names of the subdirectories of `dir`.
pub fn list_dirs(dir: &Path) -> Result<Vec<String>> {
    let rd = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        if entry.path().is_dir() {
            out.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    out.sort();
    Ok(out)
}
