//! Run configuration, read from TOML and overridden by flags.

use crate::error::{CliError, Result};
use failidx::bench::BenchConfig;
use failidx::indexer::{Method, MountainConfig};
use failidx::memcollect::DEFAULT_TOP_X;
use failidx::pipeline::TraceConfig;
use failidx::simnet::TrainConfig;
use failidx::spectrum::Formula;
use failidx::workbench::DEFAULT_STEP_BUDGET;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Top-x% of statements used as breakpoints.
    pub breakpoint_x: f64,
    pub sbfl_formula: Formula,
    pub step_budget: u64,
    pub uniform_side: usize,
    pub train_split_fraction: f64,
    pub method: Method,
    pub arch: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
    pub lr_decay: f64,
    pub mountain: MountainConfig,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        RunConfig {
            seed: 0,
            breakpoint_x: DEFAULT_TOP_X,
            sbfl_formula: Formula::Dstar2,
            step_budget: DEFAULT_STEP_BUDGET,
            uniform_side: train.uniform_side,
            train_split_fraction: 0.30,
            method: Method::Sure,
            arch: "alexnet-small".into(),
            epochs: train.epochs,
            batch_size: train.batch_size,
            initial_lr: train.initial_lr,
            lr_decay: train.lr_decay,
            mountain: MountainConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub method: Option<Method>,
    pub formula: Option<Formula>,
    pub top_x: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, or returns the defaults when no file is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                Self::from_toml(&text)
            }
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(m) = o.method {
            self.method = m;
        }
        if let Some(f) = o.formula {
            self.sbfl_formula = f;
        }
        if let Some(x) = o.top_x {
            self.breakpoint_x = x;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Usage(m));
        if !(self.breakpoint_x > 0.0 && self.breakpoint_x <= 100.0) {
            return bad(format!(
                "breakpoint_x must be in (0, 100], got {}",
                self.breakpoint_x
            ));
        }
        if !(self.train_split_fraction > 0.0 && self.train_split_fraction <= 1.0) {
            return bad(format!(
                "train_split_fraction must be in (0, 1], got {}",
                self.train_split_fraction
            ));
        }
        if self.uniform_side == 0 || self.batch_size == 0 || self.step_budget == 0 {
            return bad("uniform_side, batch_size and step_budget must be positive".into());
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0 && self.initial_lr > 0.0) {
            return bad("lr_decay must be in (0, 1] and initial_lr positive".into());
        }
        Ok(())
    }

    pub fn trace_config(&self) -> TraceConfig {
        TraceConfig {
            formula: self.sbfl_formula,
            top_x: self.breakpoint_x,
            step_budget: self.step_budget,
        }
    }

    /// Training schedule; `seed` drives the epoch shuffles.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            initial_lr: self.initial_lr,
            lr_decay: self.lr_decay,
            epochs: self.epochs,
            uniform_side: self.uniform_side,
            seed,
        }
    }
}
