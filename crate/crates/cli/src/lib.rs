//! Command-line front end of the failure-indexing pipeline.
//!
//! Each subcommand works in one directory given by `--out` (default `.`):
//! `trace`, `pms` and `index` treat it as a run directory, the others as the
//! benchmark root. Exit codes: 0 success, 1 usage, 2 data error, 3 internal.

pub mod commands;
pub mod config;
pub mod docs;
pub mod error;
pub mod layout;

use clap::{Parser, Subcommand};
use config::{Overrides, RunConfig};
use error::{CliError, Result};
use failidx::indexer::Method;
use failidx::spectrum::Formula;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "failidx",
    version,
    about = "Index failed tests by their culprit fault"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// sure, cov_hit, cov_count or mseer_gp19.
    #[arg(long, global = true)]
    pub method: Option<Method>,
    /// SBFL formula used to pick breakpoints: gp03, dstar2 or gp19.
    #[arg(long, global = true)]
    pub formula: Option<Formula>,
    /// Percentage of top-ranked statements used as breakpoints.
    #[arg(long = "top-x", global = true)]
    pub top_x: Option<f64>,
    /// Working directory of the command.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the subject programs and seeded faulty versions.
    Generate,
    /// Run a suite and collect memory of the failures into traces.json.
    Trace {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        suite: PathBuf,
        /// Version id recorded in the document; defaults to the program's
        /// parent directory name.
        #[arg(long)]
        id: Option<String>,
    },
    /// Render one spectrum image per failure of traces.json.
    Pms,
    /// Train the similarity model on the training split.
    Train,
    /// Cluster the failures of a run with the selected method.
    Index {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Score every indexed run against its oracle.
    Eval,
    /// generate, trace, pms, train, index and eval in one go.
    Bench,
}

impl Cli {
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        cfg.apply(&Overrides {
            seed: self.seed,
            method: self.method,
            formula: self.formula,
            top_x: self.top_x,
        })?;
        Ok(cfg)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.run_config()?;
    let out = &cli.out;
    match &cli.command {
        Command::Generate => {
            let ids = commands::generate(&cfg, out)?;
            println!("generated {} versions under {}", ids.len(), out.display());
        }
        Command::Trace { program, suite, id } => {
            let id = match id {
                Some(id) => id.clone(),
                None => program
                    .parent()
                    .and_then(|p| p.file_name())
                    .map(|n| n.to_string_lossy().into_owned())
                    .ok_or_else(|| {
                        CliError::Usage("cannot infer a version id; pass --id".into())
                    })?,
            };
            let doc = commands::trace(&cfg, program, suite, &id, out)?;
            println!(
                "{}: {} tests, {} failed, {} breakpoints",
                doc.version_id,
                doc.suite.tests,
                doc.suite.failed,
                doc.breakpoints.len()
            );
        }
        Command::Pms => {
            let n = commands::pms(out)?;
            println!("wrote {n} spectra");
        }
        Command::Train => {
            let t = commands::train(&cfg, out)?;
            println!(
                "trained on {} versions ({} pairs), held out {}",
                t.train_versions.len(),
                t.pairs,
                t.test_versions.len()
            );
        }
        Command::Index { model } => {
            let c = commands::index(&cfg, out, model.as_deref())?;
            println!("{} {}: k = {}", c.version_id, c.method, c.clusters.k);
        }
        Command::Eval => print!("{}", commands::eval(out)?.to_table()),
        Command::Bench => print!("{}", commands::bench(&cfg, out)?.to_table()),
    }
    Ok(())
}
