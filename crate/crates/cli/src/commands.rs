//! The pipeline stages as functions over on-disk artifacts. Each one reads
//! only what earlier stages wrote, so they can be run one by one or chained
//! by [`bench`].

use crate::config::RunConfig;
use crate::docs::{
    read_doc, read_json, write_doc, write_json, ClusterDocument, DistanceDocument, FaultsDocument,
    Header, TraceDocument, TrainDocument,
};
use crate::error::{CliError, Result};
use crate::layout::{self, Layout};
use failidx::bench::{self, LabeledSpectra, SUBJECTS};
use failidx::evaluate::{self, EvalReport};
use failidx::indexer::Method;
use failidx::pipeline::{self, PipelineError};
use failidx::pms::{PmsImage, Sidecar};
use failidx::simnet::{self, NetConfig, Network};
use failidx::workbench::{self, failing_ids, fixtures, parse_program, Program, TestCase};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::path::Path;

/// Every seeded stage draws from its own stream of the run seed.
#[derive(Debug, Clone, Copy)]
enum Stage {
    Generate = 1,
    Split = 2,
    Init = 3,
    Shuffle = 4,
}

fn stage_rng(seed: u64, stage: Stage) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage as u64);
    rng
}

fn pipeline_err(e: PipelineError) -> CliError {
    match e {
        PipelineError::EmptySuite | PipelineError::MissingModel => CliError::Usage(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_program(path: &Path) -> Result<Program> {
    let src = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_program(&src).map_err(|e| CliError::data(path.display(), e))
}

pub fn read_suite(path: &Path) -> Result<Vec<TestCase>> {
    let suite: Vec<TestCase> = read_json(path)?;
    let mut seen = BTreeSet::new();
    if let Some(t) = suite.iter().find(|t| !seen.insert(t.id.as_str())) {
        return Err(CliError::Data(format!(
            "{}: duplicate test id {}",
            path.display(),
            t.id
        )));
    }
    Ok(suite)
}

/// Writes the subject programs, the motivating example and `bench.versions`
/// seeded faulty versions under `root`. Returns the version ids.
pub fn generate(cfg: &RunConfig, root: &Path) -> Result<Vec<String>> {
    let lay = Layout::new(root);
    if lay.versions_dir().exists() {
        return Err(CliError::Usage(format!(
            "{} already exists; generate into a fresh directory",
            lay.versions_dir().display()
        )));
    }
    for s in &SUBJECTS {
        write_text(&layout::program_file(&lay.fixture_dir(s.name)), s.source)?;
    }
    let motivating = lay.fixture_dir("motivating");
    let words = fixtures::words_version();
    write_text(&layout::program_file(&motivating), fixtures::WORDS_FAULTY)?;
    write_json(&layout::suite_file(&motivating), &fixtures::words_suite())?;
    write_doc(
        &layout::faults_file(&motivating),
        &FaultsDocument {
            header: Header::of::<FaultsDocument>(),
            version_id: "motivating".into(),
            subject: "words".into(),
            faults: words.faults,
            oracle: words.oracle,
        },
    )?;

    let mut rng = stage_rng(cfg.seed, Stage::Generate);
    let versions = bench::generate_versions(&cfg.bench, &mut rng)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut ids = Vec::with_capacity(versions.len());
    for v in versions {
        let dir = lay.version_dir(&v.id);
        let program_path = layout::program_file(&dir);
        write_text(&program_path, &v.version.program.to_source())?;
        write_json(&layout::suite_file(&dir), &v.suite)?;
        // The written source must reproduce the oracle's failing set.
        let reparsed = read_program(&program_path)?;
        let traces = workbench::run_suite(&reparsed, &v.suite, cfg.step_budget)
            .map_err(|e| CliError::Internal(format!("{}: {e}", v.id)))?;
        let expected: BTreeSet<String> = v.version.oracle.keys().cloned().collect();
        let r = v.r();
        if failing_ids(&traces) != expected {
            return Err(CliError::Internal(format!(
                "{}: printed program fails a different set of tests",
                v.id
            )));
        }
        write_doc(
            &layout::faults_file(&dir),
            &FaultsDocument {
                header: Header::of::<FaultsDocument>(),
                version_id: v.id.clone(),
                subject: v.subject.to_string(),
                faults: v.version.faults,
                oracle: v.version.oracle,
            },
        )?;
        log::info!(
            "generated {} ({} faults, {} failures)",
            v.id,
            r,
            expected.len()
        );
        ids.push(v.id);
    }
    Ok(ids)
}

/// Runs `suite` on `program` and writes `<run_dir>/traces.json`.
pub fn trace(
    cfg: &RunConfig,
    program: &Path,
    suite: &Path,
    version_id: &str,
    run_dir: &Path,
) -> Result<TraceDocument> {
    let p = read_program(program)?;
    let s = read_suite(suite)?;
    let tc = cfg.trace_config();
    let vt = pipeline::trace_version(&p, &s, &tc).map_err(pipeline_err)?;
    let doc = TraceDocument::new(version_id, tc.formula, tc.top_x, vt);
    write_doc(&layout::traces_file(run_dir), &doc)?;
    Ok(doc)
}

/// Renders one spectrum per failure into `<run_dir>/pms/<test>.png`, with
/// the original side and memory size in `<test>.json`.
pub fn pms(run_dir: &Path) -> Result<usize> {
    let doc: TraceDocument = read_doc(&layout::traces_file(run_dir))?;
    let dir = layout::pms_dir(run_dir);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    for mt in &doc.memory {
        let (img, sidecar) =
            pipeline::spectrum_image(mt).map_err(|e| CliError::data(&mt.test_id, e))?;
        let png = dir.join(format!("{}.png", mt.test_id));
        img.write_png(&png)
            .map_err(|e| CliError::data(png.display(), e))?;
        write_json(&dir.join(format!("{}.json", mt.test_id)), &sidecar)?;
    }
    Ok(doc.memory.len())
}

/// Spectra of the failures of a run, in failure order.
pub fn read_spectra(run_dir: &Path, failures: &[String]) -> Result<Vec<PmsImage>> {
    let dir = layout::pms_dir(run_dir);
    failures
        .iter()
        .map(|id| {
            let png = dir.join(format!("{id}.png"));
            let img = PmsImage::read_png(&png).map_err(|e| CliError::data(png.display(), e))?;
            let sidecar: Sidecar = read_json(&dir.join(format!("{id}.json")))?;
            if sidecar.original_side != img.side {
                return Err(CliError::Data(format!(
                    "{}: side differs from sidecar",
                    png.display()
                )));
            }
            Ok(img)
        })
        .collect()
}

/// Splits the generated versions, builds within-version pairs from the
/// training split and fits the network. Writes `<root>/model/`.
pub fn train(cfg: &RunConfig, root: &Path) -> Result<TrainDocument> {
    let lay = Layout::new(root);
    let ids = lay.version_ids()?;
    if ids.is_empty() {
        return Err(CliError::Data(format!(
            "no versions under {}",
            lay.versions_dir().display()
        )));
    }
    let (train_idx, test_idx) = bench::split_versions(
        ids.len(),
        cfg.train_split_fraction,
        &mut stage_rng(cfg.seed, Stage::Split),
    );
    let train_versions: Vec<String> = train_idx.iter().map(|&i| ids[i].clone()).collect();
    let test_versions: Vec<String> = test_idx.iter().map(|&i| ids[i].clone()).collect();

    let mut spectra = Vec::with_capacity(train_versions.len());
    for id in &train_versions {
        let run = lay.run_dir(id);
        let doc: TraceDocument = read_doc(&layout::traces_file(&run))?;
        let faults: FaultsDocument = read_doc(&layout::faults_file(&lay.version_dir(id)))?;
        let failures = doc.failed_ids();
        let labels = failures
            .iter()
            .map(|f| {
                faults.oracle.get(f).copied().ok_or_else(|| {
                    CliError::Data(format!("{id}: failure {f} has no culprit in faults.json"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let images = read_spectra(&run, &failures)?;
        spectra.push(LabeledSpectra { images, labels });
    }
    let (inputs, pairs) = bench::training_pairs(&spectra, cfg.uniform_side);
    if pairs.is_empty() {
        return Err(CliError::Data(
            "the training split yields no failure pairs".into(),
        ));
    }
    let net_cfg = NetConfig::preset(&cfg.arch, cfg.uniform_side)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut net = Network::new(net_cfg, stage_rng(cfg.seed, Stage::Init).next_u64())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let tcfg = cfg.train_config(stage_rng(cfg.seed, Stage::Shuffle).next_u64());
    let report = simnet::train(&mut net, &inputs, &pairs, &tcfg)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    if report.single_class {
        log::warn!("every training pair carries the same label");
    }
    let dir = lay.model_dir();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let model = layout::model_file(&dir);
    net.save(&model)
        .map_err(|e| CliError::data(model.display(), e))?;
    let doc = TrainDocument {
        header: Header::of::<TrainDocument>(),
        seed: cfg.seed,
        arch: cfg.arch.clone(),
        uniform_side: cfg.uniform_side,
        train_versions,
        test_versions,
        spectra: inputs.len(),
        pairs: pairs.len(),
        positive_pairs: pairs.iter().filter(|p| p.same).count(),
        report,
    };
    write_doc(&dir.join("train.json"), &doc)?;
    Ok(doc)
}

/// Indexes the failures of a traced run with `cfg.method`. Writes
/// `<run_dir>/<method>/{distances.json, clusters.json}`.
pub fn index(cfg: &RunConfig, run_dir: &Path, model: Option<&Path>) -> Result<ClusterDocument> {
    let method = cfg.method;
    let doc: TraceDocument = read_doc(&layout::traces_file(run_dir))?;
    let failures = doc.failed_ids();
    let (images, net) = if method == Method::Sure {
        let path = model.ok_or_else(|| CliError::Usage("method `sure` needs --model".into()))?;
        let net = Network::load(path).map_err(|e| CliError::data(path.display(), e))?;
        (read_spectra(run_dir, &failures)?, Some(net))
    } else {
        (Vec::new(), None)
    };
    let vt = doc.version_trace();
    let (d, c) = pipeline::index_failures(method, &vt, &images, net.as_ref(), &cfg.mountain)
        .map_err(pipeline_err)?;
    let identical = pipeline::fingerprints_identical(method, &vt, &images);
    if identical {
        log::info!(
            "{}: all failures share one {method} fingerprint",
            doc.version_id
        );
    }
    let out = layout::method_dir(run_dir, method);
    write_doc(
        &out.join("distances.json"),
        &DistanceDocument {
            header: Header::of::<DistanceDocument>(),
            version_id: doc.version_id.clone(),
            method,
            failures: failures.clone(),
            matrix: d,
        },
    )?;
    let clusters = ClusterDocument {
        header: Header::of::<ClusterDocument>(),
        version_id: doc.version_id,
        method,
        failures,
        clusters: c,
        identical_fingerprints: identical,
    };
    write_doc(&out.join("clusters.json"), &clusters)?;
    Ok(clusters)
}

/// Scores every indexed run under `<root>/runs` against the oracle in
/// `<root>/versions/<id>/faults.json`. Writes `<root>/reports/`.
pub fn eval(root: &Path) -> Result<EvalReport> {
    let lay = Layout::new(root);
    let runs = layout::list_dirs(&root.join("runs"))?;
    let mut report = EvalReport::default();
    for method in Method::ALL {
        let mut versions = Vec::new();
        for id in &runs {
            let path = layout::method_dir(&lay.run_dir(id), method).join("clusters.json");
            if !path.exists() {
                continue;
            }
            let c: ClusterDocument = read_doc(&path)?;
            let faults: FaultsDocument = read_doc(&layout::faults_file(&lay.version_dir(id)))?;
            let oracle = c
                .failures
                .iter()
                .map(|f| {
                    faults.oracle.get(f).copied().ok_or_else(|| {
                        CliError::Data(format!(
                            "{}: failure {f} is not in the oracle",
                            path.display()
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if oracle.len() != faults.oracle.len() {
                return Err(CliError::Data(format!(
                    "{}: {} failures indexed, oracle has {}",
                    path.display(),
                    oracle.len(),
                    faults.oracle.len()
                )));
            }
            let ev = evaluate::evaluate_version(
                id,
                &c.clusters.assignment,
                c.clusters.k,
                &oracle,
                faults.faults.len(),
            )
            .map_err(|e| CliError::data(path.display(), e))?;
            versions.push(ev);
        }
        if !versions.is_empty() {
            report.insert(method.name(), versions);
        }
    }
    if report.techniques.is_empty() {
        return Err(CliError::Data(format!(
            "no clusters.json under {}",
            root.join("runs").display()
        )));
    }
    let dir = lay.reports_dir();
    write_json(&dir.join("eval.json"), &report)?;
    write_text(&dir.join("eval.txt"), &report.to_table())?;
    Ok(report)
}

/// generate, trace and render every version, train on the training split,
/// index the held-out versions with every method and evaluate.
pub fn bench(cfg: &RunConfig, root: &Path) -> Result<EvalReport> {
    let lay = Layout::new(root);
    let ids = generate(cfg, root)?;
    for id in &ids {
        let vdir = lay.version_dir(id);
        let run = lay.run_dir(id);
        trace(
            cfg,
            &layout::program_file(&vdir),
            &layout::suite_file(&vdir),
            id,
            &run,
        )?;
        pms(&run)?;
    }
    log::info!("traced {} versions", ids.len());
    let t = train(cfg, root)?;
    log::info!(
        "trained on {} versions, {} pairs, final loss {:.4}",
        t.train_versions.len(),
        t.pairs,
        t.report.loss_history.last().copied().unwrap_or(f64::NAN)
    );
    let model = layout::model_file(&lay.model_dir());
    for id in &t.test_versions {
        for method in Method::ALL {
            let mut c = cfg.clone();
            c.method = method;
            index(&c, &lay.run_dir(id), Some(&model))?;
        }
    }
    eval(root)
}
