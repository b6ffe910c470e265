use failidx::evaluate::EvalReport;
use failidx::indexer::{ClusteringResult, Method};
use failidx::workbench::fixtures;
use failidx_cli::docs::{
    read_doc, write_doc, write_json, ClusterDocument, FaultsDocument, Header, TraceDocument,
    TrainDocument,
};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn failidx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_failidx"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes the motivating program and its 12-test suite into `dir`.
fn motivating(dir: &Path) -> (PathBuf, PathBuf) {
    let program = dir.join("motivating").join("program.toy");
    std::fs::create_dir_all(program.parent().unwrap()).unwrap();
    std::fs::write(&program, fixtures::WORDS_FAULTY).unwrap();
    let suite = dir.join("motivating").join("suite.json");
    write_json(&suite, &fixtures::words_suite()).unwrap();
    (program, suite)
}

#[test]
fn trace_of_the_motivating_example() {
    let dir = tempfile::tempdir().unwrap();
    let (program, suite) = motivating(dir.path());
    let run = dir.path().join("run");
    let o = failidx(&[
        "--out",
        s(&run),
        "trace",
        "--program",
        s(&program),
        "--suite",
        s(&suite),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: TraceDocument = read_doc(&run.join("traces.json")).unwrap();
    assert_eq!(doc.version_id, "motivating");
    assert_eq!((doc.suite.failed, doc.suite.passed), (6, 6));
    assert_eq!(doc.statements, 17);
    assert_eq!(doc.breakpoints.len(), 1);
    assert_eq!(doc.memory.len(), 6);

    let first = std::fs::read(run.join("traces.json")).unwrap();
    let o = failidx(&[
        "--out",
        s(&run),
        "trace",
        "--program",
        s(&program),
        "--suite",
        s(&suite),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(run.join("traces.json")).unwrap(), first);
}

#[test]
fn empty_suite_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (program, _) = motivating(dir.path());
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "[]").unwrap();
    let o = failidx(&[
        "--out",
        s(dir.path()),
        "trace",
        "--program",
        s(&program),
        "--suite",
        s(&empty),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty"));
}

#[test]
fn identical_coverage_is_flagged_by_index() {
    let dir = tempfile::tempdir().unwrap();
    let (program, suite) = motivating(dir.path());
    let run = dir.path().join("run");
    let out = ["--out", s(&run)];
    let trace = [
        &out[..],
        &["trace", "--program", s(&program), "--suite", s(&suite)],
    ]
    .concat();
    assert_eq!(code(&failidx(&trace)), 0);
    assert_eq!(code(&failidx(&[&out[..], &["pms"]].concat())), 0);
    assert_eq!(
        code(&failidx(
            &[&out[..], &["--method", "cov_hit", "index"]].concat()
        )),
        0
    );
    let c: ClusterDocument = read_doc(&run.join("cov_hit").join("clusters.json")).unwrap();
    assert!(c.identical_fingerprints);
    assert_eq!(c.clusters.k, 1);
    assert!(run.join("cov_hit").join("distances.json").exists());
    assert_eq!(std::fs::read_dir(run.join("pms")).unwrap().count(), 12);

    let o = failidx(&[&out[..], &["--method", "sure", "index"]].concat());
    assert_eq!(code(&o), 1, "sure without a model");
}

fn faults_doc(id: &str, r: usize, oracle: &[(&str, usize)]) -> FaultsDocument {
    let words = fixtures::words_faults();
    FaultsDocument {
        header: Header::of::<FaultsDocument>(),
        version_id: id.into(),
        subject: "words".into(),
        faults: words.into_iter().cycle().take(r).collect(),
        oracle: oracle.iter().map(|(t, f)| (t.to_string(), *f)).collect(),
    }
}

fn cluster_doc(id: &str, failures: &[&str], assignment: Vec<usize>, k: usize) -> ClusterDocument {
    ClusterDocument {
        header: Header::of::<ClusterDocument>(),
        version_id: id.into(),
        method: Method::CovHit,
        failures: failures.iter().map(|f| f.to_string()).collect(),
        clusters: ClusteringResult {
            k,
            medoids: (0..k).collect(),
            assignment,
            cost: 0.0,
        },
        identical_fingerprints: false,
    }
}

#[test]
fn eval_counts_versions_with_the_right_fault_count() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let oracle = [("t1", 0), ("t2", 0), ("t3", 1), ("t4", 1)];
    for id in ["va", "vb"] {
        write_doc(
            &root.join("versions").join(id).join("faults.json"),
            &faults_doc(id, 2, &oracle),
        )
        .unwrap();
    }
    let failures = ["t1", "t2", "t3", "t4"];
    let clusters = |id: &str| {
        root.join("runs")
            .join(id)
            .join("cov_hit")
            .join("clusters.json")
    };
    write_doc(
        &clusters("va"),
        &cluster_doc("va", &failures, vec![1, 1, 0, 0], 2),
    )
    .unwrap();
    write_doc(
        &clusters("vb"),
        &cluster_doc("vb", &failures, vec![0, 0, 0, 0], 1),
    )
    .unwrap();

    let o = failidx(&["--out", s(root), "eval"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: EvalReport =
        serde_json::from_slice(&std::fs::read(root.join("reports").join("eval.json")).unwrap())
            .unwrap();
    let sum = report.techniques["cov_hit"].summary;
    assert_eq!((sum.versions, sum.v_equal), (2, 1));
    assert_eq!(sum.s_fmi, 1.0);
    let table = std::fs::read_to_string(root.join("reports").join("eval.txt")).unwrap();
    assert!(table.contains("V_equal"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("cov_hit"));

    // a clustered failure the oracle does not know is a data error
    write_doc(
        &clusters("vb"),
        &cluster_doc("vb", &["t1", "t2", "t3", "t9"], vec![0; 4], 1),
    )
    .unwrap();
    assert_eq!(code(&failidx(&["--out", s(root), "eval"])), 2);
}

#[test]
fn train_uses_thirty_percent_of_the_versions() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let config = root.join("run.toml");
    std::fs::write(
        &config,
        "seed = 3\narch = \"tiny\"\nuniform_side = 8\nepochs = 1\n[bench]\nversions = 10\ntests_per_subject = 30\n",
    )
    .unwrap();
    let base = ["--config", s(&config)];
    let bench_root = root.join("bench");
    let o = failidx(&[&base[..], &["--out", s(&bench_root), "generate"]].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let versions = bench_root.join("versions");
    let mut ids: Vec<String> = std::fs::read_dir(&versions)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    ids.sort();
    assert_eq!(ids.len(), 10);
    for id in &ids {
        let v = versions.join(id);
        let (program, suite) = (v.join("program.toy"), v.join("suite.json"));
        let run = bench_root.join("runs").join(id);
        let trace = [
            &base[..],
            &["--out", s(&run), "trace", "--program", s(&program)],
            &["--suite", s(&suite)],
        ]
        .concat();
        assert_eq!(code(&failidx(&trace)), 0);
        assert_eq!(
            code(&failidx(&[&base[..], &["--out", s(&run), "pms"]].concat())),
            0
        );
    }
    let o = failidx(&[&base[..], &["--out", s(&bench_root), "train"]].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t: TrainDocument = read_doc(&bench_root.join("model").join("train.json")).unwrap();
    assert_eq!(t.train_versions.len(), 3);
    assert_eq!(t.test_versions.len(), 7);
    assert!(t
        .train_versions
        .iter()
        .all(|v| !t.test_versions.contains(v)));
    assert!(bench_root.join("model").join("model.bin").exists());

    // generating into an existing tree is refused
    let o = failidx(&[&base[..], &["--out", s(&bench_root), "generate"]].concat());
    assert_eq!(code(&o), 1);
}

#[test]
fn flags_and_exit_codes() {
    assert_eq!(code(&failidx(&["--help"])), 0);
    assert_eq!(code(&failidx(&["--version"])), 0);
    assert_eq!(code(&failidx(&["--method", "crosstab", "eval"])), 1);
    assert_eq!(code(&failidx(&["--formula", "ochiai", "eval"])), 1);
    assert_eq!(code(&failidx(&["--top-x", "150", "eval"])), 1);
    assert_eq!(code(&failidx(&["frobnicate"])), 1);

    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&failidx(&["--out", s(dir.path()), "pms"])),
        2,
        "missing traces.json"
    );
    let bad = dir.path().join("traces.json");
    std::fs::write(&bad, r#"{"schema": "failidx.traces", "schema_version": 9}"#).unwrap();
    assert_eq!(code(&failidx(&["--out", s(dir.path()), "pms"])), 2);
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&failidx(&["--config", s(&missing), "eval"])), 1);
}
