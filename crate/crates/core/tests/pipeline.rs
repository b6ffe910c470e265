use failidx::bench::{self, BenchConfig, LabeledSpectra};
use failidx::evaluate;
use failidx::indexer::{Method, MountainConfig};
use failidx::pipeline::{self, TraceConfig};
use failidx::pms::PmsImage;
use failidx::simnet::{self, NetConfig, Network, TrainConfig};
use failidx::workbench::{fixtures, run_suite, DEFAULT_STEP_BUDGET};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

fn small_bench(seed: u64) -> Vec<bench::BenchVersion> {
    let cfg = BenchConfig {
        versions: 8,
        tests_per_subject: 30,
        ..BenchConfig::default()
    };
    bench::generate_versions(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

#[test]
fn generated_versions_respect_the_configuration() {
    let versions = small_bench(11);
    assert_eq!(versions.len(), 8);
    for v in &versions {
        assert!((1..=3).contains(&v.r()), "{}", v.id);
        let culprits: BTreeSet<usize> = v.version.oracle.values().copied().collect();
        assert_eq!(
            culprits.len(),
            v.r(),
            "{}: every fault causes a failure",
            v.id
        );
        assert!((2..=30).contains(&v.version.oracle.len()));
        let traces = run_suite(&v.version.program, &v.suite, DEFAULT_STEP_BUDGET).unwrap();
        let failing: BTreeSet<&str> = traces
            .iter()
            .filter(|t| t.failed())
            .map(|t| t.test_id.as_str())
            .collect();
        let oracle: BTreeSet<&str> = v.version.oracle.keys().map(String::as_str).collect();
        assert_eq!(failing, oracle, "{}", v.id);
    }
    assert_eq!(
        small_bench(11),
        versions,
        "seeded generation is reproducible"
    );
}

#[test]
fn every_method_indexes_a_generated_version() {
    let v = small_bench(2)
        .into_iter()
        .find(|v| v.r() >= 2)
        .expect("a multi-fault version");
    let vt =
        pipeline::trace_version(&v.version.program, &v.suite, &TraceConfig::default()).unwrap();
    let images = pipeline::spectrum_images(&vt.memory).unwrap();
    let net = Network::new(NetConfig::preset("tiny", 8).unwrap(), 1).unwrap();
    let oracle: Vec<usize> = vt
        .memory
        .iter()
        .map(|m| v.version.oracle[&m.test_id])
        .collect();
    for m in Method::ALL {
        let (d, c) =
            pipeline::index_failures(m, &vt, &images, Some(&net), &MountainConfig::default())
                .unwrap();
        assert_eq!(d.len(), oracle.len());
        assert!(c.k >= 1 && c.k <= oracle.len());
        let ev = evaluate::evaluate_version(&v.id, &c.assignment, c.k, &oracle, v.r()).unwrap();
        assert_eq!(ev.k_equals_r, ev.fmi.is_some());
    }
}

#[test]
fn spectra_survive_png_round_trips() {
    let v = fixtures::words_version();
    let vt = pipeline::trace_version(
        &v.program,
        &fixtures::words_suite(),
        &TraceConfig::default(),
    )
    .unwrap();
    for img in pipeline::spectrum_images(&vt.memory).unwrap() {
        assert_eq!(PmsImage::from_png_bytes(&img.to_png_bytes()).unwrap(), img);
    }
}

#[test]
fn training_on_generated_versions_is_reproducible() {
    let versions = small_bench(5);
    let spectra: Vec<LabeledSpectra> = versions
        .iter()
        .take(3)
        .map(|v| {
            let vt = pipeline::trace_version(&v.version.program, &v.suite, &TraceConfig::default())
                .unwrap();
            LabeledSpectra {
                images: pipeline::spectrum_images(&vt.memory).unwrap(),
                labels: vt
                    .memory
                    .iter()
                    .map(|m| v.version.oracle[&m.test_id])
                    .collect(),
            }
        })
        .collect();
    let (inputs, pairs) = bench::training_pairs(&spectra, 8);
    let expected: usize = spectra
        .iter()
        .map(|s| s.labels.len() * (s.labels.len() - 1) / 2)
        .sum();
    assert_eq!(pairs.len(), expected);
    let cfg = TrainConfig {
        epochs: 2,
        uniform_side: 8,
        seed: 9,
        ..TrainConfig::default()
    };
    let run = || {
        let mut net = Network::new(NetConfig::preset("tiny", 8).unwrap(), 4).unwrap();
        let r = simnet::train(&mut net, &inputs, &pairs, &cfg).unwrap();
        (net.to_bytes(), r)
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert_eq!(a.1.loss_history.len(), 2);
}

proptest! {
    #[test]
    fn split_is_a_partition(n in 1usize..60, fraction in 0.01f64..=1.0, seed in any::<u64>()) {
        let (train, test) = bench::split_versions(n, fraction, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(train.len(), bench::train_count(n, fraction));
        let all: BTreeSet<usize> = train.iter().chain(&test).copied().collect();
        prop_assert_eq!(all.len(), n);
        prop_assert!(train.iter().all(|i| !test.contains(i)));
    }

    #[test]
    fn pairs_never_cross_versions(sizes in prop::collection::vec(0usize..6, 1..5)) {
        let spectra: Vec<LabeledSpectra> = sizes
            .iter()
            .map(|&n| LabeledSpectra {
                images: vec![PmsImage::blank(); n],
                labels: (0..n).map(|i| i % 2).collect(),
            })
            .collect();
        let (inputs, pairs) = bench::training_pairs(&spectra, 4);
        prop_assert_eq!(inputs.len(), sizes.iter().sum::<usize>());
        let mut version_of = Vec::new();
        for (v, &n) in sizes.iter().enumerate() {
            version_of.extend(std::iter::repeat_n(v, n));
        }
        for p in &pairs {
            prop_assert!(p.a < p.b);
            prop_assert_eq!(version_of[p.a], version_of[p.b]);
        }
    }
}
