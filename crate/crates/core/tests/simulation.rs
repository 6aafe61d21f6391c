use std::path::PathBuf;

use lobyitfl::flsim::config::DataSpec;
use lobyitfl::flsim::{run_training, Aggregator, ExperimentConfig};

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&repo().join("configs").join(name)).unwrap()
}

#[test]
fn fixed_seed_gives_identical_artifacts() {
    let cfg = config("smoke.toml");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_training(&cfg, Some(a.path())).unwrap();
    let rb = run_training(&cfg, Some(b.path())).unwrap();
    assert_eq!(ra.model, rb.model);
    for f in ["metrics.csv", "summary.json"] {
        let x = std::fs::read(ra.dir.as_ref().unwrap().join(f)).unwrap();
        let y = std::fs::read(rb.dir.as_ref().unwrap().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let rounds = std::fs::read_dir(ra.dir.as_ref().unwrap().join("transcripts"))
        .unwrap()
        .count();
    assert!(rounds >= cfg.iterations, "{rounds} transcript files");
}

#[test]
fn secure_training_tracks_the_oracle_every_round() {
    let r = run_training(&config("smoke.toml"), None).unwrap();
    assert!(r.metrics.iter().all(|m| m.oracle_match == Some(true)));
    assert_eq!(r.summary.oracle_mismatches, 0);
    assert_eq!(r.summary.aborted_rounds, 0);
    assert!(r.summary.final_accuracy > 0.8, "{}", r.summary.final_accuracy);
}

#[test]
fn corrupting_clients_are_excluded_and_training_continues() {
    let r = run_training(&config("corruption.toml"), None).unwrap();
    let ids: Vec<usize> = r.summary.excluded.iter().map(|(c, _)| *c).collect();
    assert_eq!(ids, vec![9, 10]);
    assert!(r.summary.excluded.iter().all(|(_, p)| p == "norm_open"));
    assert!(r.metrics.iter().all(|m| !m.aborted));
    assert!(r.metrics.iter().skip(1).all(|m| m.active == 8));
}

#[test]
fn fault_budget_is_checked_before_running() {
    let mut cfg = config("smoke.toml");
    (cfg.n, cfg.e, cfg.t, cfg.s) = (5, 2, 2, 1);
    let err = run_training(&cfg, None).unwrap_err().to_string();
    assert!(err.contains("e + t + s + 1"), "{err}");
}

#[test]
fn mnist_logreg_without_attack_reaches_baseline_accuracy() {
    let mut cfg = config("mnist/none.toml");
    if std::env::var_os("LOBYITFL_DATA_DIR").is_none() {
        if let DataSpec::Mnist { dir, .. } = &mut cfg.data {
            *dir = Some(repo().join("data/mnist"));
        }
    }
    cfg.aggregator = Aggregator::Fedavg;
    let r = run_training(&cfg, None).unwrap();
    assert!(r.summary.final_accuracy >= 0.85, "{}", r.summary.final_accuracy);
}
