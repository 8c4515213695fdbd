//! File-level experiment workflow: datasets, checkpoints, logs and CSVs.

use std::fs;
use std::path::Path;

use sarrm::experiment::{
    cmd_eval, cmd_generate, cmd_train, load_params, read_training_log, EvalOptions, ExperimentConfig, Split,
};
use sarrm::baselines::PolicyId;
use sarrm::training::TrainState;

fn small(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk();
    cfg.output_dir = dir.to_path_buf();
    cfg.dataset.train_samples = 12;
    cfg.dataset.test_samples = 4;
    cfg.train.batch_size = 4;
    cfg.train.episode_len = 8;
    cfg.train.n_iters = Some(6);
    cfg.exec.horizon = 40;
    cfg
}

#[test]
fn default_train_split_is_cached_with_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        output_dir: dir.path().join("a"),
        ..ExperimentConfig::default()
    };
    let manifest = cmd_generate(&cfg, Split::Train).unwrap();
    assert_eq!(manifest.count, 256);
    let files = fs::read_dir(cfg.dataset_dir(Split::Train)).unwrap().count();
    assert_eq!(files, 257);

    let again = ExperimentConfig {
        output_dir: dir.path().join("b"),
        ..cfg.clone()
    };
    let second = cmd_generate(&again, Split::Train).unwrap();
    assert_eq!(
        fs::read(cfg.dataset_dir(Split::Train).join("manifest.json")).unwrap(),
        fs::read(again.dataset_dir(Split::Train).join("manifest.json")).unwrap()
    );
    assert_eq!(manifest.digest(), second.digest());

    let other = ExperimentConfig {
        seed: cfg.seed + 1,
        ..cfg
    };
    assert_ne!(other.hash(), again.hash());
}

#[test]
fn zero_epochs_saves_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.train.n_iters = None;
    cfg.train.epochs = 0;
    cmd_generate(&cfg, Split::Train).unwrap();
    let out = cmd_train(&cfg, None).unwrap();
    assert!(out.log.is_empty());
    let init = TrainState::fresh(cfg.gnn, cfg.seed, cfg.train.optimizer).unwrap();
    assert_eq!(load_params(&cfg, &out.checkpoint).unwrap(), init.params);
}

#[test]
fn resuming_from_an_intermediate_checkpoint_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(&dir.path().join("whole"));
    cfg.train.checkpoint_every = Some(2);
    cmd_generate(&cfg, Split::Train).unwrap();
    let whole = cmd_train(&cfg, None).unwrap();
    let rows = read_training_log(&whole.log_path).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().enumerate().all(|(k, r)| r.iteration == k));

    let mid = cfg.output_dir.join("checkpoints").join("checkpoint_000004.json");
    let resumed = cmd_train(&cfg, Some(&mid)).unwrap();
    assert_eq!(resumed.state, whole.state);
    assert_eq!(fs::read(&resumed.checkpoint).unwrap(), fs::read(&whole.checkpoint).unwrap());
    assert_eq!(read_training_log(&resumed.log_path).unwrap(), rows);
}

#[test]
fn trained_policy_transfers_to_larger_networks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    cmd_generate(&cfg, Split::Train).unwrap();
    let ck = cmd_train(&cfg, None).unwrap().checkpoint;

    let big = cfg.clone().with_overrides(None, None, Some(12)).unwrap();
    cmd_generate(&big, Split::Test).unwrap();
    let out = cmd_eval(&big, Some(&ck), PolicyId::StateAugmented, &EvalOptions::default()).unwrap();
    assert_eq!(out.runs[0].suite.summary.n_users, 48);

    // Full reuse never needs a checkpoint.
    let fr = cmd_eval(&big, None, PolicyId::FullReuse, &EvalOptions { trace: true, cdf: true }).unwrap();
    assert_eq!(fr.files.len(), 3);
}

#[test]
fn pooled_row_aggregates_the_realization_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    cmd_generate(&cfg, Split::Test).unwrap();
    let out = cmd_eval(&cfg, None, PolicyId::FullReuse, &EvalOptions::default()).unwrap();
    let text = fs::read_to_string(&out.files[0]).unwrap();
    assert!(text.starts_with(&format!("# sarrm {} config_hash={}", env!("CARGO_PKG_VERSION"), cfg.hash())));

    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let num = |r: &csv::StringRecord, k: usize| r[k].parse::<f64>().unwrap();
    let (pooled, parts) = rows.split_last().unwrap();
    assert_eq!(&pooled[1], "pooled");
    assert_eq!(parts.len(), 4);
    let users: f64 = parts.iter().map(|r| num(r, 7)).sum();
    let mean = parts.iter().map(|r| num(r, 3) * num(r, 7)).sum::<f64>() / users;
    let feasible = parts.iter().map(|r| num(r, 6) * num(r, 7)).sum::<f64>() / users;
    assert_eq!(num(pooled, 7), users);
    assert!((num(pooled, 3) - mean).abs() <= 1e-12 * mean.abs().max(1.0));
    assert!((num(pooled, 6) - feasible).abs() <= 1e-12);
}
