//! Reproducibility contract: equal seeds give bit-identical runs, and a
//! checkpointed run continues exactly where the uninterrupted one was.

mod common;

use archshift::autodiff::Value;
use archshift::space::SearchSpace;
use archshift::trainer::{BaselineMode, TrainConfig, Trainer};

fn quick_config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 6,
        batch_size: 32,
        q: 10,
        warmup_epochs: 1,
        seed,
        baseline: BaselineMode::Shift,
        ..TrainConfig::default()
    }
}

fn fresh_trainer(seed: u64) -> Trainer {
    let space = SearchSpace::toy();
    let binning = archshift::space::ResourceBinning::auto(&space).unwrap();
    let data = common::blobs_split(seed, 400);
    Trainer::new(quick_config(seed), &space, binning, data).unwrap()
}

#[test]
fn same_seed_is_bit_identical_across_processes_worth_of_state() {
    let mut a = fresh_trainer(3);
    let mut b = fresh_trainer(3);
    a.run().unwrap();
    b.run().unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.prob_traj, b.prob_traj);
    assert_eq!(a.net.snapshot(), b.net.snapshot());
    assert_eq!(a.gen.snapshot(), b.gen.snapshot());
    assert_eq!(a.dist.probs(), b.dist.probs());
}

#[test]
fn different_seeds_diverge() {
    let mut a = fresh_trainer(3);
    let mut b = fresh_trainer(4);
    a.run().unwrap();
    b.run().unwrap();
    assert_ne!(a.metrics, b.metrics);
}

#[test]
fn resumed_run_matches_uninterrupted_run_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("mid.ckpt");

    let mut full = fresh_trainer(9);
    full.run().unwrap();

    // interrupted: 3 epochs, checkpoint to disk, drop everything
    let rows_before;
    {
        let mut first = fresh_trainer(9);
        for _ in 0..3 {
            first.train_epoch().unwrap();
        }
        rows_before = first.metrics.len();
        first.save_checkpoint(&ckpt).unwrap();
    }

    // fresh process: rebuild from config, restore, finish
    let space = SearchSpace::toy();
    let binning = archshift::space::ResourceBinning::auto(&space).unwrap();
    let data = common::blobs_split(9, 400);
    let mut resumed =
        Trainer::resume_from(quick_config(9), &space, binning, data, &ckpt).unwrap();
    assert_eq!(resumed.epoch, 3);
    resumed.run().unwrap();

    assert_eq!(
        &full.metrics[rows_before..],
        &resumed.metrics[..],
        "resumed rows must equal the uninterrupted run's tail"
    );
    assert_eq!(full.net.snapshot(), resumed.net.snapshot());
    assert_eq!(full.gen.snapshot(), resumed.gen.snapshot());
    assert_eq!(full.dist.probs(), resumed.dist.probs());

    // and the models behave identically
    let x = Value::constant(full.data.val.x.clone());
    let policy = full.gen.extract_argmax(96.0).unwrap();
    let policy_r = resumed.gen.extract_argmax(96.0).unwrap();
    assert_eq!(policy.choices(), policy_r.choices());
    let out_full = full.net.forward(&x, &policy).unwrap().data();
    let out_res = resumed.net.forward(&x, &policy_r).unwrap().data();
    assert_eq!(out_full, out_res);
}

#[test]
fn save_load_forward_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("state.ckpt");

    let mut t = fresh_trainer(5);
    for _ in 0..2 {
        t.train_epoch().unwrap();
    }
    t.save_checkpoint(&ckpt).unwrap();
    let x = Value::constant(t.data.val.x.clone());
    let policy = t.gen.extract_argmax(120.0).unwrap();
    let before = t.net.forward(&x, &policy).unwrap().data();

    let space = SearchSpace::toy();
    let binning = archshift::space::ResourceBinning::auto(&space).unwrap();
    let data = common::blobs_split(5, 400);
    let restored =
        Trainer::resume_from(quick_config(5), &space, binning, data, &ckpt).unwrap();
    let policy2 = restored.gen.extract_argmax(120.0).unwrap();
    assert_eq!(policy.choices(), policy2.choices());
    let after = restored.net.forward(&x, &policy2).unwrap().data();
    assert_eq!(before, after);
}

#[test]
fn mismatched_space_is_refused_with_names() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("toy.ckpt");
    let mut t = fresh_trainer(2);
    t.train_epoch().unwrap();
    t.save_checkpoint(&ckpt).unwrap();

    // a deeper space has more layers: restoring must fail and say which
    // tensors are unaccounted for
    let space = SearchSpace::homogeneous(8, &[8, 16, 24]).unwrap();
    let binning = archshift::space::ResourceBinning::auto(&space).unwrap();
    let data = common::blobs_split(2, 400);
    let err = Trainer::resume_from(quick_config(2), &space, binning, data, &ckpt)
        .map(|_| ())
        .unwrap_err();
    let msg = err.to_string();
    assert!(
        msg.contains("layer") || msg.contains("tensors"),
        "error should name the mismatch: {}",
        msg
    );
}
