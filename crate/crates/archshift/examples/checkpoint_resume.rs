//! Checkpointing is exact: a run paused at epoch 3 and resumed from disk
//! produces bit-identical metrics, probabilities, and extracted subnets to
//! one that never stopped. Everything that moves is persisted, including
//! the positions of all five RNG streams and both Adam states.
//!
//! Run with `cargo run --example checkpoint_resume`.

use archshift::data::{ingest, DataSource, DataSplit};
use archshift::rng::{RngSet, Stream};
use archshift::space::{ResourceBinning, SearchSpace};
use archshift::trainer::{TrainConfig, Trainer};

fn config() -> TrainConfig {
    TrainConfig {
        epochs: 8,
        batch_size: 32,
        q: 15,
        warmup_epochs: 1,
        seed: 4,
        ..TrainConfig::default()
    }
}

fn load_data() -> archshift::Result<DataSplit> {
    ingest(
        &DataSource::default_blobs(),
        0.8,
        &mut RngSet::fork(config().seed, Stream::Data as u64),
    )
}

fn main() -> archshift::Result<()> {
    let space = SearchSpace::toy();
    let binning = ResourceBinning::auto(&space)?;
    let dir = std::env::temp_dir().join("archshift_resume_example");
    std::fs::create_dir_all(&dir)?;
    let ckpt = dir.join("epoch3.ckpt");

    // reference: run all 8 epochs without stopping
    let mut full = Trainer::new(config(), &space, binning.clone(), load_data()?)?;
    full.run()?;

    // paused run: 3 epochs, checkpoint to disk, drop the trainer entirely
    let mut paused = Trainer::new(config(), &space, binning.clone(), load_data()?)?;
    for _ in 0..3 {
        paused.train_epoch()?;
    }
    paused.save_checkpoint(&ckpt)?;
    let rows_before = paused.metrics.len();
    drop(paused);
    println!("paused at epoch 3 ({} metric rows), checkpoint {} bytes",
        rows_before,
        std::fs::metadata(&ckpt)?.len()
    );

    let mut resumed = Trainer::resume_from(config(), &space, binning, load_data()?, &ckpt)?;
    resumed.run()?;

    // the resumed tail must equal the uninterrupted run's rows 3..8 exactly
    let tail = &full.metrics[rows_before..];
    assert_eq!(tail.len(), resumed.metrics.len());
    let exact = tail
        .iter()
        .zip(&resumed.metrics)
        .all(|(a, b)| a == b);
    println!("resumed tail rows: {} / {} bit-identical", resumed.metrics.len(), tail.len());
    assert!(exact, "resume deviated from the uninterrupted run");

    for target in [62.0, 104.0, 144.0] {
        let a = full.gen.extract_argmax(target)?;
        let b = resumed.gen.extract_argmax(target)?;
        assert_eq!(a.choices(), b.choices());
        println!("target {:>5}: both runs extract {:?}", target, a.choices());
    }
    std::fs::remove_dir_all(&dir).ok();
    println!("exact resume confirmed");
    Ok(())
}
