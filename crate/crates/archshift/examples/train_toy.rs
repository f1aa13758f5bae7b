//! Train the toy 6-op space end to end: supernet weights, architecture
//! generator, and the sampling distribution together.
//!
//! Run with `cargo run --example train_toy`.

use archshift::data::{ingest, DataSource};
use archshift::rng::{RngSet, Stream};
use archshift::space::{ResourceBinning, SearchSpace};
use archshift::trainer::{RowKind, TrainConfig, Trainer};

fn main() -> archshift::Result<()> {
    let space = SearchSpace::toy();
    let binning = ResourceBinning::auto(&space)?;
    println!(
        "space: {} ops, {} subnets, {} in [{}, {}], {} bins",
        space.depth(),
        space.cardinality(),
        "MACs",
        space.min_resource(),
        space.max_resource(),
        binning.k()
    );

    let config = TrainConfig {
        epochs: 12,
        batch_size: 32,
        q: 25,
        warmup_epochs: 2,
        seed: 7,
        ..TrainConfig::default()
    };
    let data = ingest(
        &DataSource::default_blobs(),
        0.8,
        &mut RngSet::fork(config.seed, Stream::Data as u64),
    )?;
    println!("data: {} train / {} val", data.train.len(), data.val.len());

    let mut trainer = Trainer::new(config, &space, binning, data)?;
    while trainer.epoch < trainer.config.epochs {
        trainer.train_epoch()?;
        let steps: Vec<_> = trainer
            .metrics
            .iter()
            .filter(|r| r.epoch == trainer.epoch - 1 && r.kind == RowKind::Step)
            .collect();
        let task = steps.iter().map(|r| r.task_loss).sum::<f64>() / steps.len() as f64;
        let rc = steps.iter().map(|r| r.rc_loss).sum::<f64>() / steps.len() as f64;
        println!(
            "epoch {:2}: task {:.4}  rc {:.5}  updates so far {}",
            trainer.epoch, task, rc, trainer.dist.update_count
        );
    }

    println!("\nfinal sampling distribution over bin centers:");
    for (c, p) in trainer.binning.centers().iter().zip(trainer.dist.probs()) {
        let bar = "#".repeat((p * 80.0).round() as usize);
        println!("  {:>6} | {:.4} {}", c, p, bar);
    }
    Ok(())
}
