//! Sweep the full complexity axis after one training run and print the
//! accuracy/resource frontier, one extracted subnet per bin.
//!
//! Run with `cargo run --example pareto_sweep`.

use archshift::analysis::pareto_sweep;
use archshift::data::{ingest, DataSource};
use archshift::rng::{RngSet, Stream};
use archshift::space::{ResourceBinning, SearchSpace};
use archshift::trainer::{TrainConfig, Trainer};

fn main() -> archshift::Result<()> {
    let space = SearchSpace::toy();
    let binning = ResourceBinning::auto(&space)?;
    let config = TrainConfig {
        epochs: 12,
        batch_size: 32,
        q: 25,
        warmup_epochs: 2,
        seed: 5,
        ..TrainConfig::default()
    };
    let data = ingest(
        &DataSource::default_blobs(),
        0.8,
        &mut RngSet::fork(config.seed, Stream::Data as u64),
    )?;
    let mut trainer = Trainer::new(config, &space, binning, data)?;
    trainer.run()?;

    let records = pareto_sweep(&trainer)?;
    println!("{:>8} {:>10} {:>9} {:>9}", "target", "resource", "val_acc", "val_loss");
    for r in &records {
        println!(
            "{:>8} {:>10} {:>9.4} {:>9.4}",
            r.target_c, r.resource, r.val_accuracy, r.val_loss
        );
    }

    // the frontier should cost more as it gains accuracy, modulo noise
    let inversions = records
        .windows(2)
        .filter(|w| w[1].val_accuracy + 1e-12 < w[0].val_accuracy)
        .count();
    println!("\naccuracy inversions along the resource axis: {}", inversions);
    Ok(())
}
