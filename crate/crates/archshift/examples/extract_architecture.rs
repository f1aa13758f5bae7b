//! Retraining-free extraction: after one training run, ask the generator for
//! architectures at several complexity targets and evaluate each by slicing
//! the shared weights. No per-target finetuning happens anywhere.
//!
//! Run with `cargo run --example extract_architecture`.

use archshift::data::{ingest, DataSource};
use archshift::rng::{RngSet, Stream};
use archshift::space::{ResourceBinning, SearchSpace};
use archshift::trainer::{TrainConfig, Trainer};

fn main() -> archshift::Result<()> {
    let space = SearchSpace::toy();
    let binning = ResourceBinning::auto(&space)?;
    let config = TrainConfig {
        epochs: 10,
        batch_size: 32,
        q: 25,
        warmup_epochs: 2,
        seed: 3,
        ..TrainConfig::default()
    };
    let data = ingest(
        &DataSource::default_blobs(),
        0.8,
        &mut RngSet::fork(config.seed, Stream::Data as u64),
    )?;
    let mut trainer = Trainer::new(config, &space, binning, data)?;
    trainer.run()?;
    println!("trained {} epochs, {} distribution updates\n", trainer.epoch, trainer.dist.update_count);

    println!("{:>8} {:>10} {:>9} {:>8}  choices", "target", "resource", "val_acc", "val_loss");
    for target in trainer.binning.centers().to_vec() {
        let policy = trainer.gen.extract_argmax(target)?;
        let acc = trainer.val_accuracy(&policy)?;
        let loss = trainer.val_loss(&policy)?;
        println!(
            "{:>8} {:>10} {:>9.4} {:>8.4}  {:?}",
            target,
            policy.resource_units(),
            acc,
            loss,
            policy.choices()
        );
    }

    // off-center targets still resolve to a nearby subnet
    let target = 100.0;
    let policy = trainer.gen.extract_argmax(target)?;
    println!(
        "\noff-center target {}: resource {} ({:+} units)",
        target,
        policy.resource_units(),
        policy.resource_units() - target
    );
    Ok(())
}
