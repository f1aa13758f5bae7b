//! Do the finite differences driving the distribution updates rank subnets
//! the way actual training would? Scores a batch of subnets two ways (the
//! sufficiency across a one-epoch snapshot bracket vs the loss drop from a
//! one-epoch finetune) and reports Kendall's tau early and later in
//! training. Agreement should improve as the shared weights converge.
//!
//! Run with `cargo run --example kendall_trend`.

use archshift::analysis::ranking_correlation_probe;
use archshift::data::{ingest, DataSource};
use archshift::rng::{RngSet, Stream};
use archshift::space::{ResourceBinning, SearchSpace};
use archshift::trainer::{TrainConfig, Trainer};

fn main() -> archshift::Result<()> {
    let space = SearchSpace::toy();
    let binning = ResourceBinning::auto(&space)?;
    let config = TrainConfig {
        epochs: 14,
        batch_size: 32,
        q: 25,
        warmup_epochs: 2,
        seed: 13,
        ..TrainConfig::default()
    };
    let data = ingest(
        &DataSource::default_blobs(),
        0.8,
        &mut RngSet::fork(config.seed, Stream::Data as u64),
    )?;
    let mut trainer = Trainer::new(config, &space, binning, data)?;

    let mut taus = Vec::new();
    for (phase, until) in [("early", 2), ("late", trainer.config.epochs)] {
        while trainer.epoch < until - 1 {
            trainer.train_epoch()?;
        }
        // bracket: the probe epoch itself
        let w_prev = trainer.net.snapshot();
        trainer.train_epoch()?;
        let report = ranking_correlation_probe(&mut trainer, &w_prev, 20, 1)?;
        println!(
            "{:>5} (epoch {:2}): tau {:+.4} over {} subnets",
            phase,
            trainer.epoch,
            report.tau,
            report.pairs.len()
        );
        taus.push(report.tau);
    }
    println!(
        "\ntau moved {:+.4} between probes (positive = ranking fidelity improved)",
        taus[1] - taus[0]
    );
    Ok(())
}
