use std::time::Instant;

use archshift::analysis::ranking_correlation_probe;
use archshift::data::{ingest, DataSource};
use archshift::rng::{RngSet, Stream};
use archshift::space::{ResourceBinning, SearchSpace};
use archshift::trainer::{BaselineMode, TrainConfig, Trainer};

fn main() -> archshift::Result<()> {
    let t0 = Instant::now();
    let mut earlies = Vec::new();
    let mut mids = Vec::new();
    for seed in [13u64, 29, 47] {
        let space = SearchSpace::toy();
        let binning = ResourceBinning::auto(&space)?;
        let config = TrainConfig {
            epochs: 1,
            batch_size: 32,
            lr_w: 0.03,
            warmup_epochs: 1,
            baseline: BaselineMode::UniformArch,
            seed,
            ..TrainConfig::default()
        };
        let data = ingest(
            &DataSource::SyntheticBlobs {
                n_samples: 6000,
                n_features: 8,
                n_classes: 16,
                separation: 0.35,
            },
            0.8,
            &mut RngSet::fork(config.seed, Stream::Data as u64),
        )?;
        let mut trainer = Trainer::new(config, &space, binning, data)?;

        let w_init = trainer.net.snapshot();
        trainer.train_epoch()?;
        let early = ranking_correlation_probe(&mut trainer, &w_init, 30, 1)?;

        trainer.config.epochs = 6;
        while trainer.epoch < 6 {
            trainer.train_epoch()?;
        }
        let w_mid = trainer.net.snapshot();
        trainer.config.epochs = 8;
        while trainer.epoch < 8 {
            trainer.train_epoch()?;
        }
        let mid = ranking_correlation_probe(&mut trainer, &w_mid, 30, 1)?;

        println!(
            "seed {:2}: early {:+.3} mid {:+.3} gap {:+.3} ({:.0}s)",
            seed,
            early.tau,
            mid.tau,
            mid.tau - early.tau,
            t0.elapsed().as_secs_f64()
        );
        earlies.push(early.tau);
        mids.push(mid.tau);
    }
    let med = |v: &mut Vec<f64>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let e = med(&mut earlies);
    let m = med(&mut mids);
    println!("medians: early {:+.3} mid {:+.3} gap {:+.3}", e, m, m - e);
    Ok(())
}
