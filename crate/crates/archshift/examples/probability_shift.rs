//! Watch the sampling distribution move. Starts uniform over complexity
//! bins; every q steps a finite-difference comparison of two validation
//! losses decides which bin earned more probability mass.
//!
//! Run with `cargo run --example probability_shift`.

use archshift::data::{ingest, DataSource};
use archshift::rng::{RngSet, Stream};
use archshift::space::{ResourceBinning, SearchSpace};
use archshift::trainer::{TrainConfig, Trainer};

fn main() -> archshift::Result<()> {
    let space = SearchSpace::toy();
    let binning = ResourceBinning::auto(&space)?;
    let k = binning.k();
    let config = TrainConfig {
        epochs: 16,
        batch_size: 32,
        q: 20,
        lr_b: 0.05,
        warmup_epochs: 2,
        seed: 19,
        ..TrainConfig::default()
    };
    let data = ingest(
        &DataSource::default_blobs(),
        0.8,
        &mut RngSet::fork(config.seed, Stream::Data as u64),
    )?;
    let mut trainer = Trainer::new(config, &space, binning, data)?;

    println!("start: uniform {:.4} over {} bins", 1.0 / k as f64, k);
    trainer.run()?;

    // prob_traj holds one row per (update, bin); group rows back into updates
    println!("\nupdate  probabilities per bin center");
    print!("{:>6} ", "t");
    for c in trainer.binning.centers() {
        print!(" {:>6}", c);
    }
    println!();
    for rows in trainer.prob_traj.chunks(k) {
        print!("{:>6} ", rows[0].t);
        for row in rows {
            print!(" {:>6.3}", row.probability);
        }
        println!();
    }

    let probs = trainer.dist.probs();
    let spread = probs.iter().cloned().fold(f64::MIN, f64::max)
        - probs.iter().cloned().fold(f64::MAX, f64::min);
    println!(
        "\n{} updates applied; final max-min probability spread {:.4}",
        trainer.dist.update_count, spread
    );
    Ok(())
}
