//! Sanity-check the complexity distribution induced by uniform architecture
//! sampling against two references: the exact per-op convolution (sparse DP
//! over the cost lattice) and the matched-moments normal that the central
//! limit theorem predicts for deep spaces.
//!
//! Run with `cargo run --example distribution_check`.

use archshift::rng::RngSet;
use archshift::space::{irwin_hall_reference, sample_choices, SearchSpace};

fn main() -> archshift::Result<()> {
    let n = 200_000u64;
    println!("{:>5} {:>12} {:>12} {:>10}", "depth", "TV@200k", "KS(normal)", "support");
    for depth in [4usize, 8, 16] {
        let space = SearchSpace::homogeneous(depth, &[1, 2, 3])?;
        let pmf = irwin_hall_reference(&space)?;
        let mut rng = RngSet::fork(42, depth as u64);
        let drawn: Vec<f64> = (0..n)
            .map(|_| space.choices_resource(&sample_choices(&space, &mut rng)))
            .collect::<archshift::Result<_>>()?;
        println!(
            "{:>5} {:>12.6} {:>12.6} {:>10}",
            depth,
            pmf.tv_distance(&drawn),
            pmf.ks_vs_matched_normal(),
            pmf.len()
        );
    }
    println!("\nTV should sit near sampling noise; KS should shrink as depth grows.");
    Ok(())
}
