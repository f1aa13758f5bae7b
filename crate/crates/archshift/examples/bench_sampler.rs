//! Time the two ways to obtain a subnet of a requested complexity: one
//! generator inference vs rejection sampling (draw uniform architectures
//! until one lands in the bin). Rejection cost explodes in low-probability
//! tail bins; generator cost is flat.
//!
//! Run with `cargo run --example bench_sampler`.

use archshift::analysis::sampler_bench;
use archshift::autodiff::Adam;
use archshift::generator::{rc_loss_normalized, ArchGenerator};
use archshift::rng::{RngSet, Stream};
use archshift::space::{irwin_hall_reference, ResourceBinning, SearchSpace};

fn main() -> archshift::Result<()> {
    // 3^12 subnets; the cheap/expensive extremes are rare under uniform draws
    let space = SearchSpace::homogeneous(12, &[1, 2, 3])?;
    let binning = ResourceBinning::auto(&space)?;
    let mut init_rng = RngSet::fork(9, Stream::Init as u64);
    let gen = ArchGenerator::new(&space, &binning, &mut init_rng)?;

    // pretrain the generator on the constraint loss alone so that a request
    // for a bin center actually produces that complexity
    let mut train_rng = RngSet::fork(9, Stream::Train as u64);
    let mut opt = Adam::new(3e-3);
    for step in 0..600 {
        let center = binning.center(step % binning.k());
        let noise = gen.draw_noise(&mut train_rng);
        let policy = gen.generate_conditioned(
            &archshift::autodiff::Value::scalar(center),
            Some(&noise),
            true,
        )?;
        let rc = rc_loss_normalized(&policy, center, &binning);
        gen.params().zero_grad();
        rc.backward()?;
        opt.step(gen.params())?;
    }

    let pmf = irwin_hall_reference(&space)?;
    let bin_pmf: Vec<f64> = (0..binning.k()).map(|b| pmf.bin_prob(&binning, b)).collect();
    let mut bench_rng = RngSet::fork(9, Stream::Eval as u64);
    let records = sampler_bench(&space, &gen, &binning, &bin_pmf, 32, 1_000_000, &mut bench_rng)?;

    println!(
        "{:>4} {:>7} {:>11} {:>11} {:>13} {:>9} {:>8}",
        "bin", "center", "pmf", "ag_ns", "rejection_ns", "tries", "timeouts"
    );
    for r in &records {
        println!(
            "{:>4} {:>7} {:>11.3e} {:>11} {:>13} {:>9} {:>8}",
            r.bin,
            r.center,
            r.uniform_pmf,
            r.ag_median_ns,
            r.rejection_median_ns,
            r.rejection_median_tries,
            r.timeouts
        );
    }

    let tail = records
        .iter()
        .filter(|r| r.uniform_pmf < 1e-3)
        .max_by(|a, b| a.rejection_median_ns.cmp(&b.rejection_median_ns));
    if let Some(t) = tail {
        println!(
            "\ntail bin {}: rejection / generator = {:.1}x",
            t.bin,
            t.rejection_median_ns as f64 / t.ag_median_ns as f64
        );
    }
    Ok(())
}
