//! Evaluation protocols over trained artifacts: complexity/accuracy sweeps,
//! ranking-correlation probes, sampling-time benchmarks, and config
//! ablations. Everything here is read-only over the artifacts except the
//! finetune probes, which snapshot and restore around their training.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Matrix, Sgd, Value};
use crate::error::{Error, Result};
use crate::generator::ArchGenerator;
use crate::rng::Stream;
use crate::space::{
    policy_from_choices, rejection_sample, sample_choices, RejectionOutcome, ResourceBinning,
    SearchSpace,
};
use crate::supernet::{Supernet, WeightSnapshot};
use crate::trainer::{TrainConfig, Trainer};
use rand::seq::SliceRandom;

/// One point of a complexity/accuracy sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoRecord {
    pub target_c: f64,
    pub resource: f64,
    pub val_accuracy: f64,
    pub val_loss: f64,
    pub mode: String,
}

/// Extract the argmax subnet for every bin center and score it, inherited
/// weights only.
pub fn pareto_sweep(trainer: &Trainer) -> Result<Vec<ParetoRecord>> {
    let mode = trainer.config.baseline.as_str().to_string();
    let mut out = Vec::with_capacity(trainer.binning.k());
    for k in 0..trainer.binning.k() {
        let c = trainer.binning.center(k);
        let policy = trainer.gen.extract_argmax(c)?;
        out.push(ParetoRecord {
            target_c: c,
            resource: policy.resource_units(),
            val_accuracy: trainer.val_accuracy(&policy)?,
            val_loss: trainer.val_loss(&policy)?,
            mode: mode.clone(),
        });
    }
    Ok(out)
}

/// One subnet scored two ways, for rank correlation: `inherited` holds the
/// bracket sufficiency score, `finetuned` the val-loss drop from a short
/// finetune. Both are oriented so that larger means better.
#[derive(Debug, Clone, PartialEq)]
pub struct RankPair {
    pub id: usize,
    pub inherited: f64,
    pub finetuned: f64,
}

/// Kendall's tau-a between the two score lists carried by the pairs:
/// (concordant - discordant) / (n(n-1)/2). Tied pairs on either side count
/// as neither.
pub fn kendall_tau(pairs: &[RankPair]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::contract("kendall_tau needs at least 2 pairs"));
    }
    if pairs
        .iter()
        .any(|p| !p.inherited.is_finite() || !p.finetuned.is_finite())
    {
        return Err(Error::NumericDomain("kendall_tau on non-finite scores".into()));
    }
    // f64::signum maps +0.0 to 1.0, which would turn ties into concordances
    let sign = |x: f64| {
        if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let n = pairs.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let a = sign(pairs[i].inherited - pairs[j].inherited);
            let b = sign(pairs[i].finetuned - pairs[j].finetuned);
            let s = a * b;
            if s > 0.0 {
                concordant += 1;
            } else if s < 0.0 {
                discordant += 1;
            }
        }
    }
    let denom = (n * (n - 1) / 2) as f64;
    Ok((concordant - discordant) as f64 / denom)
}

/// Finite-difference sufficiency score of each subnet: validation loss under
/// the earlier snapshot minus under the later one. Positive means the
/// interval's training improved that subnet. The supernet is left holding
/// `w_curr`.
pub fn sufficiency_scores(
    net: &Supernet,
    subnets: &[Vec<usize>],
    w_prev: &WeightSnapshot,
    w_curr: &WeightSnapshot,
    val_x: &Matrix,
    val_labels: &[usize],
) -> Result<Vec<f64>> {
    let x = Value::constant(val_x.clone());
    let loss_under = |snap: &WeightSnapshot| -> Result<Vec<f64>> {
        net.restore(snap)?;
        subnets
            .iter()
            .map(|choices| {
                let policy = policy_from_choices(&net.space, choices)?;
                Ok(net.task_loss(&x, val_labels, &policy)?.item())
            })
            .collect()
    };
    let prev = loss_under(w_prev)?;
    let curr = loss_under(w_curr)?;
    net.restore(w_curr)?;
    Ok(prev.iter().zip(&curr).map(|(p, c)| p - c).collect())
}

/// Result of the ranking-correlation protocol.
#[derive(Debug, Clone)]
pub struct KendallReport {
    pub tau: f64,
    pub pairs: Vec<RankPair>,
}

/// The ranking-correlation probe. Each sampled subnet gets two scores: its
/// sufficiency across the (`w_prev`, current) snapshot bracket, and the
/// val-loss drop from finetuning it off the current weights. Tau between
/// the rankings answers whether the bracket's finite differences order
/// subnets like actual training does. `w_prev` must predate the current
/// weights by enough steps to matter; a one-epoch bracket works well.
/// Weights are restored afterwards; the probe consumes only the Eval
/// stream.
pub fn ranking_correlation_probe(
    trainer: &mut Trainer,
    w_prev: &WeightSnapshot,
    n_subnets: usize,
    finetune_epochs: usize,
) -> Result<KendallReport> {
    if n_subnets < 2 {
        return Err(Error::contract("need at least 2 subnets to rank"));
    }
    let w_curr = trainer.net.snapshot();
    let subnets: Vec<Vec<usize>> = {
        let space = trainer.net.space.clone();
        let rng = trainer.rng_mut(Stream::Eval);
        (0..n_subnets).map(|_| sample_choices(&space, rng)).collect()
    };
    let suff = sufficiency_scores(
        &trainer.net,
        &subnets,
        w_prev,
        &w_curr,
        &trainer.data.val.x.clone(),
        &trainer.data.val.labels.clone(),
    )?;

    let mut pairs = Vec::with_capacity(n_subnets);
    for (id, choices) in subnets.iter().enumerate() {
        let (before, after) = finetune_val_loss(trainer, choices, finetune_epochs)?;
        trainer.net.restore(&w_curr)?;
        pairs.push(RankPair { id, inherited: suff[id], finetuned: before - after });
    }
    let tau = kendall_tau(&pairs)?;
    Ok(KendallReport { tau, pairs })
}

/// Finetune one fixed subnet for `epochs` epochs of plain SGD on the train
/// split. Returns its validation loss (before, after); the caller restores
/// weights.
pub fn finetune_val_loss(
    trainer: &mut Trainer,
    choices: &[usize],
    epochs: usize,
) -> Result<(f64, f64)> {
    let policy = policy_from_choices(&trainer.net.space, choices)?;
    let before = trainer.val_loss(&policy)?;
    let mut opt = Sgd::new(trainer.config.lr_w);
    let bs = trainer.config.batch_size;
    let n = trainer.data.train.len();
    for _ in 0..epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(trainer.rng_mut(Stream::Eval));
        for chunk in order.chunks_exact(bs) {
            let (x, labels) = trainer.data.train.gather(chunk)?;
            let loss = trainer
                .net
                .task_loss(&Value::constant(x), &labels, &policy)?;
            trainer.net.params().zero_grad();
            loss.backward()?;
            opt.step(trainer.net.params())?;
        }
    }
    let after = trainer.val_loss(&policy)?;
    Ok((before, after))
}

/// Inherited vs finetuned accuracy of one extracted subnet per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct InheritRecord {
    pub target_c: f64,
    pub resource: f64,
    pub inherited_acc: f64,
    pub finetuned_acc: f64,
}

/// For each bin center: extract the argmax subnet, score it as inherited,
/// finetune it for `finetune_epochs`, score again, restore.
pub fn inherit_vs_finetune(
    trainer: &mut Trainer,
    finetune_epochs: usize,
) -> Result<Vec<InheritRecord>> {
    let w = trainer.net.snapshot();
    let mut out = Vec::with_capacity(trainer.binning.k());
    for k in 0..trainer.binning.k() {
        let c = trainer.binning.center(k);
        let policy = trainer.gen.extract_argmax(c)?;
        let choices = policy.choices();
        let inherited_acc = trainer.val_accuracy(&policy)?;
        finetune_val_loss(trainer, &choices, finetune_epochs)?;
        let finetuned_acc = trainer.val_accuracy(&policy)?;
        trainer.net.restore(&w)?;
        out.push(InheritRecord {
            target_c: c,
            resource: policy.resource_units(),
            inherited_acc,
            finetuned_acc,
        });
    }
    Ok(out)
}

/// Wall-clock comparison of generator inference against rejection sampling,
/// per bin.
#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub bin: usize,
    pub center: f64,
    pub uniform_pmf: f64,
    pub ag_median_ns: u128,
    pub rejection_median_ns: u128,
    pub rejection_median_tries: u64,
    pub timeouts: u64,
}

/// Median over `trials` of (a) one generator inference for the bin center
/// and (b) one rejection-sampling search for the bin. Rejection timeouts
/// are recorded, not raised; their try-count still times the search.
pub fn sampler_bench(
    space: &SearchSpace,
    gen: &ArchGenerator,
    binning: &ResourceBinning,
    bin_pmf: &[f64],
    trials: usize,
    max_tries: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<BenchRecord>> {
    if trials == 0 {
        return Err(Error::contract("need at least one trial"));
    }
    if bin_pmf.len() != binning.k() {
        return Err(Error::dim("pmf length does not match bin count"));
    }
    let mut out = Vec::with_capacity(binning.k());
    for bin in 0..binning.k() {
        let center = binning.center(bin);
        let mut ag_ns = Vec::with_capacity(trials);
        let mut rej_ns = Vec::with_capacity(trials);
        let mut tries = Vec::with_capacity(trials);
        let mut timeouts = 0u64;
        for _ in 0..trials {
            let t0 = Instant::now();
            let _ = gen.generate(center, rng, true)?;
            ag_ns.push(t0.elapsed().as_nanos());

            let t1 = Instant::now();
            let outcome = rejection_sample(space, binning, bin, rng, max_tries)?;
            rej_ns.push(t1.elapsed().as_nanos());
            tries.push(outcome.tries());
            if matches!(outcome, RejectionOutcome::Timeout { .. }) {
                timeouts += 1;
            }
        }
        out.push(BenchRecord {
            bin,
            center,
            uniform_pmf: bin_pmf[bin],
            ag_median_ns: median(&mut ag_ns),
            rejection_median_ns: median(&mut rej_ns),
            rejection_median_tries: median(&mut tries),
            timeouts,
        });
    }
    Ok(out)
}

fn median<T: Ord + Copy>(xs: &mut [T]) -> T {
    xs.sort_unstable();
    xs[xs.len() / 2]
}

/// One ablation run: a tag plus its sweep.
#[derive(Debug, Clone)]
pub struct AblateRecord {
    pub tag: String,
    pub records: Vec<ParetoRecord>,
}

/// Grid ablation over binning step sizes and update frequencies: one full
/// training run per grid point, identical seeds, tagged sweeps.
pub fn ablate(
    space: &SearchSpace,
    base: &TrainConfig,
    data: &crate::data::DataSplit,
    step_sizes: &[f64],
    qs: &[u64],
) -> Result<Vec<AblateRecord>> {
    let mut out = Vec::new();
    for &step in step_sizes {
        let binning = ResourceBinning::new(space.min_resource(), space.max_resource(), step)?;
        let mut t = Trainer::new(base.clone(), space, binning, data.clone())?;
        t.run()?;
        out.push(AblateRecord { tag: format!("step={}", step), records: pareto_sweep(&t)? });
    }
    for &q in qs {
        let mut config = base.clone();
        config.q = q;
        let binning = ResourceBinning::auto(space)?;
        let mut t = Trainer::new(config, space, binning, data.clone())?;
        t.run()?;
        out.push(AblateRecord { tag: format!("q={}", q), records: pareto_sweep(&t)? });
    }
    Ok(out)
}

/// Mean accuracy of a sweep (ablation summary statistic).
pub fn mean_accuracy(records: &[ParetoRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().map(|r| r.val_accuracy).sum::<f64>() / records.len() as f64
}
