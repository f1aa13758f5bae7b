//! Command-line shell: every subcommand reads one run-config TOML,
//! validates it before touching the filesystem, and writes its results
//! into the run directory.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::analysis;
use crate::config::RunConfig;
use crate::data::{ingest, DataSplit};
use crate::error::{Error, Result};
use crate::persist::{self, DistCheckRow, RunDir};
use crate::rng::{RngSet, Stream};
use crate::space::{irwin_hall_reference, sample_choices, SearchSpace};
use crate::trainer::Trainer;

#[derive(Parser)]
#[command(
    name = "archshift",
    version,
    about = "Complexity-targeted one-shot architecture search on a desk-scale supernet"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run-config TOML
    #[arg(long, short)]
    config: PathBuf,
    /// Override the config's output directory
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the supernet, generator, and sampling distribution
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from checkpoints/latest.ckpt in the output directory
        #[arg(long)]
        resume: bool,
    },
    /// Extract the max-probability architecture for a target complexity
    Sample {
        #[command(flatten)]
        common: Common,
        /// Target complexity in resource units
        #[arg(long)]
        flops: f64,
    },
    /// Inherited validation accuracy of the extracted architecture
    Eval {
        #[command(flatten)]
        common: Common,
        /// Target complexity in resource units
        #[arg(long)]
        flops: f64,
    },
    /// One extracted subnet per bin: the accuracy/cost frontier
    Pareto {
        #[command(flatten)]
        common: Common,
    },
    /// Time generator inference against rejection sampling, per bin
    BenchSampler {
        #[command(flatten)]
        common: Common,
        /// Timed repetitions per bin
        #[arg(long, default_value_t = 32)]
        trials: usize,
        /// Rejection-sampling try budget before recording a timeout
        #[arg(long, default_value_t = 1_000_000)]
        max_tries: u64,
    },
    /// Rank correlation between sufficiency scores and finetune loss drops
    Kendall {
        #[command(flatten)]
        common: Common,
        /// Subnets to sample and finetune
        #[arg(long, default_value_t = 30)]
        subnets: usize,
    },
    /// Uniform-sampling resource statistics against the exact pmf
    DistCheck {
        #[command(flatten)]
        common: Common,
        /// Architectures to draw
        #[arg(long, default_value_t = 200_000)]
        samples: u64,
    },
    /// Grid ablation over binning step sizes and update periods
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Binning step sizes to try (comma separated)
        #[arg(long, value_delimiter = ',')]
        steps: Vec<f64>,
        /// Update periods to try (comma separated)
        #[arg(long, value_delimiter = ',')]
        qs: Vec<u64>,
    },
}

/// Parse argv and dispatch; the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train { common, resume } => cmd_train(&common, resume),
        Command::Sample { common, flops } => cmd_sample(&common, flops),
        Command::Eval { common, flops } => cmd_eval(&common, flops),
        Command::Pareto { common } => cmd_pareto(&common),
        Command::BenchSampler { common, trials, max_tries } => {
            cmd_bench(&common, trials, max_tries)
        }
        Command::Kendall { common, subnets } => cmd_kendall(&common, subnets),
        Command::DistCheck { common, samples } => cmd_dist_check(&common, samples),
        Command::Ablate { common, steps, qs } => cmd_ablate(&common, &steps, &qs),
    }
}

/// Load, apply overrides, validate. Nothing is written if this fails.
fn load_config(common: &Common) -> Result<RunConfig> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(out) = &common.output {
        config.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        config.train.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn ingest_for(config: &RunConfig) -> Result<DataSplit> {
    let source = config.build_source()?;
    ingest(
        &source,
        config.data.split_fraction,
        &mut RngSet::fork(config.train.seed, Stream::Data as u64),
    )
}

fn build_trainer(config: &RunConfig) -> Result<(Trainer, SearchSpace)> {
    let space = config.build_space()?;
    let binning = config.build_binning(&space)?;
    let data = ingest_for(config)?;
    let trainer = Trainer::new(config.train.clone(), &space, binning, data)?;
    Ok((trainer, space))
}

/// Rebuild a trained run from its latest checkpoint.
fn reload_trainer(config: &RunConfig, dir: &RunDir) -> Result<Trainer> {
    let space = config.build_space()?;
    let binning = config.build_binning(&space)?;
    let data = ingest_for(config)?;
    let path = dir.latest_checkpoint();
    if !path.is_file() {
        return Err(Error::checkpoint(format!(
            "no checkpoint at {} (train first)",
            path.display()
        )));
    }
    Trainer::resume_from(config.train.clone(), &space, binning, data, &path)
}

fn cmd_train(common: &Common, resume: bool) -> Result<()> {
    let config = load_config(common)?;
    let dir = RunDir::create(&config.output_dir)?;
    dir.write_config_echo(&config)?;
    dir.write_manifest("train", &config)?;

    let mut trainer = if resume && dir.latest_checkpoint().is_file() {
        reload_trainer(&config, &dir)?
    } else {
        build_trainer(&config)?.0
    };

    let mut flushed_metrics = 0;
    let mut flushed_probs = 0;
    while trainer.epoch < trainer.config.epochs {
        trainer.train_epoch()?;
        persist::append_metrics(&dir.metrics_csv(), &trainer.metrics[flushed_metrics..])?;
        persist::append_probs(&dir.probs_csv(), &trainer.prob_traj[flushed_probs..])?;
        flushed_metrics = trainer.metrics.len();
        flushed_probs = trainer.prob_traj.len();
        trainer.save_checkpoint(&dir.latest_checkpoint())?;
        println!(
            "epoch {}/{}: {} rows, {} updates",
            trainer.epoch,
            trainer.config.epochs,
            trainer.metrics.len(),
            trainer.dist.update_count
        );
    }
    println!("done: {}", dir.root.display());
    Ok(())
}

fn cmd_sample(common: &Common, flops: f64) -> Result<()> {
    let config = load_config(common)?;
    let dir = RunDir::open(&config.output_dir)?;
    let trainer = reload_trainer(&config, &dir)?;
    let policy = trainer.gen.extract_argmax(flops)?;
    let path = dir.export(&format!("arch_flops{}.toml", flops));
    persist::write_architecture(&path, trainer.space(), &policy, flops)?;
    println!(
        "target {} -> resource {} ({} choices) -> {}",
        flops,
        policy.resource_units(),
        policy.choices().len(),
        path.display()
    );
    Ok(())
}

fn cmd_eval(common: &Common, flops: f64) -> Result<()> {
    let config = load_config(common)?;
    let dir = RunDir::open(&config.output_dir)?;
    let trainer = reload_trainer(&config, &dir)?;
    let policy = trainer.gen.extract_argmax(flops)?;
    let acc = trainer.val_accuracy(&policy)?;
    let loss = trainer.val_loss(&policy)?;
    let path = dir.export(&format!("eval_flops{}.csv", flops));
    persist::write_pareto(
        &path,
        &[analysis::ParetoRecord {
            target_c: flops,
            resource: policy.resource_units(),
            val_accuracy: acc,
            val_loss: loss,
            mode: trainer.config.baseline.as_str().to_string(),
        }],
    )?;
    println!(
        "target {} -> resource {} val_acc {:.4} val_loss {:.4}",
        flops,
        policy.resource_units(),
        acc,
        loss
    );
    Ok(())
}

fn cmd_pareto(common: &Common) -> Result<()> {
    let config = load_config(common)?;
    let dir = RunDir::open(&config.output_dir)?;
    let trainer = reload_trainer(&config, &dir)?;
    let records = analysis::pareto_sweep(&trainer)?;
    let path = dir.export("pareto.csv");
    persist::write_pareto(&path, &records)?;
    for r in &records {
        println!(
            "target {} -> resource {} val_acc {:.4}",
            r.target_c, r.resource, r.val_accuracy
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_bench(common: &Common, trials: usize, max_tries: u64) -> Result<()> {
    let config = load_config(common)?;
    let dir = RunDir::open(&config.output_dir)?;
    let trainer = reload_trainer(&config, &dir)?;
    let space = trainer.space().clone();
    let pmf = irwin_hall_reference(&space)?;
    let bin_pmf: Vec<f64> = (0..trainer.binning.k())
        .map(|b| pmf.bin_prob(&trainer.binning, b))
        .collect();
    let mut rng = RngSet::fork(trainer.config.seed, Stream::Eval as u64);
    let records = analysis::sampler_bench(
        &space,
        &trainer.gen,
        &trainer.binning,
        &bin_pmf,
        trials,
        max_tries,
        &mut rng,
    )?;
    let path = dir.export("bench.csv");
    persist::write_bench(&path, &records)?;
    for r in &records {
        println!(
            "bin {} (pmf {:.2e}): ag {} ns, rejection {} ns, {} timeouts",
            r.bin, r.uniform_pmf, r.ag_median_ns, r.rejection_median_ns, r.timeouts
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_kendall(common: &Common, subnets: usize) -> Result<()> {
    let config = load_config(common)?;
    let dir = RunDir::open(&config.output_dir)?;
    let mut trainer = reload_trainer(&config, &dir)?;
    // bracket = exactly one probe epoch on top of the checkpoint; nothing
    // is saved, so the stored run stays untouched
    let w_prev = trainer.net.snapshot();
    trainer.config.epochs = trainer.epoch + 1;
    trainer.train_epoch()?;
    let report = analysis::ranking_correlation_probe(&mut trainer, &w_prev, subnets, 1)?;
    let path = dir.export("kendall.csv");
    persist::write_kendall(&path, &report.pairs)?;
    println!("kendall tau = {:.4} over {} subnets", report.tau, report.pairs.len());
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_dist_check(common: &Common, samples: u64) -> Result<()> {
    let config = load_config(common)?;
    let space = config.build_space()?;
    let dir = RunDir::create(&config.output_dir)?;
    dir.write_manifest("dist-check", &config)?;
    let mut rng = RngSet::fork(config.train.seed, Stream::Eval as u64);
    let t0 = Instant::now();
    let pmf = irwin_hall_reference(&space)?;
    let drawn: Vec<f64> = (0..samples)
        .map(|_| space.choices_resource(&sample_choices(&space, &mut rng)))
        .collect::<Result<_>>()?;
    let tv = pmf.tv_distance(&drawn);
    let ks = pmf.ks_vs_matched_normal();
    let row = DistCheckRow {
        depth: space.depth(),
        samples,
        tv_distance: tv,
        ks_distance: ks,
        runtime_ms: t0.elapsed().as_millis(),
    };
    let path = dir.export("dist_check.csv");
    persist::write_dist_check(&path, &[row])?;
    println!(
        "D={} n={}: TV {:.6} vs exact pmf, KS {:.6} vs matched normal ({} ms)",
        space.depth(),
        samples,
        tv,
        ks,
        t0.elapsed().as_millis()
    );
    Ok(())
}

fn cmd_ablate(common: &Common, steps: &[f64], qs: &[u64]) -> Result<()> {
    let config = load_config(common)?;
    if steps.is_empty() && qs.is_empty() {
        return Err(Error::config("ablate needs --steps and/or --qs"));
    }
    let space = config.build_space()?;
    let data = ingest_for(&config)?;
    let dir = RunDir::create(&config.output_dir)?;
    dir.write_manifest("ablate", &config)?;
    let records = analysis::ablate(&space, &config.train, &data, steps, qs)?;
    let path = dir.export("ablate.csv");
    persist::write_ablate(&path, &records)?;
    for rec in &records {
        println!(
            "{}: mean val_acc {:.4} over {} bins",
            rec.tag,
            analysis::mean_accuracy(&rec.records),
            rec.records.len()
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}
