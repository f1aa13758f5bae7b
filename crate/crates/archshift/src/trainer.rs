//! Joint training loop: supernet and generator train together every step;
//! the bin distribution starts pinned (warmup), then updates from bracketed
//! weight snapshots every q steps.

use std::path::Path;

use crate::autodiff::{Adam, Sgd, Value};
use crate::checkpoint::{self, CheckpointState};
use crate::data::DataSplit;
use crate::error::{Error, Result};
use crate::generator::{joint_loss, rc_loss_normalized, ArchGenerator};
use crate::rng::{RngSet, Stream};
use crate::shift::{SamplingDistribution, UpdateContext};
use crate::space::{
    policy_from_choices, sample_choices, ResourceBinning, SearchSpace, SubnetPolicy,
};
use crate::supernet::{Supernet, WeightSnapshot};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How complexity targets are chosen during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMode {
    /// Learned bin distribution with periodic updates.
    Shift,
    /// Uniform bins throughout; no distribution updates.
    UniformBins,
    /// Uniform architectures for the supernet; the generator trains on the
    /// constraint loss alone so extraction still works.
    UniformArch,
}

impl BaselineMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineMode::Shift => "shift",
            BaselineMode::UniformBins => "uniform-bins",
            BaselineMode::UniformArch => "uniform-arch",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Supernet weights: plain SGD.
    pub lr_w: f64,
    /// Generator parameters: Adam.
    pub lr_ag: f64,
    /// Distribution logits: Adam.
    pub lr_b: f64,
    /// Weight of the normalized resource-constraint loss.
    pub lambda: f64,
    /// Distribution update period, in training steps.
    pub q: u64,
    pub warmup_epochs: usize,
    pub seed: u64,
    pub baseline: BaselineMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 64,
            lr_w: 0.1,
            lr_ag: 1e-3,
            lr_b: 1e-3,
            lambda: 0.1,
            q: 100,
            warmup_epochs: 4,
            seed: 0,
            baseline: BaselineMode::Shift,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be positive"));
        }
        if self.q == 0 {
            return Err(Error::config("q must be at least 1"));
        }
        if self.warmup_epochs > self.epochs {
            return Err(Error::config("warmup_epochs exceeds epochs"));
        }
        if !(self.lr_w > 0.0 && self.lr_ag > 0.0 && self.lr_b > 0.0) {
            return Err(Error::config("learning rates must be positive"));
        }
        if self.lambda < 0.0 {
            return Err(Error::config("lambda must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Step,
    Update,
}

impl RowKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowKind::Step => "step",
            RowKind::Update => "update",
        }
    }
}

/// One metrics-log row. Step rows log the training losses; update rows log
/// the two validation losses of the finite-difference pair in the same
/// columns (task = current, rc = previous).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iteration: u64,
    pub epoch: usize,
    pub kind: RowKind,
    pub bin: usize,
    pub task_loss: f64,
    pub rc_loss: f64,
    pub resource: f64,
}

/// One probability-trajectory point: bin probability after update t.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbPoint {
    pub t: u64,
    pub bin_center: f64,
    pub probability: f64,
}

pub struct Trainer {
    pub config: TrainConfig,
    pub binning: ResourceBinning,
    pub net: Supernet,
    pub gen: ArchGenerator,
    pub dist: SamplingDistribution,
    pub data: DataSplit,
    pub metrics: Vec<MetricsRow>,
    pub prob_traj: Vec<ProbPoint>,
    pub iteration: u64,
    pub epoch: usize,
    pub(crate) opt_w: Sgd,
    pub(crate) opt_ag: Adam,
    pub(crate) opt_b: Adam,
    pub(crate) rng: RngSet,
    pub(crate) count_since_update: u64,
    pub(crate) w_prev: Option<WeightSnapshot>,
}

impl Trainer {
    pub fn new(
        config: TrainConfig,
        space: &SearchSpace,
        binning: ResourceBinning,
        data: DataSplit,
    ) -> Result<Trainer> {
        config.validate()?;
        if data.val.is_empty() {
            return Err(Error::config("validation split is empty"));
        }
        let mut rng = RngSet::new(config.seed);
        let net = Supernet::new(
            space,
            data.train.n_features(),
            data.train.n_classes,
            rng.stream(Stream::Init),
        )?;
        let gen = ArchGenerator::new(space, &binning, rng.stream(Stream::Init))?;
        let mut dist = SamplingDistribution::new(binning.clone())?;
        dist.pin();
        let (lr_w, lr_ag, lr_b) = (config.lr_w, config.lr_ag, config.lr_b);
        Ok(Trainer {
            config,
            binning,
            net,
            gen,
            dist,
            data,
            metrics: Vec::new(),
            prob_traj: Vec::new(),
            iteration: 0,
            epoch: 0,
            opt_w: Sgd::new(lr_w),
            opt_ag: Adam::new(lr_ag),
            opt_b: Adam::new(lr_b),
            rng,
            count_since_update: 0,
            w_prev: None,
        })
    }

    pub fn space(&self) -> &SearchSpace {
        &self.net.space
    }

    fn in_warmup(&self) -> bool {
        self.epoch < self.config.warmup_epochs
    }

    fn shift_active(&self) -> bool {
        self.config.baseline == BaselineMode::Shift && !self.in_warmup()
    }

    /// One joint step on an externally chosen policy and target. The public
    /// sampling path wraps this; tests drive it directly to pin the policy.
    pub fn train_step_with_policy(
        &mut self,
        x: &Value,
        labels: &[usize],
        policy: &SubnetPolicy,
        target_c: f64,
        bin: usize,
    ) -> Result<MetricsRow> {
        let task = self.net.task_loss(x, labels, policy)?;
        let rc = rc_loss_normalized(policy, target_c, &self.binning);
        let loss = joint_loss(&task, &rc, self.config.lambda)?;
        self.net.params().zero_grad();
        self.gen.params().zero_grad();
        loss.backward()?;
        self.opt_w.step(self.net.params())?;
        self.opt_ag.step(self.gen.params())?;
        let row = MetricsRow {
            iteration: self.iteration,
            epoch: self.epoch,
            kind: RowKind::Step,
            bin,
            task_loss: task.item(),
            rc_loss: rc.item(),
            resource: policy.resource_units(),
        };
        self.iteration += 1;
        Ok(row)
    }

    /// One training step on one batch: sample a complexity target, generate
    /// a subnet, descend the joint loss.
    pub fn train_step(&mut self, x: &Value, labels: &[usize]) -> Result<MetricsRow> {
        let row = match self.config.baseline {
            BaselineMode::Shift | BaselineMode::UniformBins => {
                let draw = self.dist.sample_bin(self.rng.stream(Stream::Train));
                let noise = self.gen.draw_noise(self.rng.stream(Stream::Train));
                let policy = self.gen.generate_conditioned(
                    &Value::scalar(draw.center),
                    Some(&noise),
                    true,
                )?;
                self.train_step_with_policy(x, labels, &policy, draw.center, draw.index)?
            }
            BaselineMode::UniformArch => {
                // supernet sees a uniform subnet
                let choices = sample_choices(&self.net.space, self.rng.stream(Stream::Train));
                let policy = policy_from_choices(&self.net.space, &choices)?;
                let task = self.net.task_loss(x, labels, &policy)?;
                self.net.params().zero_grad();
                task.backward()?;
                self.opt_w.step(self.net.params())?;

                // generator trains on the constraint alone
                let k = self.rng.stream(Stream::Train).gen_range(0..self.binning.k());
                let center = self.binning.center(k);
                let noise = self.gen.draw_noise(self.rng.stream(Stream::Train));
                let gp = self.gen.generate_conditioned(
                    &Value::scalar(center),
                    Some(&noise),
                    true,
                )?;
                let rc = rc_loss_normalized(&gp, center, &self.binning);
                self.gen.params().zero_grad();
                rc.backward()?;
                self.opt_ag.step(self.gen.params())?;

                let resource = policy.resource_units();
                let row = MetricsRow {
                    iteration: self.iteration,
                    epoch: self.epoch,
                    kind: RowKind::Step,
                    bin: self.binning.bin_index(resource),
                    task_loss: task.item(),
                    rc_loss: rc.item(),
                    resource,
                };
                self.iteration += 1;
                row
            }
        };
        self.metrics.push(row.clone());

        if self.shift_active() {
            self.count_since_update += 1;
            if self.count_since_update == self.config.q {
                self.distribution_update_cycle()?;
                self.count_since_update = 0;
            }
        }
        Ok(row)
    }

    /// The Algorithm-2 cycle: freeze one (bin, subnet, batch, noise) draw,
    /// evaluate the validation loss under the weights from q steps ago and
    /// under the current weights, and descend the gradient difference.
    fn distribution_update_cycle(&mut self) -> Result<()> {
        let w_prev = self
            .w_prev
            .take()
            .ok_or_else(|| Error::contract("no bracketing snapshot for distribution update"))?;
        let w_curr = self.net.snapshot();
        let n_val = self.data.val.len();
        let take = self.config.batch_size.min(n_val);
        let idx: Vec<usize> = (0..take)
            .map(|_| self.rng.stream(Stream::Update).gen_range(0..n_val))
            .collect();
        let (val_x, val_labels) = self.data.val.gather(&idx)?;
        let ctx = UpdateContext::freeze(
            w_prev,
            w_curr.clone(),
            val_x,
            val_labels,
            self.dist.k(),
            &self.gen,
            self.rng.stream(Stream::Update),
        );
        let report = self
            .dist
            .distribution_update(&ctx, &self.net, &self.gen, &mut self.opt_b)?;
        for (i, &p) in report.probs_after.iter().enumerate() {
            self.prob_traj.push(ProbPoint {
                t: report.t,
                bin_center: self.binning.center(i),
                probability: p,
            });
        }
        self.metrics.push(MetricsRow {
            iteration: self.iteration,
            epoch: self.epoch,
            kind: RowKind::Update,
            bin: report.bin,
            task_loss: report.loss_curr,
            rc_loss: report.loss_prev,
            resource: report.center,
        });
        self.w_prev = Some(w_curr);
        Ok(())
    }

    /// Train one epoch: seeded shuffle, full batches only.
    pub fn train_epoch(&mut self) -> Result<()> {
        if self.epoch >= self.config.epochs {
            return Err(Error::contract("training budget already exhausted"));
        }
        // warmup ends now: unpin and set the first bracket snapshot
        if self.config.baseline == BaselineMode::Shift
            && self.epoch == self.config.warmup_epochs
            && self.dist.is_pinned()
        {
            self.dist.unpin();
            self.w_prev = Some(self.net.snapshot());
            self.count_since_update = 0;
        }
        let n = self.data.train.len();
        let bs = self.config.batch_size;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(self.rng.stream(Stream::Data));
        for chunk in order.chunks_exact(bs) {
            let (x, labels) = self.data.train.gather(chunk)?;
            self.train_step(&Value::constant(x), &labels)?;
        }
        self.epoch += 1;
        Ok(())
    }

    /// Run the remaining epochs of the configured budget.
    pub fn run(&mut self) -> Result<()> {
        while self.epoch < self.config.epochs {
            self.train_epoch()?;
        }
        Ok(())
    }

    /// Inherited accuracy of a policy on the validation split.
    pub fn val_accuracy(&self, policy: &SubnetPolicy) -> Result<f64> {
        self.net
            .accuracy(&self.data.val.x, &self.data.val.labels, policy)
    }

    /// Mean validation loss of a policy.
    pub fn val_loss(&self, policy: &SubnetPolicy) -> Result<f64> {
        let x = Value::constant(self.data.val.x.clone());
        Ok(self
            .net
            .task_loss(&x, &self.data.val.labels, policy)?
            .item())
    }

    /// Direct access to one RNG stream, for probes that must not disturb
    /// the training streams.
    pub fn rng_mut(&mut self, s: Stream) -> &mut ChaCha8Rng {
        self.rng.stream(s)
    }

    /// The weight snapshot taken at the start of the current update
    /// bracket, if one is armed.
    pub fn w_prev(&self) -> Option<&WeightSnapshot> {
        self.w_prev.as_ref()
    }

    /// Everything a resumed run needs, as one serializable value.
    pub fn checkpoint_state(&self) -> CheckpointState {
        CheckpointState {
            iteration: self.iteration,
            epoch: self.epoch as u64,
            count_since_update: self.count_since_update,
            update_count: self.dist.update_count,
            pinned: self.dist.is_pinned(),
            rng_positions: self.rng.positions(),
            net: self.net.snapshot(),
            gen: self.gen.snapshot(),
            dist: self.dist.params().snapshot(),
            adam_ag: (self.opt_ag.t, self.opt_ag.export_slots()),
            adam_b: (self.opt_b.t, self.opt_b.export_slots()),
            w_prev: self.w_prev.clone(),
        }
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.checkpoint_state())
    }

    /// Load checkpoint state into this trainer. The trainer must have been
    /// built from the same config and space; tensor name or shape
    /// mismatches are rejected with the offending names.
    pub fn restore_checkpoint(&mut self, state: CheckpointState) -> Result<()> {
        self.net.restore(&state.net)?;
        self.gen.restore(&state.gen)?;
        self.dist.params().restore(&state.dist)?;
        self.dist.update_count = state.update_count;
        if state.pinned {
            self.dist.pin();
        } else {
            self.dist.unpin();
        }
        self.opt_ag.import_slots(state.adam_ag.0, state.adam_ag.1);
        self.opt_b.import_slots(state.adam_b.0, state.adam_b.1);
        self.rng.restore_positions(state.rng_positions);
        self.iteration = state.iteration;
        self.epoch = state.epoch as usize;
        self.count_since_update = state.count_since_update;
        self.w_prev = state.w_prev;
        Ok(())
    }

    /// Build a fresh trainer for the config and continue it from a saved
    /// checkpoint file.
    pub fn resume_from(
        config: TrainConfig,
        space: &SearchSpace,
        binning: ResourceBinning,
        data: DataSplit,
        path: &Path,
    ) -> Result<Trainer> {
        let state = checkpoint::load(path)?;
        let mut t = Trainer::new(config, space, binning, data)?;
        t.restore_checkpoint(state)?;
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ingest, DataSource};
    use crate::rng::RngSet;

    fn small_split(seed: u64) -> DataSplit {
        let src = DataSource::SyntheticBlobs {
            n_samples: 400,
            n_features: 16,
            n_classes: 4,
            separation: 0.55,
        };
        ingest(&src, 0.8, &mut RngSet::fork(seed, 1)).unwrap()
    }

    fn quick_config(epochs: usize, baseline: BaselineMode) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 32,
            warmup_epochs: 1,
            q: 5,
            baseline,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn plain_supervised_training_reduces_loss() {
        // lambda = 0 with a pinned full-width policy: ordinary MLP training
        let space = SearchSpace::toy();
        let binning = ResourceBinning::auto(&space).unwrap();
        let mut config = quick_config(100, BaselineMode::Shift);
        config.lambda = 0.0;
        let mut t = Trainer::new(config, &space, binning, small_split(60)).unwrap();
        let policy = policy_from_choices(t.space(), &[2; 6]).unwrap();

        let mut losses = Vec::new();
        'outer: for _ in 0..100 {
            let n = t.data.train.len();
            let order: Vec<usize> = (0..n).collect();
            for chunk in order.chunks_exact(32) {
                let (x, labels) = t.data.train.gather(chunk).unwrap();
                let row = t
                    .train_step_with_policy(&Value::constant(x), &labels, &policy, 144.0, 7)
                    .unwrap();
                losses.push(row.task_loss);
                if losses.len() >= 200 {
                    break 'outer;
                }
            }
        }
        let early: f64 = losses[..20].iter().sum::<f64>() / 20.0;
        let late: f64 = losses[losses.len() - 20..].iter().sum::<f64>() / 20.0;
        assert!(late < early, "loss did not decrease: {} -> {}", early, late);
        assert!(losses.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn identical_seeds_identical_metrics() {
        let space = SearchSpace::toy();
        let run = || {
            let binning = ResourceBinning::auto(&space).unwrap();
            let mut t = Trainer::new(
                quick_config(3, BaselineMode::Shift),
                &space,
                binning,
                small_split(61),
            )
            .unwrap();
            t.run().unwrap();
            t.metrics
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn warmup_pins_the_distribution() {
        let space = SearchSpace::toy();
        let binning = ResourceBinning::auto(&space).unwrap();
        let mut config = quick_config(2, BaselineMode::Shift);
        config.warmup_epochs = 2;
        let mut t = Trainer::new(config, &space, binning, small_split(62)).unwrap();
        let logits_before = t.dist.logits().data();
        t.train_epoch().unwrap();
        assert_eq!(t.dist.logits().data(), logits_before);
        t.train_epoch().unwrap();
        assert_eq!(t.dist.logits().data(), logits_before);
        assert!(t.prob_traj.is_empty());
    }

    #[test]
    fn all_warmup_equals_uniform_bins_run() {
        let space = SearchSpace::toy();
        let metrics = |baseline, warmup| {
            let binning = ResourceBinning::auto(&space).unwrap();
            let mut config = quick_config(3, baseline);
            config.warmup_epochs = warmup;
            let mut t = Trainer::new(config, &space, binning, small_split(63)).unwrap();
            t.run().unwrap();
            t.metrics
        };
        assert_eq!(
            metrics(BaselineMode::Shift, 3),
            metrics(BaselineMode::UniformBins, 1)
        );
    }

    #[test]
    fn q_beyond_budget_means_no_updates() {
        let space = SearchSpace::toy();
        let binning = ResourceBinning::auto(&space).unwrap();
        let mut config = quick_config(2, BaselineMode::Shift);
        config.q = 10_000;
        let mut t = Trainer::new(config, &space, binning, small_split(64)).unwrap();
        t.run().unwrap();
        assert!(t.metrics.iter().all(|r| r.kind == RowKind::Step));
        let probs = t.dist.probs();
        for p in probs {
            assert!((p - 1.0 / 8.0).abs() < 1e-15);
        }
    }

    #[test]
    fn metrics_row_count_is_steps_plus_updates() {
        let space = SearchSpace::toy();
        let binning = ResourceBinning::auto(&space).unwrap();
        let mut t = Trainer::new(
            quick_config(3, BaselineMode::Shift),
            &space,
            binning,
            small_split(65),
        )
        .unwrap();
        t.run().unwrap();
        let steps = t.metrics.iter().filter(|r| r.kind == RowKind::Step).count();
        let updates = t.metrics.iter().filter(|r| r.kind == RowKind::Update).count();
        // 3 epochs x 10 full batches of 32 from 320 train rows
        assert_eq!(steps, 30);
        // warmup 1 epoch, then 20 steps at q=5
        assert_eq!(updates, 4);
        assert_eq!(t.metrics.len(), steps + updates);
        assert_eq!(t.prob_traj.len(), updates * 8);
    }

    #[test]
    fn update_brackets_are_exactly_q_steps_apart() {
        let space = SearchSpace::toy();
        let binning = ResourceBinning::auto(&space).unwrap();
        let mut t = Trainer::new(
            quick_config(3, BaselineMode::Shift),
            &space,
            binning,
            small_split(66),
        )
        .unwrap();
        t.run().unwrap();
        let update_iters: Vec<u64> = t
            .metrics
            .iter()
            .filter(|r| r.kind == RowKind::Update)
            .map(|r| r.iteration)
            .collect();
        for w in update_iters.windows(2) {
            assert_eq!(w[1] - w[0], 5);
        }
    }

    #[test]
    fn uniform_arch_mode_trains() {
        let space = SearchSpace::toy();
        let binning = ResourceBinning::auto(&space).unwrap();
        let mut t = Trainer::new(
            quick_config(2, BaselineMode::UniformArch),
            &space,
            binning,
            small_split(67),
        )
        .unwrap();
        t.run().unwrap();
        assert!(t.metrics.iter().all(|r| r.kind == RowKind::Step));
        assert!(t.metrics.iter().all(|r| r.task_loss.is_finite()));
    }
}
