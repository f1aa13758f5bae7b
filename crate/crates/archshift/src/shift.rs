//! Learnable sampling distribution over complexity bins.
//!
//! A 1 x K logit vector, softmaxed into bin probabilities, Gumbel-max
//! sampled once per training step. Every q steps the distribution is
//! updated from a finite difference: the validation loss of one frozen
//! (bin, subnet, batch, noise) draw is evaluated under the weights from q
//! steps ago and under the current weights, and the difference of the two
//! logit gradients is descended. Bins whose subnets improved the most gain
//! probability, concentrating training where it still pays.

use crate::autodiff::{Adam, Matrix, ParamSet, Value};
use crate::error::{Error, Result};
use crate::generator::{ArchGenerator, ArchNoise};
use crate::rng::gumbel_row;
use crate::space::ResourceBinning;
use crate::supernet::{Supernet, WeightSnapshot};
use rand_chacha::ChaCha8Rng;

pub struct SamplingDistribution {
    logits: Value,
    pub binning: ResourceBinning,
    pub tau: f64,
    pub update_count: u64,
    frozen: bool,
    params: ParamSet,
}

/// One Gumbel-max bin draw.
pub struct BinDraw {
    pub index: usize,
    pub center: f64,
    /// The center as a 1x1 value whose gradient path runs through the
    /// straight-through soft sample into the logits.
    pub center_value: Value,
    /// Soft bin probabilities under the drawn noise.
    pub soft: Value,
}

/// Which weight snapshot a finite-difference pass evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pass {
    Prev,
    Curr,
}

/// Everything one distribution update holds fixed: the snapshot pair
/// bracketing q training steps, one validation batch, and the Gumbel draws
/// for the bin and the architecture (identical across both passes).
pub struct UpdateContext {
    pub w_prev: WeightSnapshot,
    pub w_curr: WeightSnapshot,
    pub val_x: Matrix,
    pub val_labels: Vec<usize>,
    pub bin_noise: Vec<f64>,
    pub arch_noise: ArchNoise,
}

impl UpdateContext {
    pub fn freeze(
        w_prev: WeightSnapshot,
        w_curr: WeightSnapshot,
        val_x: Matrix,
        val_labels: Vec<usize>,
        k: usize,
        gen: &ArchGenerator,
        rng: &mut ChaCha8Rng,
    ) -> UpdateContext {
        UpdateContext {
            w_prev,
            w_curr,
            val_x,
            val_labels,
            bin_noise: gumbel_row(rng, k),
            arch_noise: gen.draw_noise(rng),
        }
    }
}

pub struct UpdateReport {
    pub t: u64,
    pub bin: usize,
    pub center: f64,
    /// The applied gradient (difference of the two passes').
    pub grad: Matrix,
    pub loss_prev: f64,
    pub loss_curr: f64,
    pub probs_after: Vec<f64>,
}

impl SamplingDistribution {
    /// Uniform initialization: zero logits over the bin centers.
    pub fn new(binning: ResourceBinning) -> Result<SamplingDistribution> {
        let mut params = ParamSet::new();
        let logits = params.register("dist.logits", Matrix::zeros(1, binning.k()))?;
        Ok(SamplingDistribution {
            logits,
            binning,
            tau: 1.0,
            update_count: 0,
            frozen: false,
            params,
        })
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn logits(&self) -> &Value {
        &self.logits
    }

    pub fn k(&self) -> usize {
        self.binning.k()
    }

    /// Current bin probabilities (softmax of the logits).
    pub fn probs(&self) -> Vec<f64> {
        self.logits.softmax_rows().data().as_slice().to_vec()
    }

    /// Pin the distribution: sampling stays available, updates are refused.
    pub fn pin(&mut self) {
        self.frozen = true;
    }

    pub fn unpin(&mut self) {
        self.frozen = false;
    }

    pub fn is_pinned(&self) -> bool {
        self.frozen
    }

    pub fn sample_bin(&self, rng: &mut ChaCha8Rng) -> BinDraw {
        let noise = gumbel_row(rng, self.k());
        self.sample_bin_with_noise(&noise)
            .expect("noise length matches bin count")
    }

    /// Gumbel-max with injected noise. The hard index is the argmax of the
    /// noisy logits; the soft vector is kept as the gradient path.
    pub fn sample_bin_with_noise(&self, noise: &[f64]) -> Result<BinDraw> {
        if noise.len() != self.k() {
            return Err(Error::dim(format!(
                "{} noise draws for {} bins",
                noise.len(),
                self.k()
            )));
        }
        let noisy = self
            .logits
            .add(&Value::constant(Matrix::row(noise)))?
            .mul_scalar(1.0 / self.tau);
        let soft = noisy.softmax_rows();
        let hard = soft.straight_through()?;
        let index = hard.data().argmax_row(0);
        let center_value = hard
            .mul(&Value::constant(Matrix::row(self.binning.centers())))?
            .sum();
        Ok(BinDraw { index, center: self.binning.center(index), center_value, soft })
    }

    /// Finite-difference update core. `eval` maps a pass and its (shared)
    /// bin draw to the validation loss under that pass's weights; this
    /// routine differentiates both losses back to the logits, descends
    /// their difference (current minus previous), and reports the result.
    ///
    /// A loss drop between the passes makes the current-pass gradient the
    /// smaller one along the sampled bin's direction, so descending the
    /// difference raises that bin's probability: improvement attracts
    /// sampling mass.
    pub fn distribution_update_with<F>(
        &mut self,
        opt: &mut Adam,
        bin_noise: &[f64],
        mut eval: F,
    ) -> Result<UpdateReport>
    where
        F: FnMut(Pass, &BinDraw) -> Result<Value>,
    {
        if self.frozen {
            return Err(Error::contract(
                "distribution is pinned; unpin before updating",
            ));
        }
        let mut grads: Vec<Matrix> = Vec::with_capacity(2);
        let mut losses = [0.0f64; 2];
        let mut bin = 0usize;
        let mut center = 0.0f64;
        for (i, pass) in [Pass::Prev, Pass::Curr].into_iter().enumerate() {
            self.params.zero_grad();
            let draw = self.sample_bin_with_noise(bin_noise)?;
            bin = draw.index;
            center = draw.center;
            let loss = eval(pass, &draw)?;
            loss.backward()?;
            losses[i] = loss.item();
            grads.push(self.logits.grad());
        }
        let g_prev = &grads[0];
        let g_curr = &grads[1];
        let mut diff = g_curr.clone();
        diff.add_assign_scaled(g_prev, -1.0);

        self.params.zero_grad();
        self.logits.set_grad(diff.clone())?;
        opt.step(&self.params)?;
        self.params.zero_grad();
        self.update_count += 1;
        Ok(UpdateReport {
            t: self.update_count,
            bin,
            center,
            grad: diff,
            loss_prev: losses[0],
            loss_curr: losses[1],
            probs_after: self.probs(),
        })
    }

    /// The full update of one training cycle: evaluate the frozen draw's
    /// validation loss under both bracketing weight snapshots, update the
    /// logits, and leave the supernet holding the current weights with
    /// clean gradients.
    pub fn distribution_update(
        &mut self,
        ctx: &UpdateContext,
        net: &Supernet,
        gen: &ArchGenerator,
        opt: &mut Adam,
    ) -> Result<UpdateReport> {
        let x = Value::constant(ctx.val_x.clone());
        let result = self.distribution_update_with(opt, &ctx.bin_noise, |pass, draw| {
            let snap = match pass {
                Pass::Prev => &ctx.w_prev,
                Pass::Curr => &ctx.w_curr,
            };
            net.restore(snap)?;
            net.params().zero_grad();
            gen.params().zero_grad();
            let policy = gen.generate_conditioned(&draw.center_value, Some(&ctx.arch_noise), true)?;
            net.task_loss(&x, &ctx.val_labels, &policy)
        });
        net.restore(&ctx.w_curr)?;
        net.params().zero_grad();
        gen.params().zero_grad();
        result
    }
}
