//! Recurrent architecture generator: maps a target complexity to one policy
//! vector per op, emitted autoregressively by an LSTM cell and sampled with
//! Gumbel-Softmax.
//!
//! The target is min-max normalized over the binning range and affinely
//! embedded as the LSTM's first input; each subsequent step consumes the
//! previous step's (embedded) policy. Ops with identical candidate menus
//! and costs share one output head and one feedback embedding.

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Matrix, ParamSet, Value};
use crate::error::{Error, Result};
use crate::rng::gumbel_row;
use crate::space::{assemble_policy, ResourceBinning, SearchSpace, SubnetPolicy};

/// LSTM hidden width. Fixed by construction; small spaces share it.
pub const HIDDEN: usize = 64;

/// Per-step Gumbel draws for one generation pass. Kept explicit so a
/// distribution update can evaluate two weight snapshots under identical
/// noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchNoise {
    pub rows: Vec<Vec<f64>>,
}

struct Gate {
    wx: Value,
    wh: Value,
    b: Value,
}

pub struct ArchGenerator {
    pub space: SearchSpace,
    pub binning: ResourceBinning,
    pub tau: f64,
    group_of_op: Vec<usize>,
    embed_c_w: Value,
    embed_c_b: Value,
    gates: Vec<Gate>,
    /// Per group: (head weight [n_d x H], head bias [1 x n_d]).
    heads: Vec<(Value, Value)>,
    /// Per group: feedback embedding ([H x n_d], [1 x H]).
    feedbacks: Vec<(Value, Value)>,
    params: ParamSet,
}

impl ArchGenerator {
    pub fn new(
        space: &SearchSpace,
        binning: &ResourceBinning,
        rng: &mut ChaCha8Rng,
    ) -> Result<ArchGenerator> {
        let mut params = ParamSet::new();
        let embed_c_w = params.register("embed_c.weight", init(1, HIDDEN, rng))?;
        let embed_c_b = params.register("embed_c.bias", Matrix::zeros(1, HIDDEN))?;
        let mut gates = Vec::with_capacity(4);
        for name in ["i", "f", "g", "o"] {
            gates.push(Gate {
                wx: params.register(format!("lstm.wx_{}", name), init(HIDDEN, HIDDEN, rng))?,
                wh: params.register(format!("lstm.wh_{}", name), init(HIDDEN, HIDDEN, rng))?,
                b: params.register(format!("lstm.b_{}", name), Matrix::zeros(1, HIDDEN))?,
            });
        }

        // group ops by identical (candidates, cost) signatures
        let mut group_of_op = Vec::with_capacity(space.depth());
        let mut signatures: HashMap<(Vec<usize>, Vec<i64>), usize> = HashMap::new();
        let mut group_width = Vec::new();
        for op in space.ops() {
            let sig = (
                op.candidates.clone(),
                op.unit_costs.iter().map(|c| (c * 1e6).round() as i64).collect(),
            );
            let next = signatures.len();
            let gid = *signatures.entry(sig).or_insert(next);
            if gid == group_width.len() {
                group_width.push(op.n_candidates());
            }
            group_of_op.push(gid);
        }
        let mut heads = Vec::with_capacity(group_width.len());
        let mut feedbacks = Vec::with_capacity(group_width.len());
        for (g, &n) in group_width.iter().enumerate() {
            heads.push((
                params.register(format!("head{}.weight", g), init(n, HIDDEN, rng))?,
                params.register(format!("head{}.bias", g), Matrix::zeros(1, n))?,
            ));
            feedbacks.push((
                params.register(format!("feedback{}.weight", g), init(HIDDEN, n, rng))?,
                params.register(format!("feedback{}.bias", g), Matrix::zeros(1, HIDDEN))?,
            ));
        }

        Ok(ArchGenerator {
            space: space.clone(),
            binning: binning.clone(),
            tau: 1.0,
            group_of_op,
            embed_c_w,
            embed_c_b,
            gates,
            heads,
            feedbacks,
            params,
        })
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn n_heads(&self) -> usize {
        self.heads.len()
    }

    pub fn snapshot(&self) -> HashMap<String, Matrix> {
        self.params.snapshot()
    }

    pub fn restore(&self, snap: &HashMap<String, Matrix>) -> Result<()> {
        self.params
            .restore(snap)
            .map_err(|e| Error::checkpoint(format!("generator restore failed: {}", e)))
    }

    pub fn draw_noise(&self, rng: &mut ChaCha8Rng) -> ArchNoise {
        ArchNoise {
            rows: self
                .space
                .ops()
                .iter()
                .map(|op| gumbel_row(rng, op.n_candidates()))
                .collect(),
        }
    }

    fn lstm_step(&self, x: &Value, h: &Value, c: &Value) -> Result<(Value, Value)> {
        let pre = |gate: &Gate| -> Result<Value> {
            x.matmul(&gate.wx.transpose())?
                .add(&h.matmul(&gate.wh.transpose())?)?
                .add(&gate.b)
        };
        let i = pre(&self.gates[0])?.sigmoid();
        let f = pre(&self.gates[1])?.sigmoid();
        let g = pre(&self.gates[2])?.tanh();
        let o = pre(&self.gates[3])?.sigmoid();
        let c_next = f.mul(c)?.add(&i.mul(&g)?)?;
        let h_next = o.mul(&c_next.tanh())?;
        Ok((h_next, c_next))
    }

    fn check_range(&self, c: f64) -> Result<()> {
        if c < self.binning.lo || c > self.binning.hi {
            return Err(Error::contract(format!(
                "target {} outside resource range [{}, {}]",
                c, self.binning.lo, self.binning.hi
            )));
        }
        Ok(())
    }

    /// Core pass. `target` is a 1x1 value in raw cost-units (it may carry a
    /// gradient path, e.g. from a soft bin sample). Policies are sampled
    /// with the provided noise, or taken as plain argmax when `noise` is
    /// None (deterministic extraction).
    pub fn generate_conditioned(
        &self,
        target: &Value,
        noise: Option<&ArchNoise>,
        hard: bool,
    ) -> Result<SubnetPolicy> {
        self.check_range(target.item())?;
        if let Some(n) = noise {
            if n.rows.len() != self.space.depth() {
                return Err(Error::dim("noise rows do not match space depth"));
            }
        }
        let span = self.binning.hi - self.binning.lo;
        let c_norm = target
            .add_scalar(-self.binning.lo)
            .mul_scalar(1.0 / span);
        let mut x = c_norm.matmul(&self.embed_c_w)?.add(&self.embed_c_b)?;
        let mut h = Value::constant(Matrix::zeros(1, HIDDEN));
        let mut c = Value::constant(Matrix::zeros(1, HIDDEN));
        let mut onehots = Vec::with_capacity(self.space.depth());
        for d in 0..self.space.depth() {
            let (h2, c2) = self.lstm_step(&x, &h, &c)?;
            h = h2;
            c = c2;
            let gid = self.group_of_op[d];
            let (hw, hb) = &self.heads[gid];
            let logits = h.matmul(&hw.transpose())?.add(hb)?;
            let p = match noise {
                Some(n) => gumbel_softmax(&logits, self.tau, &n.rows[d], hard)?,
                None => {
                    let idx = logits.data().argmax_row(0);
                    let mut row = Matrix::zeros(1, logits.shape().1);
                    row.set(0, idx, 1.0);
                    Value::constant(row)
                }
            };
            let (fw, fb) = &self.feedbacks[gid];
            x = p.matmul(&fw.transpose())?.add(fb)?;
            onehots.push(p);
        }
        assemble_policy(&self.space, onehots, noise.is_none())
    }

    /// Sample an architecture for a raw-unit target complexity.
    pub fn generate(
        &self,
        target_c: f64,
        rng: &mut ChaCha8Rng,
        hard: bool,
    ) -> Result<SubnetPolicy> {
        let noise = self.draw_noise(rng);
        self.generate_conditioned(&Value::scalar(target_c), Some(&noise), hard)
    }

    /// Deterministic extraction: per-step argmax of head logits, no noise,
    /// ties toward the lower candidate index.
    pub fn extract_argmax(&self, target_c: f64) -> Result<SubnetPolicy> {
        self.generate_conditioned(&Value::scalar(target_c), None, true)
    }
}

/// Gumbel-Softmax sample of a categorical from logits: softmax((logits +
/// noise)/tau). With `hard`, the forward value is the one-hot argmax and
/// the gradient is the soft sample's (straight-through).
pub fn gumbel_softmax(logits: &Value, tau: f64, noise: &[f64], hard: bool) -> Result<Value> {
    if tau <= 0.0 {
        return Err(Error::contract("gumbel_softmax needs tau > 0"));
    }
    let (r, n) = logits.shape();
    if r != 1 || n != noise.len() {
        return Err(Error::dim(format!(
            "logits {}x{} with {} noise draws",
            r,
            n,
            noise.len()
        )));
    }
    let noisy = logits
        .add(&Value::constant(Matrix::row(noise)))?
        .mul_scalar(1.0 / tau);
    let soft = noisy.softmax_rows();
    if hard {
        soft.straight_through()
    } else {
        Ok(soft)
    }
}

/// Convenience wrapper drawing fresh noise from an RNG.
pub fn gumbel_softmax_rng(
    logits: &Value,
    tau: f64,
    rng: &mut ChaCha8Rng,
    hard: bool,
) -> Result<Value> {
    let noise = gumbel_row(rng, logits.shape().1);
    gumbel_softmax(logits, tau, &noise, hard)
}

/// Squared gap between a policy's resource total and the target, in the
/// units both are expressed in.
pub fn rc_loss(policy: &SubnetPolicy, target_c: f64) -> Value {
    policy.resource.add_scalar(-target_c).square()
}

/// rc_loss measured in bin widths: missing the target by one bin costs 1.0
/// before the lambda weight. Normalizing by the full range instead makes
/// the penalty gradient ~K^2 weaker and the task loss silently wins every
/// width argument.
pub fn rc_loss_normalized(
    policy: &SubnetPolicy,
    target_c: f64,
    binning: &ResourceBinning,
) -> Value {
    policy
        .resource
        .add_scalar(-target_c)
        .mul_scalar(1.0 / binning.step)
        .square()
}

/// L = task + lambda * rc.
pub fn joint_loss(task: &Value, rc: &Value, lambda: f64) -> Result<Value> {
    task.add(&rc.mul_scalar(lambda))
}

fn init(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    use rand::Rng;
    let bound = 1.0 / (cols as f64).sqrt();
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..m.len() {
        m.as_mut_slice()[i] = rng.gen_range(-bound..bound);
    }
    m
}
