//! Weight-entangled supernet: one over-parameterized MLP whose hidden
//! widths are gated by policy masks, so every candidate subnet reads its
//! weights from the shared store.
//!
//! Masks gate activations (output side). For prefix masks this is
//! arithmetically identical to slicing weight rows, and it leaves masked
//! rows with exactly zero gradient on the step.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Matrix, ParamSet, Value};
use crate::error::{Error, Result};
use crate::space::{SearchSpace, SubnetPolicy};

pub struct EntangledLayer {
    /// [max_out x max_in]
    pub weight: Value,
    /// [1 x max_out]
    pub bias: Value,
    pub op_index: usize,
    /// Residual layers add their input through; selecting the zero-width
    /// candidate then bypasses the block entirely.
    pub residual: bool,
}

/// Deep copy of all parameter data, keyed by parameter name.
pub type WeightSnapshot = HashMap<String, Matrix>;

pub struct Supernet {
    pub space: SearchSpace,
    pub input_dim: usize,
    pub n_classes: usize,
    layers: Vec<EntangledLayer>,
    head_w: Value,
    head_b: Value,
    params: ParamSet,
}

impl Supernet {
    /// Build the maximal network for a space: hidden layer d is as wide as
    /// op d's largest candidate; a dense head maps the last hidden layer to
    /// class logits. Weights are fan-in-scaled uniform on the full widths,
    /// so entangled slices are identically initialized across subnets.
    pub fn new(
        space: &SearchSpace,
        input_dim: usize,
        n_classes: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Supernet> {
        if input_dim == 0 || n_classes < 2 {
            return Err(Error::contract("need input_dim >= 1 and n_classes >= 2"));
        }
        let mut params = ParamSet::new();
        let mut layers = Vec::with_capacity(space.depth());
        let mut in_dim = input_dim;
        for (d, op) in space.ops().iter().enumerate() {
            let out_dim = op.max_units();
            let residual = op.is_skippable();
            if residual && in_dim != out_dim {
                return Err(Error::contract(format!(
                    "skippable op {} needs matching widths ({} in, {} out)",
                    d, in_dim, out_dim
                )));
            }
            let weight = params.register(
                format!("layer{}.weight", d),
                init_relu(out_dim, in_dim, rng),
            )?;
            let bias = params.register(format!("layer{}.bias", d), Matrix::zeros(1, out_dim))?;
            layers.push(EntangledLayer { weight, bias, op_index: d, residual });
            in_dim = out_dim;
        }
        let head_w = params.register("head.weight", init_uniform(n_classes, in_dim, rng))?;
        let head_b = params.register("head.bias", Matrix::zeros(1, n_classes))?;
        Ok(Supernet {
            space: space.clone(),
            input_dim,
            n_classes,
            layers,
            head_w,
            head_b,
            params,
        })
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn layers(&self) -> &[EntangledLayer] {
        &self.layers
    }

    /// Class logits for a batch under a policy. Each hidden activation is
    /// relu(x W^T + b) elementwise-multiplied by the op's mapped mask, so
    /// gradients flow into shared weights and, through the mask product,
    /// into soft policies.
    pub fn forward(&self, x: &Value, policy: &SubnetPolicy) -> Result<Value> {
        let (batch, feat) = x.shape();
        if feat != self.input_dim {
            return Err(Error::dim(format!(
                "input has {} features, net expects {}",
                feat, self.input_dim
            )));
        }
        if policy.masks.len() != self.layers.len() {
            return Err(Error::dim("policy depth does not match network depth"));
        }
        let mut h = x.clone();
        for (layer, mask) in self.layers.iter().zip(&policy.masks) {
            let pre = h
                .matmul(&layer.weight.transpose())?
                .add(&layer.bias.broadcast_rows(batch)?)?;
            let gated = pre.relu().mul(&mask.broadcast_rows(batch)?)?;
            h = if layer.residual { gated.add(&h)? } else { gated };
        }
        h.matmul(&self.head_w.transpose())?
            .add(&self.head_b.broadcast_rows(batch)?)
    }

    /// Mean cross-entropy of the batch under a policy.
    pub fn task_loss(&self, x: &Value, labels: &[usize], policy: &SubnetPolicy) -> Result<Value> {
        self.forward(x, policy)?.softmax_cross_entropy(labels)
    }

    /// Fraction of rows whose argmax logit matches the label.
    pub fn accuracy(&self, x: &Matrix, labels: &[usize], policy: &SubnetPolicy) -> Result<f64> {
        let logits = self.forward(&Value::constant(x.clone()), policy)?.data();
        if logits.rows() != labels.len() {
            return Err(Error::dim("label count does not match batch"));
        }
        let correct = labels
            .iter()
            .enumerate()
            .filter(|&(r, &l)| logits.argmax_row(r) == l)
            .count();
        Ok(correct as f64 / labels.len() as f64)
    }

    pub fn snapshot(&self) -> WeightSnapshot {
        self.params.snapshot()
    }

    /// Exact restore. A name or shape mismatch means the snapshot belongs
    /// to a different space; the error lists the differing names.
    pub fn restore(&self, snap: &WeightSnapshot) -> Result<()> {
        let mine: Vec<&str> = self.params.iter().map(|p| p.name.as_str()).collect();
        let missing: Vec<&str> = mine
            .iter()
            .copied()
            .filter(|n| !snap.contains_key(*n))
            .collect();
        let extra: Vec<&str> = snap
            .keys()
            .map(|s| s.as_str())
            .filter(|n| !mine.contains(n))
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::checkpoint(format!(
                "snapshot does not match network (missing {:?}, unexpected {:?})",
                missing, extra
            )));
        }
        self.params
            .restore(snap)
            .map_err(|e| Error::checkpoint(format!("restore failed: {}", e)))
    }

    /// Standalone subnet with physically sliced weights: the correctness
    /// oracle for entanglement. Only pure width choices are sliceable;
    /// skippable (residual) ops are out of the oracle's scope.
    pub fn slice_subnet(&self, choices: &[usize]) -> Result<SlicedNet> {
        if choices.len() != self.layers.len() {
            return Err(Error::dim("choice count does not match depth"));
        }
        let mut layers = Vec::with_capacity(choices.len());
        let mut in_width = self.input_dim;
        for (layer, &c) in self.layers.iter().zip(choices) {
            if layer.residual {
                return Err(Error::contract(
                    "slice oracle is defined for non-residual chains only",
                ));
            }
            let op = self.space.op(layer.op_index);
            if c >= op.n_candidates() {
                return Err(Error::Index(format!(
                    "choice {} out of range for op {}",
                    c, layer.op_index
                )));
            }
            let out_width = op.candidates[c];
            let w = layer.weight.data();
            let b = layer.bias.data();
            let mut sw = Matrix::zeros(out_width, in_width);
            for r in 0..out_width {
                for cc in 0..in_width {
                    sw.set(r, cc, w.get(r, cc));
                }
            }
            let sb: Vec<f64> = b.as_slice()[..out_width].to_vec();
            layers.push((sw, sb));
            in_width = out_width;
        }
        let hw = self.head_w.data();
        let hb = self.head_b.data();
        let mut shw = Matrix::zeros(self.n_classes, in_width);
        for r in 0..self.n_classes {
            for cc in 0..in_width {
                shw.set(r, cc, hw.get(r, cc));
            }
        }
        Ok(SlicedNet { layers, head_w: shw, head_b: hb.as_slice().to_vec() })
    }
}

/// A subnet materialized with its own (copied) weights; plain matrix math,
/// no masks, no autodiff.
pub struct SlicedNet {
    layers: Vec<(Matrix, Vec<f64>)>,
    head_w: Matrix,
    head_b: Vec<f64>,
}

impl SlicedNet {
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = x.clone();
        for (w, b) in &self.layers {
            let mut pre = h.matmul(&w.transpose())?;
            for r in 0..pre.rows() {
                for c in 0..pre.cols() {
                    pre.set(r, c, (pre.get(r, c) + b[c]).max(0.0));
                }
            }
            h = pre;
        }
        let mut out = h.matmul(&self.head_w.transpose())?;
        for r in 0..out.rows() {
            for c in 0..out.cols() {
                out.set(r, c, out.get(r, c) + self.head_b[c]);
            }
        }
        Ok(out)
    }
}

fn init_uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    scaled_uniform(rows, cols, 1.0 / (cols as f64).sqrt(), rng)
}

/// He-uniform: keeps activation variance roughly constant through a relu
/// stack. With the plain 1/sqrt(in) bound, six gated layers attenuate the
/// signal by ~6^depth and the head sees near-zero features.
fn init_relu(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    scaled_uniform(rows, cols, (6.0 / cols as f64).sqrt(), rng)
}

fn scaled_uniform(rows: usize, cols: usize, bound: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..m.len() {
        m.as_mut_slice()[i] = rng.gen_range(-bound..bound);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSet;
    use crate::space::{policy_from_choices, CandidateSet};

    fn toy_net() -> Supernet {
        let space = SearchSpace::toy();
        let mut rng = RngSet::fork(7, 0);
        Supernet::new(&space, 16, 4, &mut rng).unwrap()
    }

    fn batch(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..m.len() {
            m.as_mut_slice()[i] = rng.gen_range(-1.0..1.0);
        }
        m
    }

    #[test]
    fn full_width_equals_dense() {
        let net = toy_net();
        let mut rng = RngSet::fork(8, 0);
        let x = batch(&mut rng, 5, 16);
        let full = policy_from_choices(&net.space, &[2; 6]).unwrap();
        let masked = net.forward(&Value::constant(x.clone()), &full).unwrap().data();
        let sliced = net.slice_subnet(&[2; 6]).unwrap().forward(&x).unwrap();
        assert_eq!(masked, sliced);
    }

    #[test]
    fn masked_equals_sliced_mixed_widths() {
        let net = toy_net();
        let mut rng = RngSet::fork(9, 0);
        let x = batch(&mut rng, 4, 16);
        for choices in [[0, 1, 2, 1, 0, 2], [1, 1, 1, 1, 1, 1], [2, 0, 2, 0, 2, 0]] {
            let policy = policy_from_choices(&net.space, &choices).unwrap();
            let masked = net.forward(&Value::constant(x.clone()), &policy).unwrap().data();
            let sliced = net.slice_subnet(&choices).unwrap().forward(&x).unwrap();
            for i in 0..masked.len() {
                assert!((masked.as_slice()[i] - sliced.as_slice()[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn untrained_loss_is_near_uniform() {
        let net = toy_net();
        let mut rng = RngSet::fork(10, 0);
        let x = batch(&mut rng, 64, 16);
        let labels: Vec<usize> = (0..64).map(|i| i % 4).collect();
        let policy = policy_from_choices(&net.space, &[1; 6]).unwrap();
        let loss = net
            .task_loss(&Value::constant(x), &labels, &policy)
            .unwrap()
            .item();
        assert!((loss - 4.0_f64.ln()).abs() < 0.2, "loss {}", loss);
    }

    #[test]
    fn masked_out_weights_get_zero_grad() {
        let net = toy_net();
        let mut rng = RngSet::fork(11, 0);
        let x = batch(&mut rng, 8, 16);
        let labels: Vec<usize> = (0..8).map(|i| i % 4).collect();
        // smallest width everywhere: only the first 8 rows of layer0 active
        let policy = policy_from_choices(&net.space, &[0; 6]).unwrap();
        net.params().zero_grad();
        net.task_loss(&Value::constant(x), &labels, &policy)
            .unwrap()
            .backward()
            .unwrap();
        let g = net.layers()[0].weight.grad();
        for r in 8..24 {
            for c in 0..16 {
                assert_eq!(g.get(r, c), 0.0);
            }
        }
    }

    #[test]
    fn skip_block_is_bypassed() {
        // two ops; op 1 skippable with matching width 8
        let ops = vec![
            CandidateSet::unit_priced(0, vec![4, 8]).unwrap(),
            CandidateSet::new(1, vec![0, 8], vec![1.0; 8]).unwrap(),
        ];
        let space = SearchSpace::new(ops, "MACs").unwrap();
        let mut rng = RngSet::fork(12, 0);
        let net = Supernet::new(&space, 16, 3, &mut rng).unwrap();

        // reduced net: only op 0, with identical weights
        let reduced_space =
            SearchSpace::new(vec![CandidateSet::unit_priced(0, vec![4, 8]).unwrap()], "MACs")
                .unwrap();
        let mut rng2 = RngSet::fork(12, 0);
        let reduced = Supernet::new(&reduced_space, 16, 3, &mut rng2).unwrap();
        let mut snap = reduced.snapshot();
        let full_snap = net.snapshot();
        for (k, v) in snap.iter_mut() {
            *v = full_snap[k].clone();
        }
        reduced.restore(&snap).unwrap();

        let mut rng3 = RngSet::fork(13, 0);
        let x = batch(&mut rng3, 5, 16);
        let skipped = net
            .forward(
                &Value::constant(x.clone()),
                &policy_from_choices(&space, &[1, 0]).unwrap(),
            )
            .unwrap()
            .data();
        let bypassed = reduced
            .forward(
                &Value::constant(x),
                &policy_from_choices(&reduced_space, &[1]).unwrap(),
            )
            .unwrap()
            .data();
        assert_eq!(skipped, bypassed);
    }

    #[test]
    fn snapshot_restore_roundtrip_exact() {
        let net = toy_net();
        let mut rng = RngSet::fork(14, 0);
        let x = batch(&mut rng, 3, 16);
        let policy = policy_from_choices(&net.space, &[1; 6]).unwrap();
        let before = net.forward(&Value::constant(x.clone()), &policy).unwrap().data();
        let snap = net.snapshot();
        // perturb
        net.layers()[0].weight.update_data(|w| w.as_mut_slice()[0] += 1.0);
        net.restore(&snap).unwrap();
        let after = net.forward(&Value::constant(x), &policy).unwrap().data();
        assert_eq!(before, after);
    }

    #[test]
    fn restore_rejects_foreign_snapshot() {
        let net = toy_net();
        let mut snap = net.snapshot();
        snap.remove("head.bias");
        snap.insert("other.bias".into(), Matrix::zeros(1, 4));
        assert!(matches!(net.restore(&snap), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn shared_weight_grads_accumulate_across_subnets() {
        let net = toy_net();
        let mut rng = RngSet::fork(15, 0);
        let x = batch(&mut rng, 8, 16);
        let labels: Vec<usize> = (0..8).map(|i| i % 4).collect();
        let small = policy_from_choices(&net.space, &[0; 6]).unwrap();
        let large = policy_from_choices(&net.space, &[2; 6]).unwrap();

        net.params().zero_grad();
        net.task_loss(&Value::constant(x.clone()), &labels, &small)
            .unwrap()
            .backward()
            .unwrap();
        let g_small = net.layers()[0].weight.grad();

        net.params().zero_grad();
        net.task_loss(&Value::constant(x.clone()), &labels, &large)
            .unwrap()
            .backward()
            .unwrap();
        let g_large = net.layers()[0].weight.grad();

        // both subnets, grads accumulate without clearing
        net.params().zero_grad();
        net.task_loss(&Value::constant(x.clone()), &labels, &small)
            .unwrap()
            .backward()
            .unwrap();
        net.task_loss(&Value::constant(x), &labels, &large)
            .unwrap()
            .backward()
            .unwrap();
        let g_both = net.layers()[0].weight.grad();
        for i in 0..g_both.len() {
            let want = g_small.as_slice()[i] + g_large.as_slice()[i];
            assert!((g_both.as_slice()[i] - want).abs() < 1e-12);
        }
    }
}
