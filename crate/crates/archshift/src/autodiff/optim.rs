//! Parameter registry and first-order optimizers.

use std::collections::HashMap;

use crate::error::{Error, Result};

use super::matrix::Matrix;
use super::value::Value;

/// A named trainable tensor. The name keys checkpoints and optimizer slots.
#[derive(Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Value,
}

impl Parameter {
    pub fn new(name: impl Into<String>, data: Matrix) -> Parameter {
        Parameter { name: name.into(), value: Value::leaf(data) }
    }
}

/// Ordered collection of parameters with unique names.
#[derive(Clone, Default)]
pub struct ParamSet {
    params: Vec<Parameter>,
}

impl ParamSet {
    pub fn new() -> ParamSet {
        ParamSet::default()
    }

    pub fn push(&mut self, p: Parameter) -> Result<()> {
        if self.params.iter().any(|q| q.name == p.name) {
            return Err(Error::contract(format!("duplicate parameter name {:?}", p.name)));
        }
        self.params.push(p);
        Ok(())
    }

    pub fn register(&mut self, name: impl Into<String>, data: Matrix) -> Result<Value> {
        let p = Parameter::new(name, data);
        let v = p.value.clone();
        self.push(p)?;
        Ok(v)
    }

    /// Absorb another set, prefixing its names (scoped submodules).
    pub fn extend_scoped(&mut self, prefix: &str, other: ParamSet) -> Result<()> {
        for mut p in other.params {
            p.name = format!("{}.{}", prefix, p.name);
            self.push(p)?;
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Parameter> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn zero_grad(&self) {
        for p in &self.params {
            p.value.zero_grad();
        }
    }

    /// Copy of every parameter's data, keyed by name.
    pub fn snapshot(&self) -> HashMap<String, Matrix> {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.value.data()))
            .collect()
    }

    /// Load data back from a snapshot. Every parameter must be present with
    /// a matching shape; extra snapshot entries are rejected.
    pub fn restore(&self, snap: &HashMap<String, Matrix>) -> Result<()> {
        if snap.len() != self.params.len() {
            return Err(Error::contract(format!(
                "snapshot has {} tensors, model has {}",
                snap.len(),
                self.params.len()
            )));
        }
        for p in &self.params {
            let m = snap
                .get(&p.name)
                .ok_or_else(|| Error::contract(format!("snapshot missing {:?}", p.name)))?;
            p.value.set_data(m.clone())?;
        }
        Ok(())
    }
}

/// Plain gradient descent. A parameter with no accumulated gradient is
/// treated as having a zero gradient and left unchanged.
pub struct Sgd {
    pub lr: f64,
}

impl Sgd {
    pub fn new(lr: f64) -> Sgd {
        Sgd { lr }
    }

    pub fn step(&mut self, params: &ParamSet) -> Result<()> {
        for p in params.iter() {
            if !p.value.has_grad() {
                continue;
            }
            let g = p.value.grad();
            if !g.all_finite() {
                return Err(Error::NumericDomain(format!(
                    "non-finite gradient for {:?}",
                    p.name
                )));
            }
            let lr = self.lr;
            p.value.update_data(|d| d.add_assign_scaled(&g, -lr));
        }
        Ok(())
    }
}

/// Adam with bias correction. Moment slots are keyed by parameter name so
/// they survive checkpoint round-trips.
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    slots: HashMap<String, (Matrix, Matrix)>,
}

impl Adam {
    pub fn new(lr: f64) -> Adam {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, slots: HashMap::new() }
    }

    pub fn step(&mut self, params: &ParamSet) -> Result<()> {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for p in params.iter() {
            if !p.value.has_grad() {
                continue;
            }
            let g = p.value.grad();
            if !g.all_finite() {
                return Err(Error::NumericDomain(format!(
                    "non-finite gradient for {:?}",
                    p.name
                )));
            }
            let (rows, cols) = g.shape();
            let (m, v) = self
                .slots
                .entry(p.name.clone())
                .or_insert_with(|| (Matrix::zeros(rows, cols), Matrix::zeros(rows, cols)));
            if m.shape() != g.shape() {
                return Err(Error::contract(format!(
                    "optimizer slot shape mismatch for {:?}",
                    p.name
                )));
            }
            for i in 0..g.len() {
                let gi = g.as_slice()[i];
                let mi = self.beta1 * m.as_slice()[i] + (1.0 - self.beta1) * gi;
                let vi = self.beta2 * v.as_slice()[i] + (1.0 - self.beta2) * gi * gi;
                m.as_mut_slice()[i] = mi;
                v.as_mut_slice()[i] = vi;
            }
            let (lr, eps) = (self.lr, self.eps);
            let (ms, vs) = (m.as_slice().to_vec(), v.as_slice().to_vec());
            p.value.update_data(|d| {
                for i in 0..d.len() {
                    let mhat = ms[i] / bc1;
                    let vhat = vs[i] / bc2;
                    d.as_mut_slice()[i] -= lr * mhat / (vhat.sqrt() + eps);
                }
            });
        }
        Ok(())
    }

    /// Serialized view of the moment slots (for checkpoints).
    pub fn export_slots(&self) -> Vec<(String, Matrix, Matrix)> {
        let mut out: Vec<_> = self
            .slots
            .iter()
            .map(|(k, (m, v))| (k.clone(), m.clone(), v.clone()))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    pub fn import_slots(&mut self, t: u64, slots: Vec<(String, Matrix, Matrix)>) {
        self.t = t;
        self.slots = slots.into_iter().map(|(k, m, v)| (k, (m, v))).collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut ps = ParamSet::new();
        ps.register("w", Matrix::scalar(1.0)).unwrap();
        assert!(ps.register("w", Matrix::scalar(2.0)).is_err());
    }

    #[test]
    fn sgd_step_moves_against_gradient() {
        let mut ps = ParamSet::new();
        let w = ps.register("w", Matrix::scalar(5.0)).unwrap();
        // loss = w^2, grad = 10 at w = 5
        w.square().backward().unwrap();
        Sgd::new(0.1).step(&ps).unwrap();
        assert!((w.item() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sgd_skips_gradless_params() {
        let mut ps = ParamSet::new();
        let w = ps.register("w", Matrix::scalar(5.0)).unwrap();
        Sgd::new(0.1).step(&ps).unwrap();
        assert_eq!(w.item(), 5.0);
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        // With bias correction, the first Adam step is lr * g/(|g| + eps').
        let mut ps = ParamSet::new();
        let w = ps.register("w", Matrix::scalar(3.0)).unwrap();
        w.square().backward().unwrap();
        let mut opt = Adam::new(1e-3);
        opt.step(&ps).unwrap();
        assert!((w.item() - (3.0 - 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn adam_slots_roundtrip() {
        let mut ps = ParamSet::new();
        let w = ps.register("w", Matrix::scalar(3.0)).unwrap();
        w.square().backward().unwrap();
        let mut opt = Adam::new(1e-3);
        opt.step(&ps).unwrap();
        let exported = opt.export_slots();
        let mut other = Adam::new(1e-3);
        other.import_slots(opt.t, exported);
        assert_eq!(other.t, 1);
        assert_eq!(other.export_slots().len(), 1);
    }

    #[test]
    fn snapshot_restore_roundtrip() {
        let mut ps = ParamSet::new();
        let w = ps.register("w", Matrix::row(&[1.0, 2.0])).unwrap();
        let snap = ps.snapshot();
        w.set_data(Matrix::row(&[9.0, 9.0])).unwrap();
        ps.restore(&snap).unwrap();
        assert_eq!(w.data(), Matrix::row(&[1.0, 2.0]));
    }
}
