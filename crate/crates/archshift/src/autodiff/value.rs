//! Reverse-mode automatic differentiation over [`Matrix`] values.
//!
//! A [`Value`] is a shared handle to a node in an acyclic computation graph.
//! Operations record their parents; [`Value::backward`] walks the graph once
//! in reverse topological order and accumulates gradients additively into
//! every reachable node that requires them. Gradients persist until cleared,
//! so repeated backward calls sum their contributions.
//!
//! The graph is single-threaded by construction (`Rc`); read-only snapshots
//! of parameter data may be copied out and shared freely.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use crate::error::{Error, Result};

use super::matrix::Matrix;

#[derive(Clone)]
pub struct Value {
    inner: Rc<RefCell<Node>>,
}

struct Node {
    data: Matrix,
    grad: Option<Matrix>,
    requires_grad: bool,
    parents: Vec<Value>,
    op: Op,
}

/// Backward rule attached to a node. Cached forward results live inline
/// where the rule needs them.
enum Op {
    Leaf,
    Matmul,
    Add,
    Mul,
    Transpose,
    AddScalar,
    MulScalar(f64),
    Relu,
    /// Backward uses the cached output y: dy/dx = y(1-y).
    Sigmoid,
    /// Backward uses the cached output y: dy/dx = 1-y^2.
    Tanh,
    Exp,
    Log,
    Square,
    /// 1xn parent repeated over `rows` rows; backward column-sums.
    BroadcastRows,
    Sum,
    Mean,
    /// Row-wise softmax; backward uses the cached output.
    SoftmaxRows,
    /// Mean cross-entropy over the batch. Caches softmax probabilities.
    CrossEntropyMean { probs: Matrix, labels: Vec<usize> },
    /// Forward is a hard one-hot; backward is the identity (gradient of the
    /// soft parent sample).
    StraightThrough,
}

impl Value {
    fn new(data: Matrix, requires_grad: bool, parents: Vec<Value>, op: Op) -> Value {
        Value {
            inner: Rc::new(RefCell::new(Node { data, grad: None, requires_grad, parents, op })),
        }
    }

    /// Constant leaf: participates in forward math, receives no gradient.
    pub fn constant(data: Matrix) -> Value {
        Value::new(data, false, Vec::new(), Op::Leaf)
    }

    /// Trainable leaf.
    pub fn leaf(data: Matrix) -> Value {
        Value::new(data, true, Vec::new(), Op::Leaf)
    }

    pub fn scalar(x: f64) -> Value {
        Value::constant(Matrix::scalar(x))
    }

    pub fn data(&self) -> Matrix {
        self.inner.borrow().data.clone()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.inner.borrow().data.shape()
    }

    pub fn item(&self) -> f64 {
        self.inner.borrow().data.item()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.borrow().requires_grad
    }

    /// Materialized gradient, or zeros of the data shape when untouched.
    pub fn grad(&self) -> Matrix {
        let node = self.inner.borrow();
        match &node.grad {
            Some(g) => g.clone(),
            None => Matrix::zeros(node.data.rows(), node.data.cols()),
        }
    }

    pub fn has_grad(&self) -> bool {
        self.inner.borrow().grad.is_some()
    }

    pub fn zero_grad(&self) {
        self.inner.borrow_mut().grad = None;
    }

    /// Overwrite the gradient buffer (optimizer-facing; shape must match).
    pub fn set_grad(&self, g: Matrix) -> Result<()> {
        let mut node = self.inner.borrow_mut();
        if g.shape() != node.data.shape() {
            return Err(Error::dim("set_grad: gradient shape differs from data"));
        }
        node.grad = Some(g);
        Ok(())
    }

    /// Replace the stored data in place (optimizer / snapshot-restore facing).
    pub fn set_data(&self, data: Matrix) -> Result<()> {
        let mut node = self.inner.borrow_mut();
        if data.shape() != node.data.shape() {
            return Err(Error::dim("set_data: shape change is not allowed"));
        }
        node.data = data;
        Ok(())
    }

    pub fn update_data(&self, f: impl FnOnce(&mut Matrix)) {
        f(&mut self.inner.borrow_mut().data)
    }

    fn key(&self) -> usize {
        Rc::as_ptr(&self.inner) as usize
    }

    fn unary(&self, data: Matrix, op: Op) -> Value {
        let rg = self.requires_grad();
        Value::new(data, rg, vec![self.clone()], op)
    }

    fn binary(&self, other: &Value, data: Matrix, op: Op) -> Value {
        let rg = self.requires_grad() || other.requires_grad();
        Value::new(data, rg, vec![self.clone(), other.clone()], op)
    }

    // ---- operations ------------------------------------------------------

    pub fn matmul(&self, other: &Value) -> Result<Value> {
        let data = self.inner.borrow().data.matmul(&other.inner.borrow().data)?;
        Ok(self.binary(other, data, Op::Matmul))
    }

    pub fn add(&self, other: &Value) -> Result<Value> {
        let data = self
            .inner
            .borrow()
            .data
            .zip_map(&other.inner.borrow().data, |a, b| a + b)?;
        Ok(self.binary(other, data, Op::Add))
    }

    pub fn mul(&self, other: &Value) -> Result<Value> {
        let data = self
            .inner
            .borrow()
            .data
            .zip_map(&other.inner.borrow().data, |a, b| a * b)?;
        Ok(self.binary(other, data, Op::Mul))
    }

    /// Scalar-with-array broadcast add.
    pub fn add_scalar(&self, c: f64) -> Value {
        let data = self.inner.borrow().data.map(|x| x + c);
        self.unary(data, Op::AddScalar)
    }

    /// Scalar-with-array broadcast multiply.
    pub fn mul_scalar(&self, c: f64) -> Value {
        let data = self.inner.borrow().data.map(|x| x * c);
        self.unary(data, Op::MulScalar(c))
    }

    pub fn sub(&self, other: &Value) -> Result<Value> {
        self.add(&other.mul_scalar(-1.0))
    }

    pub fn transpose(&self) -> Value {
        let data = self.inner.borrow().data.transpose();
        self.unary(data, Op::Transpose)
    }

    pub fn relu(&self) -> Value {
        let data = self.inner.borrow().data.map(|x| x.max(0.0));
        self.unary(data, Op::Relu)
    }

    pub fn sigmoid(&self) -> Value {
        let data = self.inner.borrow().data.map(|x| 1.0 / (1.0 + (-x).exp()));
        self.unary(data, Op::Sigmoid)
    }

    pub fn tanh(&self) -> Value {
        let data = self.inner.borrow().data.map(|x| x.tanh());
        self.unary(data, Op::Tanh)
    }

    pub fn exp(&self) -> Result<Value> {
        let data = self.inner.borrow().data.map(|x| x.exp());
        if !data.all_finite() {
            return Err(Error::NumericDomain("exp overflowed to non-finite".into()));
        }
        Ok(self.unary(data, Op::Exp))
    }

    pub fn log(&self) -> Result<Value> {
        let data = self.inner.borrow().data.map(|x| x.ln());
        if !data.all_finite() {
            return Err(Error::NumericDomain("log of a non-positive value".into()));
        }
        Ok(self.unary(data, Op::Log))
    }

    pub fn square(&self) -> Value {
        let data = self.inner.borrow().data.map(|x| x * x);
        self.unary(data, Op::Square)
    }

    /// Repeat a 1xn row vector over `rows` rows (bias and mask broadcasting).
    pub fn broadcast_rows(&self, rows: usize) -> Result<Value> {
        let node = self.inner.borrow();
        if node.data.rows() != 1 {
            return Err(Error::dim("broadcast_rows expects a 1xn row vector"));
        }
        let data = node.data.tile_rows(rows);
        drop(node);
        Ok(self.unary(data, Op::BroadcastRows))
    }

    /// Sum of all entries, as a 1x1 value.
    pub fn sum(&self) -> Value {
        let data = Matrix::scalar(self.inner.borrow().data.sum());
        self.unary(data, Op::Sum)
    }

    /// Mean of all entries, as a 1x1 value.
    pub fn mean(&self) -> Value {
        let node = self.inner.borrow();
        let n = node.data.len() as f64;
        let data = Matrix::scalar(node.data.sum() / n);
        drop(node);
        self.unary(data, Op::Mean)
    }

    /// Row-wise softmax. Shift-by-max keeps the exponentials finite.
    pub fn softmax_rows(&self) -> Value {
        let node = self.inner.borrow();
        let data = softmax_matrix(&node.data);
        drop(node);
        self.unary(data, Op::SoftmaxRows)
    }

    /// Mean of -log softmax(logits)[label] over the batch. `logits` is
    /// [batch x classes]; one label per row.
    pub fn softmax_cross_entropy(&self, labels: &[usize]) -> Result<Value> {
        let node = self.inner.borrow();
        let (rows, cols) = node.data.shape();
        if labels.len() != rows {
            return Err(Error::dim(format!(
                "{} labels for a batch of {}",
                labels.len(),
                rows
            )));
        }
        for (i, &l) in labels.iter().enumerate() {
            if l >= cols {
                return Err(Error::Index(format!(
                    "label {} at row {} out of range for {} classes",
                    l, i, cols
                )));
            }
        }
        let probs = softmax_matrix(&node.data);
        let mut total = 0.0;
        for (r, &l) in labels.iter().enumerate() {
            // log-sum-exp form: -log p = logsumexp(z) - z[label]
            let row = node.data.row_slice(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
            total += lse - row[l];
        }
        let data = Matrix::scalar(total / rows as f64);
        drop(node);
        Ok(self.unary(data, Op::CrossEntropyMean { probs, labels: labels.to_vec() }))
    }

    /// Discretize a soft 1xn sample to the one-hot of its argmax while
    /// keeping the soft sample's gradient (straight-through estimator).
    pub fn straight_through(&self) -> Result<Value> {
        let node = self.inner.borrow();
        if node.data.rows() != 1 {
            return Err(Error::dim("straight_through expects a 1xn row vector"));
        }
        let idx = node.data.argmax_row(0);
        let mut data = Matrix::zeros(1, node.data.cols());
        data.set(0, idx, 1.0);
        drop(node);
        Ok(self.unary(data, Op::StraightThrough))
    }

    /// Dot product with a constant coefficient row (shapes 1xn).
    pub fn dot_const(&self, coeffs: &[f64]) -> Result<Value> {
        let c = Value::constant(Matrix::row(coeffs));
        self.mul(&c).map(|v| v.sum())
    }

    // ---- backward --------------------------------------------------------

    /// Reverse-mode sweep from a scalar root. Every reachable node with
    /// `requires_grad` accumulates its gradient additively; the caller clears
    /// gradients between steps.
    pub fn backward(&self) -> Result<()> {
        if !self.inner.borrow().data.is_scalar() {
            return Err(Error::contract("backward root must be a scalar"));
        }
        if !self.requires_grad() {
            return Ok(());
        }

        // Iterative post-order DFS over parent edges: producers end up before
        // consumers, so the reversed list is a valid propagation order.
        let mut order: Vec<Value> = Vec::new();
        let mut visited: HashMap<usize, ()> = HashMap::new();
        let mut stack: Vec<(Value, bool)> = vec![(self.clone(), false)];
        while let Some((v, expanded)) = stack.pop() {
            if expanded {
                order.push(v);
                continue;
            }
            if visited.contains_key(&v.key()) {
                continue;
            }
            visited.insert(v.key(), ());
            stack.push((v.clone(), true));
            let node = v.inner.borrow();
            for p in &node.parents {
                if p.requires_grad() && !visited.contains_key(&p.key()) {
                    stack.push((p.clone(), false));
                }
            }
        }

        // Per-call gradient buffers; folded into node grads at the end so a
        // second backward call adds another full contribution.
        let mut buf: HashMap<usize, Matrix> = HashMap::new();
        buf.insert(self.key(), Matrix::scalar(1.0));

        for v in order.iter().rev() {
            let g = match buf.get(&v.key()) {
                Some(g) => g.clone(),
                None => continue,
            };
            let node = v.inner.borrow();
            let mut send = |parent: &Value, contribution: Matrix| {
                if !parent.requires_grad() {
                    return;
                }
                buf.entry(parent.key())
                    .and_modify(|acc| acc.add_assign_scaled(&contribution, 1.0))
                    .or_insert(contribution);
            };
            match &node.op {
                Op::Leaf => {}
                Op::Matmul => {
                    let a = &node.parents[0];
                    let b = &node.parents[1];
                    let bd = b.inner.borrow().data.clone();
                    let ad = a.inner.borrow().data.clone();
                    send(a, g.matmul(&bd.transpose())?);
                    send(b, ad.transpose().matmul(&g)?);
                }
                Op::Add => {
                    send(&node.parents[0], g.clone());
                    send(&node.parents[1], g);
                }
                Op::Mul => {
                    let a = &node.parents[0];
                    let b = &node.parents[1];
                    let bd = b.inner.borrow().data.clone();
                    let ad = a.inner.borrow().data.clone();
                    send(a, g.zip_map(&bd, |x, y| x * y)?);
                    send(b, g.zip_map(&ad, |x, y| x * y)?);
                }
                Op::Transpose => send(&node.parents[0], g.transpose()),
                Op::AddScalar => send(&node.parents[0], g),
                Op::MulScalar(c) => send(&node.parents[0], g.map(|x| x * c)),
                Op::Relu => {
                    let x = node.parents[0].inner.borrow().data.clone();
                    send(&node.parents[0], g.zip_map(&x, |gi, xi| if xi > 0.0 { gi } else { 0.0 })?);
                }
                Op::Sigmoid => {
                    let y = &node.data;
                    send(&node.parents[0], g.zip_map(y, |gi, yi| gi * yi * (1.0 - yi))?);
                }
                Op::Tanh => {
                    let y = &node.data;
                    send(&node.parents[0], g.zip_map(y, |gi, yi| gi * (1.0 - yi * yi))?);
                }
                Op::Exp => {
                    let y = &node.data;
                    send(&node.parents[0], g.zip_map(y, |gi, yi| gi * yi)?);
                }
                Op::Log => {
                    let x = node.parents[0].inner.borrow().data.clone();
                    send(&node.parents[0], g.zip_map(&x, |gi, xi| gi / xi)?);
                }
                Op::Square => {
                    let x = node.parents[0].inner.borrow().data.clone();
                    send(&node.parents[0], g.zip_map(&x, |gi, xi| gi * 2.0 * xi)?);
                }
                Op::BroadcastRows => send(&node.parents[0], g.col_sums()),
                Op::Sum => {
                    let p = &node.parents[0];
                    let (r, c) = p.shape();
                    send(p, Matrix::filled(r, c, g.item()));
                }
                Op::Mean => {
                    let p = &node.parents[0];
                    let (r, c) = p.shape();
                    let n = (r * c) as f64;
                    send(p, Matrix::filled(r, c, g.item() / n));
                }
                Op::SoftmaxRows => {
                    let y = &node.data;
                    let mut dx = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let yr = y.row_slice(r);
                        let gr = g.row_slice(r);
                        let inner: f64 = yr.iter().zip(gr).map(|(&yi, &gi)| yi * gi).sum();
                        for c in 0..y.cols() {
                            dx.set(r, c, yr[c] * (gr[c] - inner));
                        }
                    }
                    send(&node.parents[0], dx);
                }
                Op::CrossEntropyMean { probs, labels } => {
                    let scale = g.item() / labels.len() as f64;
                    let mut dx = probs.map(|p| p * scale);
                    for (r, &l) in labels.iter().enumerate() {
                        dx.set(r, l, dx.get(r, l) - scale);
                    }
                    send(&node.parents[0], dx);
                }
                Op::StraightThrough => send(&node.parents[0], g),
            }
        }

        for v in &order {
            if !v.requires_grad() {
                continue;
            }
            if let Some(g) = buf.remove(&v.key()) {
                let mut node = v.inner.borrow_mut();
                match &mut node.grad {
                    Some(acc) => acc.add_assign_scaled(&g, 1.0),
                    None => node.grad = Some(g),
                }
            }
        }
        Ok(())
    }
}

fn softmax_matrix(z: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(z.rows(), z.cols());
    for r in 0..z.rows() {
        let row = z.row_slice(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for &x in row {
            denom += (x - max).exp();
        }
        for c in 0..z.cols() {
            out.set(r, c, (row[c] - max).exp() / denom);
        }
    }
    out
}
