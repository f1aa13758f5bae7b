//! Shared helpers for the integration suites: randomized gradient-check
//! instances for every differentiable op, plus small training fixtures.

#![allow(dead_code)]

use archshift::autodiff::gradcheck::{gradcheck, CheckOpts, Report};
use archshift::autodiff::{Matrix, Value};
use archshift::data::{ingest, DataSource, DataSplit};
use archshift::generator::{gumbel_softmax, rc_loss_normalized};
use archshift::rng::RngSet;
use archshift::space::{assemble_policy, ResourceBinning, SearchSpace};
use archshift::Result;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng_for(name: &str, seed: u64) -> ChaCha8Rng {
    // cheap stable hash so each op family gets its own instance stream
    let tag = name.bytes().fold(0u64, |h, b| h.wrapping_mul(131).wrapping_add(b as u64));
    ChaCha8Rng::seed_from_u64(seed ^ tag)
}

pub fn rand_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..m.len() {
        m.as_mut_slice()[i] = rng.gen_range(lo..hi);
    }
    m
}

/// Values bounded away from zero, for ops with a kink there.
pub fn rand_mat_margin(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..m.len() {
        let mag = rng.gen_range(0.1..2.0);
        m.as_mut_slice()[i] = if rng.gen_bool(0.5) { mag } else { -mag };
    }
    m
}

/// Scalarize with distinct per-element weights so uniform-gradient bugs
/// can't hide behind sum().
fn weighted(v: &Value, weights: &Matrix) -> Result<Value> {
    Ok(v.mul(&Value::constant(weights.clone()))?.sum())
}

pub struct OpCheck {
    pub name: &'static str,
    pub run: fn(u64) -> Result<Report>,
}

/// One gradient-check instance per call, randomized by seed.
pub fn op_catalog() -> Vec<OpCheck> {
    fn opts() -> CheckOpts {
        CheckOpts::default()
    }

    fn matmul(seed: u64) -> Result<Report> {
        let mut rng = rng_for("matmul", seed);
        let a = rand_mat(&mut rng, 2, 3, -1.5, 1.5);
        let b = rand_mat(&mut rng, 3, 4, -1.5, 1.5);
        let w = rand_mat(&mut rng, 2, 4, -1.0, 1.0);
        gradcheck(&[a, b], |v| weighted(&v[0].matmul(&v[1])?, &w), opts())
    }

    fn add(seed: u64) -> Result<Report> {
        let mut rng = rng_for("add", seed);
        let a = rand_mat(&mut rng, 3, 3, -2.0, 2.0);
        let b = rand_mat(&mut rng, 3, 3, -2.0, 2.0);
        let w = rand_mat(&mut rng, 3, 3, -1.0, 1.0);
        gradcheck(&[a, b], |v| weighted(&v[0].add(&v[1])?, &w), opts())
    }

    fn mul(seed: u64) -> Result<Report> {
        let mut rng = rng_for("mul", seed);
        let a = rand_mat(&mut rng, 3, 2, -2.0, 2.0);
        let b = rand_mat(&mut rng, 3, 2, -2.0, 2.0);
        let w = rand_mat(&mut rng, 3, 2, -1.0, 1.0);
        gradcheck(&[a, b], |v| weighted(&v[0].mul(&v[1])?, &w), opts())
    }

    fn sub(seed: u64) -> Result<Report> {
        let mut rng = rng_for("sub", seed);
        let a = rand_mat(&mut rng, 2, 4, -2.0, 2.0);
        let b = rand_mat(&mut rng, 2, 4, -2.0, 2.0);
        let w = rand_mat(&mut rng, 2, 4, -1.0, 1.0);
        gradcheck(&[a, b], |v| weighted(&v[0].sub(&v[1])?, &w), opts())
    }

    fn transpose(seed: u64) -> Result<Report> {
        let mut rng = rng_for("transpose", seed);
        let a = rand_mat(&mut rng, 2, 5, -2.0, 2.0);
        let w = rand_mat(&mut rng, 5, 2, -1.0, 1.0);
        gradcheck(&[a], |v| weighted(&v[0].transpose(), &w), opts())
    }

    fn add_scalar(seed: u64) -> Result<Report> {
        let mut rng = rng_for("add_scalar", seed);
        let a = rand_mat(&mut rng, 2, 3, -2.0, 2.0);
        let c = rng.gen_range(-3.0..3.0);
        let w = rand_mat(&mut rng, 2, 3, -1.0, 1.0);
        gradcheck(&[a], |v| weighted(&v[0].add_scalar(c), &w), opts())
    }

    fn mul_scalar(seed: u64) -> Result<Report> {
        let mut rng = rng_for("mul_scalar", seed);
        let a = rand_mat(&mut rng, 2, 3, -2.0, 2.0);
        let c = rng.gen_range(-3.0..3.0);
        let w = rand_mat(&mut rng, 2, 3, -1.0, 1.0);
        gradcheck(&[a], |v| weighted(&v[0].mul_scalar(c), &w), opts())
    }

    fn relu(seed: u64) -> Result<Report> {
        let mut rng = rng_for("relu", seed);
        let a = rand_mat_margin(&mut rng, 3, 3);
        let w = rand_mat(&mut rng, 3, 3, -1.0, 1.0);
        gradcheck(&[a], |v| weighted(&v[0].relu(), &w), opts())
    }

    fn sigmoid(seed: u64) -> Result<Report> {
        let mut rng = rng_for("sigmoid", seed);
        let a = rand_mat(&mut rng, 3, 3, -3.0, 3.0);
        let w = rand_mat(&mut rng, 3, 3, -1.0, 1.0);
        gradcheck(&[a], |v| weighted(&v[0].sigmoid(), &w), opts())
    }

    fn tanh(seed: u64) -> Result<Report> {
        let mut rng = rng_for("tanh", seed);
        let a = rand_mat(&mut rng, 3, 3, -3.0, 3.0);
        let w = rand_mat(&mut rng, 3, 3, -1.0, 1.0);
        gradcheck(&[a], |v| weighted(&v[0].tanh(), &w), opts())
    }

    fn exp(seed: u64) -> Result<Report> {
        let mut rng = rng_for("exp", seed);
        let a = rand_mat(&mut rng, 2, 4, -1.0, 1.0);
        let w = rand_mat(&mut rng, 2, 4, -1.0, 1.0);
        gradcheck(&[a], |v| weighted(&v[0].exp()?, &w), opts())
    }

    fn log(seed: u64) -> Result<Report> {
        let mut rng = rng_for("log", seed);
        let a = rand_mat(&mut rng, 2, 4, 0.2, 3.0);
        let w = rand_mat(&mut rng, 2, 4, -1.0, 1.0);
        gradcheck(&[a], |v| weighted(&v[0].log()?, &w), opts())
    }

    fn square(seed: u64) -> Result<Report> {
        let mut rng = rng_for("square", seed);
        let a = rand_mat(&mut rng, 3, 2, -2.0, 2.0);
        let w = rand_mat(&mut rng, 3, 2, -1.0, 1.0);
        gradcheck(&[a], |v| weighted(&v[0].square(), &w), opts())
    }

    fn broadcast_rows(seed: u64) -> Result<Report> {
        let mut rng = rng_for("broadcast_rows", seed);
        let a = rand_mat(&mut rng, 1, 4, -2.0, 2.0);
        let w = rand_mat(&mut rng, 3, 4, -1.0, 1.0);
        gradcheck(&[a], |v| weighted(&v[0].broadcast_rows(3)?, &w), opts())
    }

    fn sum(seed: u64) -> Result<Report> {
        let mut rng = rng_for("sum", seed);
        let a = rand_mat(&mut rng, 3, 3, -2.0, 2.0);
        gradcheck(&[a], |v| Ok(v[0].square().sum()), opts())
    }

    fn mean(seed: u64) -> Result<Report> {
        let mut rng = rng_for("mean", seed);
        let a = rand_mat(&mut rng, 3, 3, -2.0, 2.0);
        gradcheck(&[a], |v| Ok(v[0].square().mean()), opts())
    }

    fn softmax_rows(seed: u64) -> Result<Report> {
        let mut rng = rng_for("softmax_rows", seed);
        let a = rand_mat(&mut rng, 2, 5, -3.0, 3.0);
        let w = rand_mat(&mut rng, 2, 5, -1.0, 1.0);
        gradcheck(&[a], |v| weighted(&v[0].softmax_rows(), &w), opts())
    }

    fn cross_entropy(seed: u64) -> Result<Report> {
        let mut rng = rng_for("cross_entropy", seed);
        let a = rand_mat(&mut rng, 4, 5, -3.0, 3.0);
        let labels: Vec<usize> = (0..4).map(|_| rng.gen_range(0..5)).collect();
        gradcheck(&[a], move |v| v[0].softmax_cross_entropy(&labels), opts())
    }

    fn dot_const(seed: u64) -> Result<Report> {
        let mut rng = rng_for("dot_const", seed);
        let a = rand_mat(&mut rng, 1, 6, -2.0, 2.0);
        let coeffs: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        gradcheck(&[a], move |v| Ok(v[0].dot_const(&coeffs)?.square()), opts())
    }

    fn gumbel_soft(seed: u64) -> Result<Report> {
        let mut rng = rng_for("gumbel_soft", seed);
        let logits = rand_mat(&mut rng, 1, 4, -2.0, 2.0);
        let noise: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let w = rand_mat(&mut rng, 1, 4, -1.0, 1.0);
        gradcheck(
            &[logits],
            move |v| weighted(&gumbel_softmax(&v[0], 1.0, &noise, false)?, &w),
            opts(),
        )
    }

    fn rc_soft_path(seed: u64) -> Result<Report> {
        let mut rng = rng_for("rc_soft_path", seed);
        let space = SearchSpace::toy();
        let binning = ResourceBinning::auto(&space).unwrap();
        let target = rng.gen_range(binning.lo..binning.hi);
        let logits: Vec<Matrix> = (0..space.depth())
            .map(|_| rand_mat(&mut rng, 1, 3, -2.0, 2.0))
            .collect();
        gradcheck(
            &logits,
            move |v| {
                let softs: Vec<Value> = v.iter().map(|l| l.softmax_rows()).collect();
                let policy = assemble_policy(&space, softs, false)?;
                Ok(rc_loss_normalized(&policy, target, &binning))
            },
            opts(),
        )
    }

    vec![
        OpCheck { name: "matmul", run: matmul },
        OpCheck { name: "add", run: add },
        OpCheck { name: "mul", run: mul },
        OpCheck { name: "sub", run: sub },
        OpCheck { name: "transpose", run: transpose },
        OpCheck { name: "add_scalar", run: add_scalar },
        OpCheck { name: "mul_scalar", run: mul_scalar },
        OpCheck { name: "relu", run: relu },
        OpCheck { name: "sigmoid", run: sigmoid },
        OpCheck { name: "tanh", run: tanh },
        OpCheck { name: "exp", run: exp },
        OpCheck { name: "log", run: log },
        OpCheck { name: "square", run: square },
        OpCheck { name: "broadcast_rows", run: broadcast_rows },
        OpCheck { name: "sum", run: sum },
        OpCheck { name: "mean", run: mean },
        OpCheck { name: "softmax_rows", run: softmax_rows },
        OpCheck { name: "cross_entropy", run: cross_entropy },
        OpCheck { name: "dot_const", run: dot_const },
        OpCheck { name: "gumbel_soft", run: gumbel_soft },
        OpCheck { name: "rc_soft_path", run: rc_soft_path },
    ]
}

/// The standard synthetic classification split used across suites.
pub fn blobs_split(seed: u64, n_samples: usize) -> DataSplit {
    let src = DataSource::SyntheticBlobs {
        n_samples,
        n_features: 16,
        n_classes: 4,
        separation: 0.55,
    };
    ingest(&src, 0.8, &mut RngSet::fork(seed, 1)).unwrap()
}
