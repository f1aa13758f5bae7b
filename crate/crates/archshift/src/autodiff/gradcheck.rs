//! Central finite-difference verification of reverse-mode gradients.
//!
//! A check builds a scalar root from leaf matrices, runs backward once for
//! the analytic gradients, then perturbs every input element by ±h and
//! compares. Relative error uses the larger of the two magnitudes as the
//! scale; when both are below `zero_band` the element counts as matching
//! (finite differences of a flat function are pure noise).

use super::matrix::Matrix;
use super::value::Value;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct CheckOpts {
    /// Central-difference step.
    pub h: f64,
    /// Magnitudes below this on both sides compare as equal.
    pub zero_band: f64,
}

impl Default for CheckOpts {
    fn default() -> Self {
        CheckOpts { h: 1e-5, zero_band: 1e-7 }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Report {
    pub max_rel_err: f64,
    pub elements: usize,
}

/// Compare analytic and numeric gradients of `build` at `inputs`.
///
/// `build` must be a pure function of its argument values: called many
/// times, once with gradient-tracking leaves and twice per element with
/// perturbed constants.
pub fn gradcheck<F>(inputs: &[Matrix], mut build: F, opts: CheckOpts) -> Result<Report>
where
    F: FnMut(&[Value]) -> Result<Value>,
{
    if inputs.is_empty() {
        return Err(Error::contract("gradcheck needs at least one input"));
    }
    let leaves: Vec<Value> = inputs.iter().map(|m| Value::leaf(m.clone())).collect();
    let root = build(&leaves)?;
    if !root.data().is_scalar() {
        return Err(Error::contract("gradcheck root must be scalar"));
    }
    root.backward()?;
    let analytic: Vec<Matrix> = leaves.iter().map(|l| l.grad()).collect();

    let eval = |mats: &[Matrix], build: &mut F| -> Result<f64> {
        let consts: Vec<Value> = mats.iter().map(|m| Value::constant(m.clone())).collect();
        Ok(build(&consts)?.item())
    };

    let mut report = Report::default();
    let mut work: Vec<Matrix> = inputs.to_vec();
    for i in 0..inputs.len() {
        for j in 0..inputs[i].len() {
            let orig = work[i].as_slice()[j];
            work[i].as_mut_slice()[j] = orig + opts.h;
            let up = eval(&work, &mut build)?;
            work[i].as_mut_slice()[j] = orig - opts.h;
            let down = eval(&work, &mut build)?;
            work[i].as_mut_slice()[j] = orig;

            let numeric = (up - down) / (2.0 * opts.h);
            let exact = analytic[i].as_slice()[j];
            if !numeric.is_finite() {
                return Err(Error::NumericDomain(format!(
                    "finite difference diverged at input {} element {}",
                    i, j
                )));
            }
            let scale = exact.abs().max(numeric.abs());
            let rel = if scale < opts.zero_band {
                0.0
            } else {
                // relative above magnitude 1, absolute below: a dropped
                // term or wrong factor still shows up at either scale
                (exact - numeric).abs() / scale.max(1.0)
            };
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
            }
            report.elements += 1;
        }
    }
    Ok(report)
}
