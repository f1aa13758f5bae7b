//! Test statistics shared by the diagnostic commands and the test suite.

use crate::error::{Error, Result};

/// Pearson chi-square statistic of observed counts against expected
/// probabilities. Caller compares against a critical value for k-1 df.
pub fn chi_square(counts: &[u64], expected_probs: &[f64]) -> Result<f64> {
    if counts.len() != expected_probs.len() || counts.len() < 2 {
        return Err(Error::contract("chi_square needs >= 2 matching cells"));
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::contract("chi_square on zero observations"));
    }
    let mut stat = 0.0;
    for (&c, &p) in counts.iter().zip(expected_probs) {
        let e = p * n as f64;
        if e <= 0.0 {
            if c > 0 {
                return Err(Error::contract("observation in a zero-probability cell"));
            }
            continue;
        }
        let d = c as f64 - e;
        stat += d * d / e;
    }
    Ok(stat)
}

/// Upper 1% critical values of the chi-square distribution, indexed by
/// degrees of freedom. Hard-coded for the dfs this crate tests at.
pub fn chi_square_crit_1pct(df: usize) -> Option<f64> {
    match df {
        1 => Some(6.635),
        2 => Some(9.210),
        3 => Some(11.345),
        7 => Some(18.475),
        _ => None,
    }
}

/// Standard error function, Abramowitz & Stegun 7.1.26 polynomial.
/// Absolute error below 1.5e-7, far inside every tolerance in this crate.
pub fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    sign * y
}

/// CDF of the normal distribution with the given mean and standard deviation.
pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * (1.0 + erf((x - mean) / (sd * std::f64::consts::SQRT_2)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_exact_fit_is_zero() {
        let stat = chi_square(&[25, 25, 25, 25], &[0.25; 4]).unwrap();
        assert_eq!(stat, 0.0);
    }

    #[test]
    fn chi_square_detects_skew() {
        let stat = chi_square(&[100, 0], &[0.5, 0.5]).unwrap();
        assert!(stat > chi_square_crit_1pct(1).unwrap());
    }

    #[test]
    fn erf_reference_points() {
        assert!(erf(0.0).abs() < 2e-9);
        assert!((erf(1.0) - 0.8427007929).abs() < 2e-7);
        assert!((erf(-1.0) + 0.8427007929).abs() < 2e-7);
        assert!((erf(3.0) - 0.9999779095).abs() < 2e-7);
    }

    #[test]
    fn normal_cdf_symmetry() {
        let c = normal_cdf(1.5, 0.0, 1.0);
        let d = normal_cdf(-1.5, 0.0, 1.0);
        assert!((c + d - 1.0).abs() < 1e-12);
    }
}
