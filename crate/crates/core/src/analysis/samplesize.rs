//! Single-group sample size for testing a cure rate against an unacceptable one.

use serde::{Deserialize, Serialize};

use crate::num::{binom_cdf, normal_quantile, BinomialParams};
use crate::{Error, Result};

const MAX_N: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeReport {
    pub target: f64,
    pub unacceptable: f64,
    pub power: f64,
    pub alpha: f64,
    pub ltfu: f64,
    /// Smallest evaluable n whose exact test reaches the power.
    pub exact_first: u64,
    /// Smallest n from which every larger n also reaches the power
    /// (exact power saw-tooths in n).
    pub exact_stable: u64,
    /// Normal-approximation n.
    pub normal_approx: u64,
    pub exact_first_inflated: u64,
    pub exact_stable_inflated: u64,
    pub normal_approx_inflated: u64,
    /// Recommended size: `exact_stable_inflated`.
    pub n: u64,
}

/// Rejection threshold and power of the exact one-sided test of
/// `H0: p = target` against lower cure rates: reject when the number cured is
/// at most `c`, the largest `c` with `P(X <= c | target) <= alpha`.
/// Returns `None` when no such `c` exists.
pub fn exact_power(n: u64, target: f64, unacceptable: f64, alpha: f64) -> Result<Option<(u64, f64)>> {
    let h0 = BinomialParams::new(n, target)?;
    let h1 = BinomialParams::new(n, unacceptable)?;
    // binomial cdf is increasing in c: walk up from 0
    let mut c = None;
    for k in 0..=n {
        if binom_cdf(h0, k)? <= alpha {
            c = Some(k);
        } else {
            break;
        }
    }
    match c {
        None => Ok(None),
        Some(c) => Ok(Some((c, binom_cdf(h1, c)?))),
    }
}

fn inflate(n: u64, ltfu: f64) -> u64 {
    // tolerance keeps exact multiples from rounding up through float error
    ((n as f64 / (1.0 - ltfu)) - 1e-9).ceil() as u64
}

pub fn single_group_sample_size(
    target: f64,
    unacceptable: f64,
    power: f64,
    alpha: f64,
    ltfu: f64,
) -> Result<SampleSizeReport> {
    for (name, v) in [("target", target), ("unacceptable", unacceptable), ("power", power), ("alpha", alpha)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Validation(format!("{name} = {v} must lie in (0, 1)")));
        }
    }
    if !(0.0..1.0).contains(&ltfu) {
        return Err(Error::Validation(format!("ltfu = {ltfu} must lie in [0, 1)")));
    }
    if unacceptable >= target {
        return Err(Error::Validation("unacceptable cure rate must be below the target".into()));
    }

    let reaches =
        |n: u64| -> Result<bool> { Ok(exact_power(n, target, unacceptable, alpha)?.is_some_and(|(_, p)| p >= power)) };
    let mut exact_first = None;
    let mut n = 1;
    while n <= MAX_N {
        if reaches(n)? {
            exact_first = Some(n);
            break;
        }
        n += 1;
    }
    let exact_first = exact_first.ok_or_else(|| Error::Convergence(format!("power not reached by n = {MAX_N}")))?;

    // power oscillates but its troughs rise; once a run of 2 * first
    // consecutive passes is seen the last failure marks the stable point
    let mut last_fail = exact_first - 1;
    let mut run = 0;
    let mut m = exact_first;
    while run < 2 * exact_first && m <= MAX_N {
        if reaches(m)? {
            run += 1;
        } else {
            last_fail = m;
            run = 0;
        }
        m += 1;
    }
    let exact_stable = (last_fail + 1).max(exact_first);

    let (za, zb) = (normal_quantile(1.0 - alpha), normal_quantile(power));
    let root = za * (target * (1.0 - target)).sqrt() + zb * (unacceptable * (1.0 - unacceptable)).sqrt();
    let normal_approx = ((root / (target - unacceptable)).powi(2) - 1e-9).ceil() as u64;

    let exact_stable_inflated = inflate(exact_stable, ltfu);
    Ok(SampleSizeReport {
        target,
        unacceptable,
        power,
        alpha,
        ltfu,
        exact_first,
        exact_stable,
        normal_approx,
        exact_first_inflated: inflate(exact_first, ltfu),
        exact_stable_inflated,
        normal_approx_inflated: inflate(normal_approx, ltfu),
        n: exact_stable_inflated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_values() {
        let r = single_group_sample_size(0.9, 0.7, 0.9, 0.05, 0.05).unwrap();
        assert_eq!(r.n, 39);
        assert_eq!((r.exact_first, r.exact_stable, r.normal_approx), (33, 37, 30));
        assert_eq!((r.exact_first_inflated, r.normal_approx_inflated), (35, 32));
        let plain = single_group_sample_size(0.9, 0.7, 0.9, 0.05, 0.0).unwrap();
        assert_eq!(plain.n, r.exact_stable);
    }

    #[test]
    fn exact_test_size() {
        for n in [10, 33, 37, 100] {
            let (c, _) = exact_power(n, 0.9, 0.7, 0.05).unwrap().unwrap();
            let h0 = BinomialParams::new(n, 0.9).unwrap();
            assert!(binom_cdf(h0, c).unwrap() <= 0.05);
            assert!(binom_cdf(h0, c + 1).unwrap() > 0.05);
        }
        assert!(exact_power(1, 0.9, 0.7, 0.05).unwrap().is_none());
    }

    #[test]
    fn monotone_in_power() {
        let a = single_group_sample_size(0.9, 0.7, 0.9, 0.05, 0.05).unwrap();
        let b = single_group_sample_size(0.9, 0.7, 0.999, 0.05, 0.05).unwrap();
        assert!(b.n > a.n && b.exact_first > a.exact_first);
    }

    #[test]
    fn invalid() {
        assert!(single_group_sample_size(0.7, 0.9, 0.9, 0.05, 0.05).is_err());
        assert!(single_group_sample_size(0.9, 0.7, 1.0, 0.05, 0.05).is_err());
        assert!(single_group_sample_size(0.9, 0.7, 0.9, 0.05, 1.0).is_err());
    }
}
