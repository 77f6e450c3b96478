//! Binomial and beta-binomial probabilities by exact summation.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{check_probability, ln_beta, BetaParams};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialParams {
    pub n: u64,
    pub q: f64,
}

impl BinomialParams {
    pub fn new(n: u64, q: f64) -> Result<Self> {
        check_probability("q", q)?;
        Ok(Self { n, q })
    }
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// P(X = k) for X ~ Binomial(n, q), through log-gamma so large n does not overflow.
pub fn binom_pmf(params: BinomialParams, k: u64) -> f64 {
    let BinomialParams { n, q } = params;
    if k > n {
        return 0.0;
    }
    if q == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if q == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (ln_choose(n, k) + k as f64 * q.ln() + (n - k) as f64 * (-q).ln_1p()).exp()
}

/// P(X <= k).
pub fn binom_cdf(params: BinomialParams, k: u64) -> Result<f64> {
    check_probability("q", params.q)?;
    if k >= params.n {
        return Ok(1.0);
    }
    Ok(1.0 - binom_tail_geq(params, k + 1)?)
}

/// P(X >= k) for X ~ Binomial(n, q).
///
/// Sums whichever tail is smaller and complements if needed.
pub fn binom_tail_geq(params: BinomialParams, k: u64) -> Result<f64> {
    check_probability("q", params.q)?;
    let n = params.n;
    if k == 0 {
        return Ok(1.0);
    }
    if k > n {
        return Ok(0.0);
    }
    let mean = n as f64 * params.q;
    if (k as f64) > mean {
        // upper tail is the small one; add smallest terms first
        let s: f64 = (k..=n).rev().map(|j| binom_pmf(params, j)).sum();
        Ok(s.min(1.0))
    } else {
        let lower: f64 = (0..k).map(|j| binom_pmf(params, j)).sum();
        Ok((1.0 - lower).clamp(0.0, 1.0))
    }
}

/// P(Y = y) for Y ~ BetaBinomial(m; a, b).
pub fn beta_binom_pmf(m: u64, params: BetaParams, y: u64) -> f64 {
    if y > m {
        return 0.0;
    }
    let (a, b) = (params.a(), params.b());
    (ln_choose(m, y) + ln_beta(y as f64 + a, (m - y) as f64 + b) - ln_beta(a, b)).exp()
}

/// P(Y >= k) for Y ~ BetaBinomial(m; a, b): the number of events among `m`
/// future trials when the event probability is beta(a, b) distributed.
pub fn beta_binom_tail_geq(m: u64, params: BetaParams, k: u64) -> Result<f64> {
    if k == 0 {
        return Ok(1.0);
    }
    if k > m {
        return Ok(0.0);
    }
    let mean = m as f64 * params.mean();
    if (k as f64) > mean {
        let s: f64 = (k..=m).rev().map(|j| beta_binom_pmf(m, params, j)).sum();
        Ok(s.clamp(0.0, 1.0))
    } else {
        let lower: f64 = (0..k).map(|j| beta_binom_pmf(m, params, j)).sum();
        Ok((1.0 - lower).clamp(0.0, 1.0))
    }
}
