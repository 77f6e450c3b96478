//! Numerical layer: incomplete beta, binomial and beta-binomial tails,
//! adaptive quadrature and reproducible random-number streams.

mod beta;
mod binomial;
mod quad;
mod rng;

pub use beta::{ln_beta, reg_inc_beta, BetaParams};
pub use binomial::{beta_binom_pmf, beta_binom_tail_geq, binom_cdf, binom_pmf, binom_tail_geq, BinomialParams};
pub use quad::integrate;
pub use rng::{rng_stream, RngStream};

use statrs::distribution::{ContinuousCDF, Normal};

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

pub(crate) fn check_probability(name: &str, p: f64) -> crate::Result<()> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(crate::Error::Domain(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}
