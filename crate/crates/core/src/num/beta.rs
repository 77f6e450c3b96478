//! Beta distribution parameters and the regularized incomplete beta function.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::check_probability;
use crate::{Error, Result};

const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Shape parameters of a beta distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct BetaParams {
    a: f64,
    b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
            return Err(Error::Domain(format!("beta shapes must be positive and finite, got ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    /// Beta with the given mean and effective sample size `a + b`.
    pub fn from_mean_ess(mean: f64, ess: f64) -> Result<Self> {
        if !(mean > 0.0 && mean < 1.0) {
            return Err(Error::Domain(format!("mean {mean} must lie in (0, 1)")));
        }
        Self::new(mean * ess, (1.0 - mean) * ess)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn variance(&self) -> f64 {
        let s = self.a + self.b;
        self.a * self.b / (s * s * (s + 1.0))
    }

    pub fn ess(&self) -> f64 {
        self.a + self.b
    }

    /// CDF at `x`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        reg_inc_beta(*self, x)
    }

    /// Density at `x`; zero outside the open unit interval.
    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        ((self.a - 1.0) * x.ln() + (self.b - 1.0) * (1.0 - x).ln() - ln_beta(self.a, self.b)).exp()
    }
}

impl TryFrom<(f64, f64)> for BetaParams {
    type Error = Error;
    fn try_from((a, b): (f64, f64)) -> Result<Self> {
        Self::new(a, b)
    }
}

impl From<BetaParams> for (f64, f64) {
    fn from(p: BetaParams) -> Self {
        (p.a, p.b)
    }
}

impl std::fmt::Display for BetaParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "beta({}, {})", self.a, self.b)
    }
}

/// ln B(a, b).
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta function I_x(a, b), the beta CDF at `x`.
///
/// Continued fraction evaluated with the modified Lentz method; for
/// `x > (a + 1) / (a + b + 2)` the complement `1 - I_{1-x}(b, a)` is used so the
/// fraction always converges quickly.
pub fn reg_inc_beta(params: BetaParams, x: f64) -> Result<f64> {
    check_probability("x", x)?;
    let (a, b) = (params.a, params.b);
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        Ok(1.0 - beta_cf(b, a, 1.0 - x)?)
    } else {
        beta_cf(a, b, x)
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let ln_prefix = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    let prefix = ln_prefix.exp() / a;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;

    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut f = d;

    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let even = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + even * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + even / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        f *= d * c;

        let odd = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + odd * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + odd / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            return Ok((prefix * f).clamp(0.0, 1.0));
        }
    }
    Err(Error::Convergence(format!("incomplete beta continued fraction (a={a}, b={b}, x={x})")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ib(a: f64, b: f64, x: f64) -> f64 {
        reg_inc_beta(BetaParams::new(a, b).unwrap(), x).unwrap()
    }

    /// Composite Simpson on the density; independent of the continued fraction.
    fn simpson_cdf(a: f64, b: f64, x: f64) -> f64 {
        let p = BetaParams::new(a, b).unwrap();
        let n = 200_000;
        let h = x / n as f64;
        let mut s = p.pdf(0.0) + p.pdf(x);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * p.pdf(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn uniform_is_identity() {
        assert!((ib(1.0, 1.0, 0.37) - 0.37).abs() < 1e-14);
    }

    #[test]
    fn monitoring_prior_tail() {
        let v = ib(4.5, 0.5, 0.9);
        assert_eq!((v * 100.0).round() / 100.0, 0.34);
    }

    #[test]
    fn symmetry_identity() {
        let lhs = ib(3.0, 2.0, 0.5);
        let rhs = 1.0 - ib(2.0, 3.0, 0.5);
        assert!((lhs - rhs).abs() < 1e-14);
        // closed form for integer shapes: I_x(3,2) = 4x^3 - 3x^4
        assert!((lhs - (4.0 * 0.125 - 3.0 * 0.0625)).abs() < 1e-14);
    }

    #[test]
    fn agrees_with_quadrature_for_smooth_shapes() {
        for &(a, b, x) in &[(2.0, 3.0, 0.3), (5.5, 2.5, 0.8), (3.0, 7.0, 0.25), (69.5, 13.5, 0.85)] {
            let q = simpson_cdf(a, b, x);
            assert!((ib(a, b, x) - q).abs() < 1e-9, "a={a} b={b} x={x}");
        }
    }

    #[test]
    fn endpoints_and_domain() {
        assert_eq!(ib(4.5, 0.5, 0.0), 0.0);
        assert_eq!(ib(4.5, 0.5, 1.0), 1.0);
        let p = BetaParams::new(1.0, 1.0).unwrap();
        assert!(reg_inc_beta(p, 1.5).is_err());
        assert!(reg_inc_beta(p, f64::NAN).is_err());
        assert!(BetaParams::new(0.0, 1.0).is_err());
        assert!(BetaParams::new(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn moments() {
        let p = BetaParams::new(4.5, 0.5).unwrap();
        assert!((p.mean() - 0.9).abs() < 1e-15);
        assert!((p.variance() - 0.015).abs() < 1e-15);
        assert_eq!(p.ess(), 5.0);
    }
}
