//! Beta priors for a cure probability: elicitation by effective sample size,
//! the named priors used for monitoring and analysis, and conjugate updating.

use serde::{Deserialize, Serialize};

use crate::num::{reg_inc_beta, BetaParams};
use crate::{Error, Result};

/// What the elicited prior should satisfy: a given mean and
/// `Pr(p < threshold) = tail_prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElicitationTarget {
    pub mean: f64,
    pub threshold: f64,
    pub tail_prob: f64,
}

impl ElicitationTarget {
    pub fn new(mean: f64, threshold: f64, tail_prob: f64) -> Result<Self> {
        let t = Self { mean, threshold, tail_prob };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mean", self.mean), ("threshold", self.threshold), ("tail_prob", self.tail_prob)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Validation(format!("elicitation {name} = {v} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Where to look for the effective sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EssSearch {
    /// Bisection over `[low, high]`.
    Bracket { low: f64, high: f64 },
    /// Skip the search and use this ESS.
    Fixed(f64),
}

impl Default for EssSearch {
    fn default() -> Self {
        EssSearch::Bracket { low: 0.01, high: 1e4 }
    }
}

/// A beta prior together with its summary moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPrior {
    pub label: String,
    pub params: BetaParams,
    pub mean: f64,
    pub variance: f64,
    pub ess: f64,
}

impl NamedPrior {
    pub fn new(label: impl Into<String>, params: BetaParams) -> Self {
        Self { label: label.into(), params, mean: params.mean(), variance: params.variance(), ess: params.ess() }
    }

    /// The monitoring prior beta(4.5, 0.5).
    pub fn monitoring() -> Self {
        Self::new("monitoring", BetaParams::new(4.5, 0.5).expect("valid shapes"))
    }

    /// The control-arm cure-rate analysis prior beta(4.75, 0.25).
    pub fn control_analysis() -> Self {
        Self::new("control-analysis", BetaParams::new(4.75, 0.25).expect("valid shapes"))
    }

    /// `Pr(p < x)` under this prior.
    pub fn tail_below(&self, x: f64) -> Result<f64> {
        reg_inc_beta(self.params, x)
    }

    /// The display view of the prior: the ESS rounded to a multiple of
    /// `ess_step` and both shapes then rounded to two decimals.
    pub fn round_for_display(&self, ess_step: f64) -> Result<BetaParams> {
        let ess = ((self.ess / ess_step).round() * ess_step).max(ess_step);
        let a = (self.mean * ess * 100.0).round() / 100.0;
        let b = ((1.0 - self.mean) * ess * 100.0).round() / 100.0;
        BetaParams::new(a, b)
    }
}

/// Result of [`elicit_beta`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elicitation {
    pub prior: NamedPrior,
    /// Shapes rounded to two decimals.
    pub rounded: BetaParams,
    /// Tail probability achieved by the raw prior.
    pub achieved_tail: f64,
    /// True when every ESS in the bracket satisfies the target (for example
    /// mean = threshold = 0.5, where symmetry fixes the tail at 0.5).
    pub non_unique: bool,
}

const TAIL_TOL: f64 = 1e-6;

fn tail_at(target: &ElicitationTarget, ess: f64) -> Result<f64> {
    reg_inc_beta(BetaParams::from_mean_ess(target.mean, ess)?, target.threshold)
}

/// Finds the beta prior with the target mean whose tail below `threshold`
/// equals `tail_prob`, by bisection on the effective sample size.
pub fn elicit_beta(target: ElicitationTarget, search: EssSearch) -> Result<Elicitation> {
    target.validate()?;
    let (ess, non_unique) = match search {
        EssSearch::Fixed(s) => (s, false),
        EssSearch::Bracket { low, high } => {
            if !(low > 0.0 && high >= low) {
                return Err(Error::Validation(format!("invalid ESS bracket [{low}, {high}]")));
            }
            bisect_ess(&target, low, high)?
        }
    };
    let params = BetaParams::from_mean_ess(target.mean, ess)?;
    let prior = NamedPrior::new("elicited", params);
    let rounded =
        BetaParams::new((params.a() * 100.0).round() / 100.0, (params.b() * 100.0).round() / 100.0).unwrap_or(params);
    Ok(Elicitation { achieved_tail: reg_inc_beta(params, target.threshold)?, prior, rounded, non_unique })
}

fn bisect_ess(target: &ElicitationTarget, low: f64, high: f64) -> Result<(f64, bool)> {
    let g_low = tail_at(target, low)? - target.tail_prob;
    let g_high = tail_at(target, high)? - target.tail_prob;
    if g_low.abs() <= TAIL_TOL && g_high.abs() <= TAIL_TOL {
        return Ok((0.5 * (low + high), true));
    }
    if g_low.abs() <= TAIL_TOL {
        return Ok((low, false));
    }
    if g_high.abs() <= TAIL_TOL {
        return Ok((high, false));
    }
    if g_low.signum() == g_high.signum() {
        let (a, b) = (g_low + target.tail_prob, g_high + target.tail_prob);
        return Err(Error::Elicitation { target: target.tail_prob, low: a.min(b), high: a.max(b) });
    }
    // bisect in log(ESS): the bracket spans six orders of magnitude
    let (mut lo, mut hi, mut g_lo) = (low.ln(), high.ln(), g_low);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let g = tail_at(target, mid.exp())? - target.tail_prob;
        if g.abs() <= TAIL_TOL * 1e-3 || (hi - lo) < 1e-14 {
            return Ok((mid.exp(), false));
        }
        if g.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g;
        } else {
            hi = mid;
        }
    }
    Ok(((0.5 * (lo + hi)).exp(), false))
}

/// Conjugate update of a beta prior with binomial data.
pub fn posterior_update(prior: BetaParams, successes: u64, failures: u64) -> BetaParams {
    BetaParams::new(prior.a() + successes as f64, prior.b() + failures as f64)
        .expect("adding counts keeps shapes positive")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_monitoring_prior() {
        let t = ElicitationTarget::new(0.9, 0.9, 0.34).unwrap();
        let e = elicit_beta(t, EssSearch::default()).unwrap();
        assert!((e.achieved_tail - 0.34).abs() <= 1e-6);
        let shown = e.prior.round_for_display(1.0).unwrap();
        assert_eq!((shown.a(), shown.b()), (4.5, 0.5));
        assert!(!e.non_unique);
    }

    #[test]
    fn symmetric_target_is_flagged() {
        let t = ElicitationTarget::new(0.5, 0.5, 0.5).unwrap();
        let e = elicit_beta(t, EssSearch::default()).unwrap();
        assert!(e.non_unique);
        assert!((e.prior.ess - 0.5 * (0.01 + 1e4)).abs() < 1e-9);
        assert!((e.prior.params.a() - e.prior.params.b()).abs() < 1e-9);
    }

    #[test]
    fn fixed_ess_control_prior() {
        let t = ElicitationTarget::new(0.95, 0.9, 0.2).unwrap();
        let e = elicit_beta(t, EssSearch::Fixed(5.0)).unwrap();
        assert!((e.prior.params.a() - 4.75).abs() < 1e-12);
        assert!((e.prior.params.b() - 0.25).abs() < 1e-12);
        let v = e.prior.variance;
        // 2 significant figures
        assert!((v - 0.0079).abs() < 0.00005, "{v}");
        // degenerate bracket behaves like the fixed pathway when the target is met
        let tail = e.achieved_tail;
        let t2 = ElicitationTarget::new(0.95, 0.9, tail).unwrap();
        let e2 = elicit_beta(t2, EssSearch::Bracket { low: 5.0, high: 5.0 }).unwrap();
        assert!((e2.prior.ess - 5.0).abs() < 1e-12);
    }

    #[test]
    fn unreachable_target_reports_range() {
        let t = ElicitationTarget::new(0.9, 0.9, 0.05).unwrap();
        match elicit_beta(t, EssSearch::default()) {
            Err(Error::Elicitation { low, high, .. }) => {
                assert!(low > 0.1 && low < 0.11);
                assert!(high > 0.49 && high < 0.5);
            }
            other => panic!("expected elicitation failure, got {other:?}"),
        }
    }

    #[test]
    fn updates() {
        let p = BetaParams::new(4.5, 0.5).unwrap();
        assert_eq!(posterior_update(p, 0, 0), p);
        let post = posterior_update(p, 65, 13);
        assert_eq!((post.a(), post.b()), (69.5, 13.5));
        let lap = posterior_update(BetaParams::new(1.0, 1.0).unwrap(), 3, 2);
        assert!((lap.mean() - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn named_priors() {
        let m = NamedPrior::monitoring();
        assert!((m.variance - 0.015).abs() < 1e-12);
        assert_eq!((m.tail_below(0.9).unwrap() * 100.0).round(), 34.0);
        let c = NamedPrior::control_analysis();
        assert!((c.mean - 0.95).abs() < 1e-12);
        assert!((c.variance - 0.008).abs() < 0.0005);
    }
}
