//! Non-inferiority and superiority tests on marginal risk differences, and
//! normal-approximation posteriors for the risk difference.

use serde::{Deserialize, Serialize};

use super::logistic::{Contrast, FitResult, MarginalEffect};
use super::N_STRATEGIES;
use crate::num::normal_quantile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Factor {
    Regimen,
    Strategy,
    Ribavirin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparisonKind {
    NonInferiority,
    Superiority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    One,
    Two,
}

/// Which shortening-versus-control contrast a strategy comparison uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyContrast {
    /// All shortening strategies pooled against control.
    Pooled,
    /// A single shortening strategy against control.
    Each(u8),
    /// Passes only when every shortening strategy passes on its own.
    #[default]
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum AnalysisPrior {
    Flat,
    Normal { mean: f64, variance: f64 },
}

impl AnalysisPrior {
    /// Normal prior with 90% of its mass within `mean ± half_width`.
    pub fn from_ninety_percent_halfwidth(mean: f64, half_width: f64) -> Self {
        let sd = half_width / normal_quantile(0.95);
        AnalysisPrior::Normal { mean, variance: sd * sd }
    }

    fn mean_variance(&self) -> Option<(f64, f64)> {
        match *self {
            AnalysisPrior::Flat => None,
            AnalysisPrior::Normal { mean, variance } => Some((mean, variance)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSpec {
    pub label: Factor,
    pub kind: ComparisonKind,
    /// Non-inferiority margin (negative) or the design difference for superiority.
    pub margin: f64,
    pub alpha: f64,
    pub sidedness: Sidedness,
    #[serde(default = "flat")]
    pub prior: AnalysisPrior,
    #[serde(default)]
    pub strategy_contrast: StrategyContrast,
}

fn flat() -> AnalysisPrior {
    AnalysisPrior::Flat
}

impl ComparisonSpec {
    pub fn non_inferiority(label: Factor, margin: f64) -> Self {
        Self {
            label,
            kind: ComparisonKind::NonInferiority,
            margin,
            alpha: 0.05,
            sidedness: Sidedness::One,
            prior: AnalysisPrior::Flat,
            strategy_contrast: StrategyContrast::All,
        }
    }

    pub fn superiority(label: Factor, delta: f64) -> Self {
        Self {
            label,
            kind: ComparisonKind::Superiority,
            margin: delta,
            alpha: 0.05,
            sidedness: Sidedness::Two,
            prior: AnalysisPrior::Flat,
            strategy_contrast: StrategyContrast::All,
        }
    }

    pub fn with_strategy_contrast(mut self, c: StrategyContrast) -> Self {
        self.strategy_contrast = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::Validation(format!("alpha = {} must lie in (0, 0.5]", self.alpha)));
        }
        if self.kind == ComparisonKind::NonInferiority && self.sidedness != Sidedness::One {
            return Err(Error::Validation("non-inferiority comparisons are one-sided".into()));
        }
        if let StrategyContrast::Each(k) = self.strategy_contrast {
            if k == 0 || k >= N_STRATEGIES {
                return Err(Error::Validation(format!("strategy {k} is not a shortening strategy")));
            }
        }
        if let AnalysisPrior::Normal { variance, .. } = self.prior {
            if !(variance > 0.0 && variance.is_finite()) {
                return Err(Error::Validation("prior variance must be positive".into()));
            }
        }
        Ok(())
    }

    /// Short label used in tables, such as `strategy` or `strategy-2`.
    pub fn row_label(&self) -> String {
        let base = match self.label {
            Factor::Regimen => "regimen",
            Factor::Strategy => "strategy",
            Factor::Ribavirin => "ribavirin",
        };
        let kind = match self.kind {
            ComparisonKind::NonInferiority => "ni",
            ComparisonKind::Superiority => "superiority",
        };
        match (self.label, self.strategy_contrast) {
            (Factor::Strategy, StrategyContrast::Pooled) => format!("{base}-pooled {kind}"),
            (Factor::Strategy, StrategyContrast::Each(k)) => format!("{base}-{k} {kind}"),
            _ => format!("{base} {kind}"),
        }
    }

    fn contrasts(&self) -> Vec<Contrast> {
        match self.label {
            Factor::Regimen => vec![Contrast::Regimen],
            Factor::Ribavirin => vec![Contrast::Ribavirin],
            Factor::Strategy => match self.strategy_contrast {
                StrategyContrast::Pooled => vec![Contrast::StrategyPooled],
                StrategyContrast::Each(k) => vec![Contrast::Strategy(k)],
                StrategyContrast::All => (1..N_STRATEGIES).map(Contrast::Strategy).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonOutcome {
    pub pass: bool,
    /// The contrast that decided the outcome (the worst one for `All`).
    pub contrast: Contrast,
    pub estimate: f64,
    pub se: f64,
    /// Two-sided `1 - 2 alpha` interval for one-sided tests, `1 - alpha` otherwise.
    pub interval: (f64, f64),
}

fn decide(e: &MarginalEffect, spec: &ComparisonSpec) -> ComparisonOutcome {
    let tail = match spec.sidedness {
        Sidedness::One => spec.alpha,
        Sidedness::Two => spec.alpha / 2.0,
    };
    let z = normal_quantile(1.0 - tail);
    let interval = (e.estimate - z * e.se, e.estimate + z * e.se);
    let pass = match spec.kind {
        ComparisonKind::NonInferiority => interval.0 > spec.margin,
        ComparisonKind::Superiority => match spec.sidedness {
            Sidedness::One => interval.0 > 0.0,
            Sidedness::Two => interval.0 > 0.0 || interval.1 < 0.0,
        },
    };
    ComparisonOutcome { pass, contrast: e.contrast, estimate: e.estimate, se: e.se, interval }
}

/// Non-inferiority passes when the lower one-sided bound exceeds the margin;
/// superiority passes when the interval excludes 0.
pub fn test_comparison(fit: &FitResult, spec: &ComparisonSpec) -> Result<ComparisonOutcome> {
    spec.validate()?;
    let mut worst: Option<ComparisonOutcome> = None;
    for c in spec.contrasts() {
        let e = fit.effect(c).ok_or_else(|| Error::Validation(format!("fit has no {c} contrast")))?;
        let out = decide(e, spec);
        let replace = match &worst {
            None => true,
            Some(w) => (w.pass && !out.pass) || (w.pass == out.pass && out.interval.0 < w.interval.0),
        };
        if replace {
            worst = Some(out);
        }
    }
    Ok(worst.expect("at least one contrast"))
}

/// [`test_comparison`] for a bare estimate and standard error.
pub fn test_estimate(estimate: f64, se: f64, spec: &ComparisonSpec) -> ComparisonOutcome {
    let e = MarginalEffect { contrast: Contrast::Regimen, estimate, se, ci95: (estimate, estimate) };
    decide(&e, spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalPosterior {
    pub contrast: Contrast,
    pub mean: f64,
    pub variance: f64,
    pub ci90: (f64, f64),
    pub ci95: (f64, f64),
}

impl NormalPosterior {
    fn new(contrast: Contrast, mean: f64, variance: f64) -> Self {
        let sd = variance.sqrt();
        let (z90, z95) = (normal_quantile(0.95), normal_quantile(0.975));
        Self {
            contrast,
            mean,
            variance,
            ci90: (mean - z90 * sd, mean + z90 * sd),
            ci95: (mean - z95 * sd, mean + z95 * sd),
        }
    }
}

/// Conjugate normal update treating the estimate and its delta-method
/// variance as the likelihood. One posterior per contrast of the spec.
pub fn bayes_risk_difference(fit: &FitResult, spec: &ComparisonSpec) -> Result<Vec<NormalPosterior>> {
    spec.validate()?;
    spec.contrasts()
        .into_iter()
        .map(|c| {
            let e = fit.effect(c).ok_or_else(|| Error::Validation(format!("fit has no {c} contrast")))?;
            Ok(update(c, e.estimate, e.se * e.se, spec.prior))
        })
        .collect()
}

pub(crate) fn update(contrast: Contrast, estimate: f64, lik_var: f64, prior: AnalysisPrior) -> NormalPosterior {
    match prior.mean_variance() {
        None => NormalPosterior::new(contrast, estimate, lik_var),
        Some((m, v)) => {
            let precision = 1.0 / v + 1.0 / lik_var;
            let mean = (m / v + estimate / lik_var) / precision;
            NormalPosterior::new(contrast, mean, 1.0 / precision)
        }
    }
}

/// Reference, sceptical and enthusiastic priors for one comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSet {
    pub label: Factor,
    pub reference: AnalysisPrior,
    pub sceptical: Vec<AnalysisPrior>,
    pub enthusiastic: AnalysisPrior,
}

/// The final-analysis priors. Sceptical priors are centred on the null,
/// enthusiastic ones `gamma` above it, with 90% of the mass within
/// `± gamma`. The regimen comparison has a sceptical prior in each direction.
pub fn sensitivity_priors() -> Vec<PriorSet> {
    let h = AnalysisPrior::from_ninety_percent_halfwidth;
    let reference = AnalysisPrior::Normal { mean: 0.0, variance: 10000.0 };
    vec![
        PriorSet {
            label: Factor::Regimen,
            reference,
            sceptical: vec![h(-0.05, 0.05), h(0.05, 0.05)],
            enthusiastic: h(0.0, 0.05),
        },
        PriorSet { label: Factor::Strategy, reference, sceptical: vec![h(-0.10, 0.10)], enthusiastic: h(0.0, 0.10) },
        PriorSet { label: Factor::Ribavirin, reference, sceptical: vec![h(0.0, 0.05)], enthusiastic: h(0.05, 0.05) },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ni(margin: f64) -> ComparisonSpec {
        ComparisonSpec::non_inferiority(Factor::Regimen, margin)
    }

    #[test]
    fn frequentist_examples() {
        let out = test_estimate(0.0, 0.01, &ni(-0.05));
        assert!(out.pass);
        assert!((out.interval.0 + 0.016449).abs() < 1e-5);
        for se in [1e-6, 0.01, 0.2] {
            assert!(!test_estimate(-0.05, se, &ni(-0.05)).pass);
        }
        let sup = ComparisonSpec::superiority(Factor::Ribavirin, 0.05);
        assert!(test_estimate(0.05, 0.015, &sup).pass);
        assert!(test_estimate(-0.05, 0.015, &sup).pass);
        assert!(!test_estimate(0.02, 0.015, &sup).pass);
    }

    #[test]
    fn spec_validation() {
        let mut s = ni(-0.05);
        s.sidedness = Sidedness::Two;
        assert!(s.validate().is_err());
        let mut s = ni(-0.05);
        s.alpha = 0.6;
        assert!(s.validate().is_err());
        let s =
            ComparisonSpec::non_inferiority(Factor::Strategy, -0.1).with_strategy_contrast(StrategyContrast::Each(0));
        assert!(s.validate().is_err());
    }

    #[test]
    fn flat_prior_leaves_likelihood() {
        let p =
            update(Contrast::Regimen, 0.02, 0.02f64.powi(2), AnalysisPrior::Normal { mean: 0.0, variance: 10000.0 });
        assert!((p.mean - 0.02).abs() < 1e-3 * 0.02);
    }

    #[test]
    fn equal_precision_update() {
        let p = update(Contrast::Regimen, 0.03, 0.0004, AnalysisPrior::Normal { mean: 0.03, variance: 0.0004 });
        assert!((p.mean - 0.03).abs() < 1e-15);
        assert!((p.variance - 0.0002).abs() < 1e-15);
    }

    #[test]
    fn sceptical_regimen_interval() {
        let sets = sensitivity_priors();
        let AnalysisPrior::Normal { mean, variance } = sets[0].sceptical[0] else { panic!() };
        let sd = variance.sqrt();
        let z = normal_quantile(0.95);
        assert!((mean - z * sd + 0.10).abs() < 1e-3);
        assert!((mean + z * sd).abs() < 1e-3);
        let AnalysisPrior::Normal { variance: vs, .. } = sets[1].sceptical[0] else { panic!() };
        assert!((vs - 0.0036).abs() < 0.0002);
    }

    #[test]
    fn posterior_variance_dominance() {
        for (lv, pv) in [(1e-4, 9e-4), (4e-3, 1e-4), (1e-3, 1e-3)] {
            let p = update(Contrast::Regimen, 0.0, lv, AnalysisPrior::Normal { mean: -0.05, variance: pv });
            assert!(p.variance <= lv.min(pv));
            assert!(p.ci90.0 < p.ci90.1 && p.ci95.0 < p.ci90.0);
        }
    }
}
