//! Simulation-based power for the final comparisons.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::compare::{test_comparison, ComparisonSpec, Factor, StrategyContrast};
use super::logistic::fit_logistic;
use super::{simulate_dataset, N_STRATEGIES};
use crate::design::{TrialDesign, CONTROL};
use crate::num::rng_stream;
use crate::{Error, Result};

/// Cure rates for standard-duration, shortened-with-ribavirin and
/// shortened-without-ribavirin groups; no regimen effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerScenario {
    pub label: String,
    pub control: f64,
    pub shortened_rbv: f64,
    pub shortened_no_rbv: f64,
}

/// Design scenarios for the power study: control, shortened with ribavirin and shortened without.
pub fn design_power_scenarios() -> Vec<PowerScenario> {
    let s = |label: &str, control, shortened_rbv, shortened_no_rbv| PowerScenario {
        label: label.into(),
        control,
        shortened_rbv,
        shortened_no_rbv,
    };
    vec![s("5% higher", 0.933, 0.983, 0.933), s("2.5% higher", 0.95, 0.975, 0.925), s("Equal", 0.967, 0.967, 0.917)]
}

/// Regimen NI (5% margin), strategy NI (10% margin, every shortening
/// strategy must pass) and ribavirin superiority, followed by the pooled and
/// per-strategy strategy contrasts.
pub fn design_comparisons() -> Vec<ComparisonSpec> {
    let strategy = ComparisonSpec::non_inferiority(Factor::Strategy, -0.10);
    let mut specs = vec![
        ComparisonSpec::non_inferiority(Factor::Regimen, -0.05),
        strategy.clone(),
        ComparisonSpec::superiority(Factor::Ribavirin, 0.05),
        strategy.clone().with_strategy_contrast(StrategyContrast::Pooled),
    ];
    for k in 1..N_STRATEGIES {
        specs.push(strategy.clone().with_strategy_contrast(StrategyContrast::Each(k)));
    }
    specs
}

/// Per-group cure probabilities in the order of [`TrialDesign::groups`].
pub fn cell_cure_rates(design: &TrialDesign, scenario: &PowerScenario) -> Vec<f64> {
    design
        .groups()
        .iter()
        .map(|g| match g.ribavirin {
            _ if g.strategy as usize == CONTROL => scenario.control,
            Some(true) => scenario.shortened_rbv,
            _ => scenario.shortened_no_rbv,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub label: String,
    pub passes: u64,
    pub power: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub replicates: u32,
    pub seed: u64,
    /// Replicates whose fit failed; excluded from the denominators.
    pub fit_errors: u64,
    pub rows: Vec<PowerRow>,
}

/// Randomises the whole trial `replicates` times, fits the main-effects model
/// and tests each spec. Replicate `r` uses stream `(seed, r)`.
pub fn power_study(
    design: &TrialDesign,
    cure: &[f64],
    specs: &[ComparisonSpec],
    replicates: u32,
    seed: u64,
    ltfu: f64,
) -> Result<PowerTable> {
    design.validate()?;
    if cure.len() != design.groups().len() || cure.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Validation("one cure probability in [0, 1] is needed per group".into()));
    }
    if !(0.0..1.0).contains(&ltfu) {
        return Err(Error::Validation(format!("ltfu = {ltfu} must lie in [0, 1)")));
    }
    if replicates == 0 {
        return Err(Error::Validation("replicates must be at least 1".into()));
    }
    for s in specs {
        s.validate()?;
    }
    let k = specs.len();
    let (passes, errors) = (0..replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<(Vec<u64>, u64)> {
            let mut rng = rng_stream(seed, r);
            let data = simulate_dataset(design, cure, 0.5, ltfu, &mut rng)?;
            let fit = match fit_logistic(&data, false) {
                Ok(f) => f,
                Err(e) if e.is_numerical() || matches!(e, Error::Validation(_)) => return Ok((vec![0; k], 1)),
                Err(e) => return Err(e),
            };
            let mut out = Vec::with_capacity(k);
            for s in specs {
                out.push(test_comparison(&fit, s)?.pass as u64);
            }
            Ok((out, 0))
        })
        .try_reduce(
            || (vec![0; k], 0),
            |mut a, b| {
                a.0.iter_mut().zip(b.0).for_each(|(x, y)| *x += y);
                a.1 += b.1;
                Ok(a)
            },
        )?;
    let ok = (replicates as u64 - errors) as f64;
    let rows = specs
        .iter()
        .zip(passes)
        .map(|(s, p)| {
            let power = if ok > 0.0 { p as f64 / ok } else { f64::NAN };
            PowerRow { label: s.row_label(), passes: p, power, mc_se: (power * (1.0 - power) / ok).sqrt() }
        })
        .collect();
    Ok(PowerTable { replicates, seed, fit_errors: errors, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_cells() {
        let d = TrialDesign::default();
        let cure = cell_cure_rates(&d, &design_power_scenarios()[0]);
        assert_eq!(cure.len(), 14);
        assert_eq!(cure[0], 0.933);
        assert_eq!(cure[1], 0.933);
        assert_eq!(cure[2], 0.983);
        // the three cure-rate rows average to 95% in every column
        for s in design_power_scenarios() {
            let mean = (s.control + s.shortened_rbv + s.shortened_no_rbv) / 3.0;
            assert!((mean - 0.95).abs() < 0.001, "{}: {mean}", s.label);
        }
    }

    #[test]
    fn deterministic_and_small_run() {
        let d = TrialDesign::default();
        let cure = cell_cure_rates(&d, &design_power_scenarios()[0]);
        let a = power_study(&d, &cure, &design_comparisons(), 40, 9, 0.0).unwrap();
        let b = power_study(&d, &cure, &design_comparisons(), 40, 9, 0.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 7);
        assert!(a.rows[0].power > 0.8);
    }

    #[test]
    fn rejects_bad_input() {
        let d = TrialDesign::default();
        assert!(power_study(&d, &[0.9; 13], &design_comparisons(), 10, 0, 0.0).is_err());
        assert!(power_study(&d, &[0.9; 14], &design_comparisons(), 0, 0, 0.0).is_err());
    }
}
