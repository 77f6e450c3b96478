//! Final analysis: logistic regression with marginal risk differences,
//! frequentist and normal-approximation Bayesian comparisons, simulated power
//! and the single-group sample size.

mod compare;
mod logistic;
mod power;
mod samplesize;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::design::{randomize, OpenGroups, TrialDesign};
use crate::num::RngStream;
use crate::{Error, Result};

pub use compare::{
    bayes_risk_difference, sensitivity_priors, test_comparison, test_estimate, AnalysisPrior, ComparisonKind,
    ComparisonOutcome, ComparisonSpec, Factor, NormalPosterior, PriorSet, Sidedness, StrategyContrast,
};
pub use logistic::{
    fit_logistic, fit_model, interaction_screen, Contrast, FitResult, InteractionFlag, MarginalEffect, ModelTerms,
};
pub use power::{
    cell_cure_rates, design_comparisons, design_power_scenarios, power_study, PowerRow, PowerScenario, PowerTable,
};
pub use samplesize::{exact_power, single_group_sample_size, SampleSizeReport};

/// Number of strategy levels, control included.
pub const N_STRATEGIES: u8 = 4;

/// One randomised patient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub regimen: u8,
    pub strategy: u8,
    /// `None` exactly when the strategy is control.
    pub ribavirin: Option<bool>,
    pub stratum: u8,
    pub outcome: bool,
}

impl PatientRecord {
    pub fn validate(&self) -> Result<()> {
        if self.regimen > 1 || self.stratum > 1 || self.strategy >= N_STRATEGIES {
            return Err(Error::Validation(format!("patient record out of range: {self:?}")));
        }
        if (self.strategy == 0) != self.ribavirin.is_none() {
            return Err(Error::Validation(
                "ribavirin must be missing for control patients and present otherwise".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    regimen: u8,
    strategy: u8,
    ribavirin: Option<u8>,
    stratum: u8,
    outcome: u8,
}

fn flag(name: &str, v: u8) -> Result<bool> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(Error::Validation(format!("{name} must be 0 or 1, got {v}"))),
    }
}

/// Reads patient records from CSV with header `regimen,strategy,ribavirin,stratum,outcome`.
/// Ribavirin is left empty for control patients.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<PatientRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<CsvRow>() {
        let row = row?;
        let rec = PatientRecord {
            regimen: row.regimen,
            strategy: row.strategy,
            ribavirin: row.ribavirin.map(|v| flag("ribavirin", v)).transpose()?,
            stratum: row.stratum,
            outcome: flag("outcome", row.outcome)?,
        };
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records<W: Write>(writer: W, records: &[PatientRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(CsvRow {
            regimen: r.regimen,
            strategy: r.strategy,
            ribavirin: r.ribavirin.map(u8::from),
            stratum: r.stratum,
            outcome: r.outcome as u8,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Randomises `design.total_n` patients with every group open and draws
/// outcomes from `cure[group]`. With `ltfu > 0` each patient is dropped with
/// that probability (complete-case analysis).
pub fn simulate_dataset(
    design: &TrialDesign,
    cure: &[f64],
    stratum_prob: f64,
    ltfu: f64,
    rng: &mut RngStream,
) -> Result<Vec<PatientRecord>> {
    let open = OpenGroups::all(design);
    let mut out = Vec::with_capacity(design.total_n as usize);
    for _ in 0..design.total_n {
        let stratum = if rng.bernoulli(stratum_prob) { 0 } else { 1 };
        let a = randomize(design, stratum, &open, rng)?;
        let outcome = rng.bernoulli(cure[a.group]);
        if ltfu > 0.0 && rng.bernoulli(ltfu) {
            continue;
        }
        out.push(PatientRecord {
            regimen: a.key.regimen,
            strategy: a.key.strategy,
            ribavirin: a.key.ribavirin,
            stratum: stratum as u8,
            outcome,
        });
    }
    Ok(out)
}
