//! Run configuration read from a TOML file. Every section is optional and
//! falls back to the default design; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{cell_cure_rates, design_comparisons, design_power_scenarios, ComparisonSpec, PowerScenario};
use crate::design::{RecruitmentSchedule, StrategyArm, TimingSpec, TrialDesign, DEFAULT_MONTHLY_TOTALS};
use crate::monitoring::{CureRateRange, StoppingRule, Weighting};
use crate::num::BetaParams;
use crate::priors::{ElicitationTarget, EssSearch};
use crate::sim::{Accrual, MonitoringScenario};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub design: DesignConfig,
    pub schedule: ScheduleConfig,
    pub rule: RuleConfig,
    pub boundary: BoundaryConfig,
    pub timing: TimingConfig,
    pub scenario: ScenarioConfig,
    pub power: PowerConfig,
    pub comparisons: Option<Vec<ComparisonSpec>>,
    pub elicit: ElicitConfig,
    pub samplesize: SampleSizeConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    pub strategies: Option<Vec<StrategyArm>>,
    pub strategy_ratio: Option<Vec<u32>>,
    pub group_size: Option<u32>,
    pub total_n: Option<u32>,
    pub weeks_per_month: Option<f64>,
    pub ltfu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    /// `[month, cumulative randomised]` pairs.
    pub monthly_totals: Vec<(u32, u32)>,
    /// Month at which recruitment starts from zero; `None` starts at the first total.
    pub ramp_from: Option<f64>,
    pub rate_multiplier: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { monthly_totals: DEFAULT_MONTHLY_TOTALS.to_vec(), ramp_from: Some(0.0), rate_multiplier: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuleConfig {
    pub prior: (f64, f64),
    pub cure_threshold: f64,
    pub posterior_prob_threshold: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self { prior: (4.5, 0.5), cure_threshold: 0.9, posterior_prob_threshold: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryConfig {
    /// Defaults to the group size.
    pub max_n: Option<u32>,
    /// Merge consecutive n with the same boundary.
    pub grouped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingConfig {
    pub cure_floor: f64,
    pub cure_ceiling: f64,
    pub weighting: Weighting,
    pub thresholds: Vec<f64>,
    pub min_early_n: u32,
    /// Cure rates drawn as separate series in the initial-stop plot.
    pub plot_cure_rates: Vec<f64>,
}

impl Default for TimingConfig {
    fn default() -> Self {
        let t = TimingSpec::default();
        Self {
            cure_floor: t.range.lower,
            cure_ceiling: t.range.upper,
            weighting: t.range.weighting,
            thresholds: t.thresholds,
            min_early_n: t.min_early_n,
            plot_cure_rates: vec![0.5, 0.6, 0.7, 0.8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// One cure rate per strategy (control first) or one per group.
    pub true_cure: Vec<f64>,
    /// Analysis months; when absent the timing search chooses them.
    pub analysis_months: Option<Vec<u32>>,
    pub replicates: u32,
    pub seed: u64,
    pub stratum_prob: f64,
    pub accrual: Accrual,
    /// Recruitment-rate multipliers for the sensitivity scan.
    pub rate_multipliers: Vec<f64>,
    /// Lower ends of the inferior cure-rate range for the sensitivity scan.
    pub cure_floors: Vec<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            true_cure: vec![0.95, 0.75, 0.75, 0.75],
            analysis_months: None,
            replicates: 5000,
            seed: 20190930,
            stratum_prob: 0.5,
            accrual: Accrual::Stochastic,
            rate_multipliers: Vec::new(),
            cure_floors: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerConfig {
    pub scenarios: Vec<PowerScenario>,
    pub replicates: u32,
    pub seed: u64,
    pub ltfu: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self { scenarios: design_power_scenarios(), replicates: 5000, seed: 20190930, ltfu: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElicitConfig {
    pub mean: f64,
    pub threshold: f64,
    pub tail: f64,
    pub ess_low: f64,
    pub ess_high: f64,
    /// Skip the search and use this effective sample size.
    pub fixed_ess: Option<f64>,
    /// Step used when rounding the ESS for display.
    pub ess_step: f64,
}

impl Default for ElicitConfig {
    fn default() -> Self {
        Self { mean: 0.9, threshold: 0.9, tail: 0.34, ess_low: 0.01, ess_high: 1e4, fixed_ess: None, ess_step: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSizeConfig {
    pub target: f64,
    pub unacceptable: f64,
    pub power: f64,
    pub alpha: f64,
    pub ltfu: f64,
}

impl Default for SampleSizeConfig {
    fn default() -> Self {
        Self { target: 0.9, unacceptable: 0.7, power: 0.9, alpha: 0.05, ltfu: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub full_precision: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn design(&self) -> Result<TrialDesign> {
        let mut d = TrialDesign::default();
        let c = &self.design;
        if let Some(s) = &c.strategies {
            d.strategies = s.clone();
        }
        if let Some(r) = &c.strategy_ratio {
            d.strategy_ratio = r.clone();
        }
        if let Some(v) = c.group_size {
            d.group_size = v;
        }
        if let Some(v) = c.total_n {
            d.total_n = v;
        }
        if let Some(v) = c.weeks_per_month {
            d.weeks_per_month = v;
        }
        if let Some(v) = c.ltfu {
            d.ltfu = v;
        }
        d.validate()?;
        Ok(d)
    }

    pub fn schedule(&self) -> Result<RecruitmentSchedule> {
        let s = RecruitmentSchedule::from_monthly(&self.schedule.monthly_totals, self.schedule.ramp_from)?;
        if self.schedule.rate_multiplier == 1.0 {
            Ok(s)
        } else {
            s.scale_rate(self.schedule.rate_multiplier)
        }
    }

    pub fn rule(&self) -> Result<StoppingRule> {
        let (a, b) = self.rule.prior;
        StoppingRule::new(self.rule.cure_threshold, self.rule.posterior_prob_threshold, BetaParams::new(a, b)?)
    }

    pub fn timing_spec(&self) -> Result<TimingSpec> {
        let t = &self.timing;
        let spec = TimingSpec {
            range: CureRateRange { lower: t.cure_floor, upper: t.cure_ceiling, weighting: t.weighting },
            thresholds: t.thresholds.clone(),
            min_early_n: t.min_early_n,
        };
        spec.validate()?;
        if t.plot_cure_rates.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Validation("plot cure rates must be probabilities".into()));
        }
        Ok(spec)
    }

    pub fn boundary_max_n(&self) -> Result<u32> {
        let n = match self.boundary.max_n {
            Some(n) => n,
            None => self.design()?.group_size,
        };
        if n == 0 {
            return Err(Error::Validation("max_n must be at least 1".into()));
        }
        Ok(n)
    }

    /// Per-group cure rates expanded from the scenario section.
    pub fn group_cure(&self, design: &TrialDesign) -> Result<Vec<f64>> {
        let groups = design.groups();
        let given = &self.scenario.true_cure;
        if given.len() == groups.len() {
            Ok(given.clone())
        } else if given.len() == design.strategies.len() {
            Ok(groups.iter().map(|g| given[g.strategy as usize]).collect())
        } else {
            Err(Error::Validation(format!(
                "true_cure needs {} (per strategy) or {} (per group) entries, got {}",
                design.strategies.len(),
                groups.len(),
                given.len()
            )))
        }
    }

    /// The simulation scenario. Without explicit analysis months the timing
    /// search result is used.
    pub fn monitoring_scenario(&self) -> Result<MonitoringScenario> {
        let design = self.design()?;
        let schedule = self.schedule()?;
        let rule = self.rule()?;
        let timing = self.timing_spec()?;
        let analysis_months = match &self.scenario.analysis_months {
            Some(m) => m.clone(),
            None => crate::design::timing_search(&design, &schedule, &rule, &timing)?.analysis_months(),
        };
        let s = MonitoringScenario {
            true_cure: self.group_cure(&design)?,
            design,
            schedule,
            rule,
            analysis_months,
            replicates: self.scenario.replicates,
            seed: self.scenario.seed,
            stratum_prob: self.scenario.stratum_prob,
            accrual: self.scenario.accrual,
            timing,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn comparisons(&self) -> Vec<ComparisonSpec> {
        self.comparisons.clone().unwrap_or_else(design_comparisons)
    }

    pub fn power_cells(&self, design: &TrialDesign) -> Result<Vec<(String, Vec<f64>)>> {
        if self.power.scenarios.is_empty() {
            return Err(Error::Validation("at least one power scenario is required".into()));
        }
        self.power
            .scenarios
            .iter()
            .map(|s| {
                for p in [s.control, s.shortened_rbv, s.shortened_no_rbv] {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::Validation(format!("scenario {}: cure rate {p} out of range", s.label)));
                    }
                }
                Ok((s.label.clone(), cell_cure_rates(design, s)))
            })
            .collect()
    }

    pub fn elicitation(&self) -> Result<(ElicitationTarget, EssSearch)> {
        let e = &self.elicit;
        let target = ElicitationTarget::new(e.mean, e.threshold, e.tail)?;
        let search = match e.fixed_ess {
            Some(s) if s > 0.0 => EssSearch::Fixed(s),
            Some(s) => return Err(Error::Validation(format!("fixed ESS {s} must be positive"))),
            None => EssSearch::Bracket { low: e.ess_low, high: e.ess_high },
        };
        if !(e.ess_step > 0.0) {
            return Err(Error::Validation("ess_step must be positive".into()));
        }
        Ok((target, search))
    }

    /// Checks every section against the invariants of the types it builds.
    pub fn validate(&self) -> Result<()> {
        let design = self.design()?;
        let schedule = self.schedule()?;
        schedule.validate_for(&design)?;
        self.rule()?;
        self.timing_spec()?;
        self.boundary_max_n()?;
        if self.scenario.rate_multipliers.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::Validation("rate multipliers must be positive".into()));
        }
        if self.scenario.cure_floors.iter().any(|&f| !(0.0..self.timing.cure_ceiling).contains(&f)) {
            return Err(Error::Validation("cure floors must lie below the range ceiling".into()));
        }
        let cure = self.group_cure(&design)?;
        if cure.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Validation("true cure rates must be probabilities".into()));
        }
        if self.scenario.replicates == 0 || self.power.replicates == 0 {
            return Err(Error::Validation("replicates must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.scenario.stratum_prob) {
            return Err(Error::Validation("stratum_prob must be a probability".into()));
        }
        if let Some(m) = &self.scenario.analysis_months {
            if m.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Validation("analysis months must be strictly ascending".into()));
            }
        }
        if !(0.0..1.0).contains(&self.power.ltfu) {
            return Err(Error::Validation("power ltfu must lie in [0, 1)".into()));
        }
        self.power_cells(&design)?;
        for c in self.comparisons() {
            c.validate()?;
        }
        self.elicitation()?;
        let s = &self.samplesize;
        if !(s.unacceptable < s.target) {
            return Err(Error::Validation("unacceptable cure rate must be below the target".into()));
        }
        for v in [s.target, s.unacceptable, s.power, s.alpha] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Validation(format!("sample-size parameter {v} must lie in (0, 1)")));
            }
        }
        if !(0.0..1.0).contains(&s.ltfu) {
            return Err(Error::Validation("sample-size ltfu must lie in [0, 1)".into()));
        }
        Ok(())
    }
}
