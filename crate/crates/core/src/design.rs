//! The factorial trial structure and deterministic planning projections.
//!
//! Patients are randomised to one of two drug regimens, one of four duration
//! strategies (standard control plus three shortening strategies) and, for
//! shortening strategies only, to adjunctive ribavirin or not. That gives
//! 2 x (1 + 3 x 2) = 14 randomised groups. Outcomes are ascertained 12 weeks
//! after the end of treatment, so each strategy has its own outcome lag.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::monitoring::{avg_stop_prob_with, boundary, BoundaryTable, CureRateRange, StoppingRule};
use crate::num::RngStream;
use crate::{Error, Result};

/// Average weeks per calendar month.
pub const WEEKS_PER_MONTH: f64 = 365.25 / 7.0 / 12.0;

/// Index of the standard-duration control strategy.
pub const CONTROL: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagComponent {
    /// Weeks from randomisation to the outcome visit (treatment + 12 weeks).
    pub weeks: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyArm {
    pub label: String,
    pub lag_distribution: Vec<LagComponent>,
    pub monitored: bool,
}

impl StrategyArm {
    pub fn new(label: &str, lags: &[(f64, f64)], monitored: bool) -> Self {
        Self {
            label: label.to_string(),
            lag_distribution: lags.iter().map(|&(weeks, weight)| LagComponent { weeks, weight }).collect(),
            monitored,
        }
    }

    pub fn mean_lag_weeks(&self) -> f64 {
        self.lag_distribution.iter().map(|c| c.weeks * c.weight).sum()
    }

    pub fn max_lag_weeks(&self) -> f64 {
        self.lag_distribution.iter().map(|c| c.weeks).fold(0.0, f64::max)
    }

    /// Draws a lag (in weeks) from the mixture.
    pub fn draw_lag(&self, rng: &mut RngStream) -> f64 {
        let u = rng.uniform();
        let mut acc = 0.0;
        for c in &self.lag_distribution {
            acc += c.weight;
            if u < acc {
                return c.weeks;
            }
        }
        self.lag_distribution.last().map(|c| c.weeks).unwrap_or(0.0)
    }
}

/// One of the 14 randomised groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub regimen: u8,
    pub strategy: u8,
    /// `None` for the control strategy, which is not randomised to ribavirin.
    pub ribavirin: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialDesign {
    pub regimens: [String; 2],
    /// Control first, then the shortening strategies.
    pub strategies: Vec<StrategyArm>,
    pub ribavirin_levels: [String; 2],
    pub strata: [String; 2],
    pub strategy_ratio: Vec<u32>,
    pub group_size: u32,
    pub total_n: u32,
    #[serde(default = "default_wpm")]
    pub weeks_per_month: f64,
    /// Fraction lost to follow-up before the outcome visit (projection haircut).
    #[serde(default)]
    pub ltfu: f64,
}

fn default_wpm() -> f64 {
    WEEKS_PER_MONTH
}

impl Default for TrialDesign {
    fn default() -> Self {
        default_design()
    }
}

/// Two regimens; control (24-week lag), PEG-IFN (16), response-guided
/// therapy (16/20/24 weeks in ratio 1:3:1) and induction/maintenance (24);
/// 78 patients per group, 1092 in total.
pub fn default_design() -> TrialDesign {
    TrialDesign {
        regimens: ["SOF/VEL".into(), "SOF/DCV".into()],
        strategies: vec![
            StrategyArm::new("Standard", &[(24.0, 1.0)], false),
            StrategyArm::new("PEG-IFN", &[(16.0, 1.0)], true),
            StrategyArm::new("RGT", &[(16.0, 0.2), (20.0, 0.6), (24.0, 0.2)], true),
            StrategyArm::new("Induction/maintenance", &[(24.0, 1.0)], true),
        ],
        ribavirin_levels: ["No RBV".into(), "RBV".into()],
        strata: ["Genotype 6".into(), "Other genotypes".into()],
        strategy_ratio: vec![1, 2, 2, 2],
        group_size: 78,
        total_n: 1092,
        weeks_per_month: WEEKS_PER_MONTH,
        ltfu: 0.0,
    }
}

impl TrialDesign {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.len() != 4 || self.strategy_ratio.len() != 4 {
            return Err(Error::Validation("design needs exactly 4 strategies (control first) and 4 ratios".into()));
        }
        for s in &self.strategies {
            if s.lag_distribution.is_empty() {
                return Err(Error::Validation(format!("strategy {} has no lag distribution", s.label)));
            }
            let total: f64 = s.lag_distribution.iter().map(|c| c.weight).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Validation(format!("lag weights of {} sum to {total}, not 1", s.label)));
            }
            if s.lag_distribution.iter().any(|c| !(c.weeks > 0.0) || !(0.0..=1.0).contains(&c.weight)) {
                return Err(Error::Validation(format!("strategy {} has a non-positive lag or bad weight", s.label)));
            }
        }
        if self.strategy_ratio.contains(&0) {
            return Err(Error::Validation("strategy ratios must be positive".into()));
        }
        // equal allocation to every group
        let shares: Vec<f64> = (0..self.groups().len()).map(|g| self.allocation_weight(g)).collect();
        if shares.iter().any(|s| (s - shares[0]).abs() > 1e-12) {
            return Err(Error::Validation("allocation ratios must give every group an equal share".into()));
        }
        if !self.group_size.is_multiple_of(2) {
            return Err(Error::Validation(format!("group size {} must be even (two equal strata)", self.group_size)));
        }
        if self.total_n != 14 * self.group_size {
            return Err(Error::Validation(format!(
                "total_n {} must equal 14 x group_size ({})",
                self.total_n,
                14 * self.group_size
            )));
        }
        if !(self.weeks_per_month > 0.0) {
            return Err(Error::Validation("weeks_per_month must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.ltfu) {
            return Err(Error::Validation(format!("ltfu {} must lie in [0, 1)", self.ltfu)));
        }
        Ok(())
    }

    /// All randomised groups: per regimen, control first, then each shortening
    /// strategy without and with ribavirin.
    pub fn groups(&self) -> Vec<GroupKey> {
        let mut out = Vec::with_capacity(14);
        for regimen in 0..2u8 {
            out.push(GroupKey { regimen, strategy: CONTROL as u8, ribavirin: None });
            for strategy in 1..self.strategies.len() as u8 {
                for rbv in [false, true] {
                    out.push(GroupKey { regimen, strategy, ribavirin: Some(rbv) });
                }
            }
        }
        out
    }

    pub fn group_label(&self, g: &GroupKey) -> String {
        let s = &self.strategies[g.strategy as usize].label;
        let r = &self.regimens[g.regimen as usize];
        match g.ribavirin {
            None => format!("{r} / {s}"),
            Some(v) => format!("{r} / {s} / {}", self.ribavirin_levels[v as usize]),
        }
    }

    /// Number of groups receiving a strategy.
    pub fn multiplicity(&self, strategy: usize) -> u32 {
        if strategy == CONTROL {
            2
        } else {
            4
        }
    }

    /// Unconditional allocation probability of group `g` (index into [`Self::groups`]).
    pub fn allocation_weight(&self, g: usize) -> f64 {
        let key = self.groups()[g];
        let total: u32 = self.strategy_ratio.iter().sum();
        let s = self.strategy_ratio[key.strategy as usize] as f64 / total as f64;
        let rbv = if key.ribavirin.is_some() { 0.5 } else { 1.0 };
        0.5 * s * rbv
    }

    pub fn weeks_to_months(&self, weeks: f64) -> f64 {
        weeks / self.weeks_per_month
    }
}

/// Which groups are still recruiting, per stratum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenGroups {
    open: Vec<[bool; 2]>,
}

impl OpenGroups {
    pub fn all(design: &TrialDesign) -> Self {
        Self { open: vec![[true; 2]; design.groups().len()] }
    }

    pub fn is_open(&self, group: usize, stratum: usize) -> bool {
        self.open[group][stratum]
    }

    /// Closes a group in both strata.
    pub fn close(&mut self, group: usize) {
        self.open[group] = [false; 2];
    }

    pub fn close_in_stratum(&mut self, group: usize, stratum: usize) {
        self.open[group][stratum] = false;
    }

    pub fn close_strategy(&mut self, design: &TrialDesign, strategy: usize) {
        for (i, g) in design.groups().iter().enumerate() {
            if g.strategy as usize == strategy {
                self.close(i);
            }
        }
    }

    pub fn any_open(&self, stratum: usize) -> bool {
        self.open.iter().any(|o| o[stratum])
    }
}

/// Allocation probabilities for a patient in `stratum`, closed groups removed
/// and the remaining ratios renormalised.
pub fn allocation_probs(design: &TrialDesign, open: &OpenGroups, stratum: usize) -> Result<Vec<f64>> {
    let n = design.groups().len();
    let w: Vec<f64> =
        (0..n).map(|g| if open.is_open(g, stratum) { design.allocation_weight(g) } else { 0.0 }).collect();
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::Exhausted(design.strata[stratum].clone()));
    }
    Ok(w.into_iter().map(|x| x / total).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub group: usize,
    pub key: GroupKey,
    pub stratum: usize,
}

/// Simple stratified randomisation among the open groups of the patient's stratum.
pub fn randomize(design: &TrialDesign, stratum: usize, open: &OpenGroups, rng: &mut RngStream) -> Result<Assignment> {
    if stratum > 1 {
        return Err(Error::Validation(format!("stratum index {stratum} out of range")));
    }
    let probs = allocation_probs(design, open, stratum)?;
    let u = rng.uniform();
    let mut acc = 0.0;
    let mut chosen = None;
    for (g, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            chosen = Some(g);
            acc += p;
            if u < acc {
                break;
            }
        }
    }
    let group = chosen.expect("at least one open group");
    Ok(Assignment { group, key: design.groups()[group], stratum })
}

/// Cumulative number randomised as a piecewise-linear function of months.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecruitmentSchedule {
    /// `(month, cumulative randomised)`, strictly increasing months.
    pub cumulative: Vec<(f64, f64)>,
}

/// Planned monthly recruitment totals from month 5 onwards.
pub const DEFAULT_MONTHLY_TOTALS: [(u32, u32); 20] = [
    (5, 113),
    (6, 153),
    (7, 205),
    (8, 257),
    (9, 309),
    (10, 361),
    (11, 413),
    (12, 465),
    (13, 517),
    (14, 569),
    (15, 621),
    (16, 673),
    (17, 725),
    (18, 777),
    (19, 829),
    (20, 881),
    (21, 933),
    (22, 985),
    (23, 1037),
    (24, 1092),
];

impl Default for RecruitmentSchedule {
    fn default() -> Self {
        Self::from_monthly(&DEFAULT_MONTHLY_TOTALS, Some(0.0)).expect("valid default schedule")
    }
}

impl RecruitmentSchedule {
    /// Builds a schedule from monthly cumulative totals. With `ramp_from`, a
    /// zero point is added at that month so recruitment rises linearly up to
    /// the first listed total.
    pub fn from_monthly(totals: &[(u32, u32)], ramp_from: Option<f64>) -> Result<Self> {
        let mut cumulative: Vec<(f64, f64)> = Vec::with_capacity(totals.len() + 1);
        if let Some(start) = ramp_from {
            cumulative.push((start, 0.0));
        }
        cumulative.extend(totals.iter().map(|&(m, n)| (m as f64, n as f64)));
        let s = Self { cumulative };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cumulative.is_empty() {
            return Err(Error::Validation("recruitment schedule is empty".into()));
        }
        for w in self.cumulative.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Validation(format!("schedule months not increasing at {}", w[1].0)));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::Validation(format!("cumulative recruitment decreases at month {}", w[1].0)));
            }
        }
        if self.cumulative.iter().any(|p| !(p.0.is_finite() && p.1.is_finite() && p.1 >= 0.0)) {
            return Err(Error::Validation("schedule entries must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn validate_for(&self, design: &TrialDesign) -> Result<()> {
        self.validate()?;
        if (self.total() - design.total_n as f64).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "schedule ends at {} but the design recruits {}",
                self.total(),
                design.total_n
            )));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.cumulative.last().map(|p| p.1).unwrap_or(0.0)
    }

    pub fn start_month(&self) -> f64 {
        self.cumulative[0].0
    }

    pub fn end_month(&self) -> f64 {
        self.cumulative.last().map(|p| p.0).unwrap_or(0.0)
    }

    /// Cumulative randomised at month `t`, interpolated linearly.
    pub fn at(&self, t: f64) -> f64 {
        let pts = &self.cumulative;
        if t <= pts[0].0 {
            // before the first point: zero unless the schedule starts at a nonzero total
            return if t < pts[0].0 { 0.0 } else { pts[0].1 };
        }
        if t >= self.end_month() {
            return self.total();
        }
        let i = pts.partition_point(|p| p.0 <= t);
        let (t0, c0) = pts[i - 1];
        let (t1, c1) = pts[i];
        c0 + (t - t0) / (t1 - t0) * (c1 - c0)
    }

    /// Earliest month at which `count` patients have been randomised.
    pub fn time_of(&self, count: f64) -> f64 {
        let pts = &self.cumulative;
        if count <= pts[0].1 {
            return pts[0].0;
        }
        if count >= self.total() {
            return pts.iter().find(|p| p.1 >= count).map(|p| p.0).unwrap_or(self.end_month());
        }
        let i = pts.partition_point(|p| p.1 < count);
        let (t0, c0) = pts[i - 1];
        let (t1, c1) = pts[i];
        t0 + (count - c0) / (c1 - c0) * (t1 - t0)
    }

    /// Same totals reached `multiplier` times faster.
    pub fn scale_rate(&self, multiplier: f64) -> Result<Self> {
        if !(multiplier > 0.0 && multiplier.is_finite()) {
            return Err(Error::Validation(format!("rate multiplier {multiplier} must be positive")));
        }
        Ok(Self { cumulative: self.cumulative.iter().map(|&(t, c)| (t / multiplier, c)).collect() })
    }

    /// Average recruitment per month over the schedule.
    pub fn mean_monthly_rate(&self) -> f64 {
        let span = self.end_month() - self.start_month();
        if span <= 0.0 {
            self.total()
        } else {
            (self.total() - self.cumulative[0].1) / span
        }
    }
}

/// Expected patients with outcome data at a calendar month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub month: f64,
    pub total_recruited: u32,
    pub total_at_eot12: u32,
    /// Per-group count for each strategy, rounded to nearest (label, count).
    pub per_group_at_eot12: Vec<(String, u32)>,
    /// Unrounded per-group expectations in the same order.
    pub per_group_expected: Vec<f64>,
}

impl ProjectionRow {
    pub fn count_for(&self, strategy: usize) -> u32 {
        self.per_group_at_eot12[strategy].1
    }
}

/// Expected per-group count of patients past their outcome visit at month `t`.
pub fn expected_at_eot12(design: &TrialDesign, schedule: &RecruitmentSchedule, strategy: usize, t: f64) -> f64 {
    let arm = &design.strategies[strategy];
    let share = design.allocation_weight(design.groups().iter().position(|g| g.strategy as usize == strategy).unwrap());
    let c: f64 = arm.lag_distribution.iter().map(|l| l.weight * schedule.at(t - design.weeks_to_months(l.weeks))).sum();
    c * share * (1.0 - design.ltfu)
}

/// Projects patients at end of treatment + 12 weeks for each strategy at month `t`.
pub fn project_eot12(design: &TrialDesign, schedule: &RecruitmentSchedule, t: f64) -> ProjectionRow {
    let mut per_group = Vec::with_capacity(design.strategies.len());
    let mut expected = Vec::with_capacity(design.strategies.len());
    let mut total = 0;
    for (s, arm) in design.strategies.iter().enumerate() {
        let e = expected_at_eot12(design, schedule, s, t);
        let n = e.round() as u32;
        total += n * design.multiplicity(s);
        per_group.push((arm.label.clone(), n));
        expected.push(e);
    }
    ProjectionRow {
        month: t,
        total_recruited: schedule.at(t).round() as u32,
        total_at_eot12: total,
        per_group_at_eot12: per_group,
        per_group_expected: expected,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSpec {
    pub range: CureRateRange,
    /// Ascending average-stop-probability thresholds.
    pub thresholds: Vec<f64>,
    /// Patients a monitored group needs before the early analysis.
    pub min_early_n: u32,
}

impl Default for TimingSpec {
    fn default() -> Self {
        Self { range: CureRateRange::default(), thresholds: vec![0.3, 0.5, 0.7], min_early_n: 5 }
    }
}

impl TimingSpec {
    pub fn validate(&self) -> Result<()> {
        self.range.validate()?;
        if self.thresholds.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Validation("timing thresholds must be sorted ascending".into()));
        }
        if self.thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Validation("timing thresholds must be probabilities".into()));
        }
        Ok(())
    }
}

/// A candidate interim analysis: projected counts and the average stop
/// probability of each monitored strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisPoint {
    pub month: u32,
    pub projection: ProjectionRow,
    /// `(strategy label, average stop probability)` for monitored strategies.
    pub avg_stop: Vec<(String, f64)>,
}

impl AnalysisPoint {
    pub fn max_avg_stop(&self) -> f64 {
        self.avg_stop.iter().map(|p| p.1).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdHit {
    pub threshold: f64,
    /// `None` when the threshold is not reached within the horizon.
    pub point: Option<AnalysisPoint>,
}

impl ThresholdHit {
    pub fn month(&self) -> Option<u32> {
        self.point.as_ref().map(|p| p.month)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingResult {
    pub early: Option<AnalysisPoint>,
    pub hits: Vec<ThresholdHit>,
    pub horizon: u32,
}

impl TimingResult {
    /// Analysis months in order: the early analysis, then each reached threshold (deduplicated).
    pub fn analysis_months(&self) -> Vec<u32> {
        let mut m: Vec<u32> =
            self.early.iter().map(|p| p.month).chain(self.hits.iter().filter_map(|h| h.month())).collect();
        m.sort_unstable();
        m.dedup();
        m
    }

    pub fn points(&self) -> Vec<&AnalysisPoint> {
        let mut v: Vec<&AnalysisPoint> =
            self.early.iter().chain(self.hits.iter().filter_map(|h| h.point.as_ref())).collect();
        v.sort_by_key(|p| p.month);
        v.dedup_by_key(|p| p.month);
        v
    }
}

/// Evaluates projections and average stop probabilities month by month.
pub struct TimingEvaluator<'a> {
    design: &'a TrialDesign,
    schedule: &'a RecruitmentSchedule,
    rule: &'a StoppingRule,
    range: CureRateRange,
    table: BoundaryTable,
    cache: HashMap<u32, f64>,
}

impl<'a> TimingEvaluator<'a> {
    pub fn new(
        design: &'a TrialDesign,
        schedule: &'a RecruitmentSchedule,
        rule: &'a StoppingRule,
        range: CureRateRange,
    ) -> Result<Self> {
        range.validate()?;
        let table = boundary(rule, design.total_n.max(1))?;
        Ok(Self { design, schedule, rule, range, table, cache: HashMap::new() })
    }

    pub fn avg_stop(&mut self, n: u32) -> Result<f64> {
        if let Some(v) = self.cache.get(&n) {
            return Ok(*v);
        }
        let v = avg_stop_prob_with(&self.table, self.rule.prior, n, &self.range)?;
        self.cache.insert(n, v);
        Ok(v)
    }

    pub fn point(&mut self, month: u32) -> Result<AnalysisPoint> {
        let projection = project_eot12(self.design, self.schedule, month as f64);
        let mut avg_stop = Vec::new();
        for (s, arm) in self.design.strategies.iter().enumerate() {
            if arm.monitored {
                let n = projection.count_for(s);
                avg_stop.push((arm.label.clone(), self.avg_stop(n)?));
            }
        }
        Ok(AnalysisPoint { month, projection, avg_stop })
    }

    /// Last month with any change in outcome data.
    pub fn horizon(&self) -> u32 {
        let max_lag = self.design.strategies.iter().map(|s| s.max_lag_weeks()).fold(0.0, f64::max);
        (self.schedule.end_month() + self.design.weeks_to_months(max_lag)).ceil() as u32
    }
}

/// Earliest months at which some monitored strategy reaches each average
/// stop-probability threshold, preceded by an early analysis once any
/// monitored group has `min_early_n` patients with outcomes.
pub fn timing_search(
    design: &TrialDesign,
    schedule: &RecruitmentSchedule,
    rule: &StoppingRule,
    spec: &TimingSpec,
) -> Result<TimingResult> {
    spec.validate()?;
    let mut eval = TimingEvaluator::new(design, schedule, rule, spec.range)?;
    let horizon = eval.horizon();
    let monitored: Vec<usize> = (0..design.strategies.len()).filter(|&s| design.strategies[s].monitored).collect();

    let mut points = Vec::with_capacity(horizon as usize + 1);
    for m in 0..=horizon {
        points.push(eval.point(m)?);
    }
    let early = points
        .iter()
        .find(|p| monitored.iter().any(|&s| p.projection.count_for(s) >= spec.min_early_n.max(1)))
        .cloned();
    let hits = spec
        .thresholds
        .iter()
        .map(|&t| {
            let point = points
                .iter()
                .find(|p| {
                    monitored.iter().zip(p.avg_stop.iter()).any(|(&s, (_, a))| p.projection.count_for(s) > 0 && *a >= t)
                })
                .cloned();
            ThresholdHit { threshold: t, point }
        })
        .collect();
    Ok(TimingResult { early, hits, horizon })
}
