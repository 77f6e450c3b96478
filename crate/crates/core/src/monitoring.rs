//! The futility stopping rule applied to each monitored group.
//!
//! A group stops when `Pr(true cure rate < cure_threshold | data)` exceeds
//! `posterior_prob_threshold` (strictly). Everything else here derives from
//! that rule: minimum-failure boundaries, exact stop probabilities for a given
//! true cure rate, averages over a range of cure rates, and the
//! predictive-probability variant.

use serde::{Deserialize, Serialize};

use crate::num::{beta_binom_tail_geq, binom_tail_geq, integrate, reg_inc_beta, BetaParams, BinomialParams};
use crate::priors::posterior_update;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingRule {
    pub cure_threshold: f64,
    pub posterior_prob_threshold: f64,
    pub prior: BetaParams,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            cure_threshold: 0.9,
            posterior_prob_threshold: 0.95,
            prior: BetaParams::new(4.5, 0.5).expect("valid shapes"),
        }
    }
}

impl StoppingRule {
    pub fn new(cure_threshold: f64, posterior_prob_threshold: f64, prior: BetaParams) -> Result<Self> {
        let rule = Self { cure_threshold, posterior_prob_threshold, prior };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cure_threshold > 0.0 && self.cure_threshold < 1.0) {
            return Err(Error::Validation(format!("cure_threshold {} must lie in (0, 1)", self.cure_threshold)));
        }
        if !(self.posterior_prob_threshold > 0.5 && self.posterior_prob_threshold < 1.0) {
            return Err(Error::Validation(format!(
                "posterior_prob_threshold {} must lie in (0.5, 1)",
                self.posterior_prob_threshold
            )));
        }
        Ok(())
    }
}

/// Outcome data for one group (or stratum) at an analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupState {
    pub analysed: u32,
    pub failures: u32,
}

impl GroupState {
    pub fn new(analysed: u32, failures: u32) -> Result<Self> {
        if failures > analysed {
            return Err(Error::Validation(format!("{failures} failures among {analysed} analysed")));
        }
        Ok(Self { analysed, failures })
    }

    pub fn successes(&self) -> u32 {
        self.analysed - self.failures
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopDecision {
    pub stop: bool,
    pub posterior_prob: f64,
}

/// Posterior probability that the cure rate is below the threshold, and
/// whether it strictly exceeds the stopping threshold.
pub fn should_stop(rule: &StoppingRule, state: GroupState) -> Result<StopDecision> {
    let post = posterior_update(rule.prior, state.successes() as u64, state.failures as u64);
    let posterior_prob = reg_inc_beta(post, rule.cure_threshold)?;
    Ok(StopDecision { stop: posterior_prob > rule.posterior_prob_threshold, posterior_prob })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub analysed: u32,
    /// Least number of failures that stops the group, if any `f <= analysed` does.
    pub min_failures: Option<u32>,
}

/// Minimum failures to stop for `n = 1..=max_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTable {
    pub rows: Vec<BoundaryRow>,
}

impl BoundaryTable {
    pub fn max_n(&self) -> u32 {
        self.rows.len() as u32
    }

    /// Boundary at `n`; `None` for `n = 0`, beyond the table, or where no count stops.
    pub fn min_failures(&self, n: u32) -> Option<u32> {
        if n == 0 {
            return None;
        }
        self.rows.get(n as usize - 1).and_then(|r| r.min_failures)
    }

    /// Whether `failures` among `n` analysed meets the boundary.
    pub fn stops(&self, n: u32, failures: u32) -> bool {
        self.min_failures(n).is_some_and(|b| failures >= b)
    }
}

fn min_failures_at(rule: &StoppingRule, n: u32, from: u32) -> Result<Option<u32>> {
    // posterior tail is increasing in failures: bisect on [from, n]
    if !should_stop(rule, GroupState { analysed: n, failures: n })?.stop {
        return Ok(None);
    }
    let (mut lo, mut hi) = (from.min(n), n);
    if should_stop(rule, GroupState { analysed: n, failures: lo })?.stop {
        return Ok(Some(lo));
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if should_stop(rule, GroupState { analysed: n, failures: mid })?.stop {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Computes the stopping boundary for every `n` in `1..=max_n`.
pub fn boundary(rule: &StoppingRule, max_n: u32) -> Result<BoundaryTable> {
    if max_n == 0 {
        return Err(Error::Validation("max_n must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(max_n as usize);
    let mut last = 0;
    for n in 1..=max_n {
        // adding a success never lowers the boundary
        let min_failures = min_failures_at(rule, n, last)?;
        if let Some(b) = min_failures {
            last = b;
        }
        rows.push(BoundaryRow { analysed: n, min_failures });
    }
    Ok(BoundaryTable { rows })
}

/// Probability of stopping at `n` analysed patients when the true cure rate is `true_cure`,
/// given a precomputed boundary.
pub fn stop_prob_with(table: &BoundaryTable, n: u32, true_cure: f64) -> Result<f64> {
    match table.min_failures(n) {
        None => Ok(0.0),
        Some(b) => binom_tail_geq(BinomialParams::new(n as u64, 1.0 - true_cure)?, b as u64),
    }
}

pub fn stop_prob(rule: &StoppingRule, n: u32, true_cure: f64) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let table = boundary(rule, n)?;
    stop_prob_with(&table, n, true_cure)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    Uniform,
    /// The monitoring prior density renormalised to the range.
    PriorTruncated,
}

/// Range of cure rates a genuinely inferior group is assumed to have.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CureRateRange {
    pub lower: f64,
    pub upper: f64,
    pub weighting: Weighting,
}

impl Default for CureRateRange {
    fn default() -> Self {
        Self { lower: 0.6, upper: 0.9, weighting: Weighting::Uniform }
    }
}

impl CureRateRange {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.lower && self.lower < self.upper && self.upper <= 1.0) {
            return Err(Error::Validation(format!(
                "cure-rate range [{}, {}] must satisfy 0 <= lower < upper <= 1",
                self.lower, self.upper
            )));
        }
        Ok(())
    }
}

const QUAD_TOL: f64 = 1e-9;

/// Stop probability at `n` averaged over the cure-rate range.
pub fn avg_stop_prob_with(table: &BoundaryTable, prior: BetaParams, n: u32, range: &CureRateRange) -> Result<f64> {
    range.validate()?;
    let Some(b) = table.min_failures(n) else {
        return Ok(0.0);
    };
    let sp =
        |p: f64| binom_tail_geq(BinomialParams { n: n as u64, q: (1.0 - p).clamp(0.0, 1.0) }, b as u64).unwrap_or(0.0);
    let (lo, hi) = (range.lower, range.upper);
    Ok(match range.weighting {
        Weighting::Uniform => integrate(sp, lo, hi, QUAD_TOL) / (hi - lo),
        Weighting::PriorTruncated => {
            let mass = reg_inc_beta(prior, hi)? - reg_inc_beta(prior, lo)?;
            if mass <= 0.0 {
                return Err(Error::Domain("prior has no mass on the cure-rate range".into()));
            }
            integrate(|p| sp(p) * prior.pdf(p), lo, hi, QUAD_TOL) / mass
        }
    })
}

pub fn avg_stop_prob(rule: &StoppingRule, n: u32, range: &CureRateRange) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let table = boundary(rule, n)?;
    avg_stop_prob_with(&table, rule.prior, n, range)
}

/// Probability, given the current data, that the group would meet the
/// stopping boundary once `total_n` patients are analysed.
pub fn predictive_stop_prob(rule: &StoppingRule, state: GroupState, total_n: u32) -> Result<f64> {
    if state.analysed > total_n {
        return Err(Error::Validation(format!("{} analysed exceeds total {total_n}", state.analysed)));
    }
    let table = boundary(rule, total_n.max(1))?;
    predictive_stop_prob_with(&table, rule.prior, state, total_n)
}

pub fn predictive_stop_prob_with(
    table: &BoundaryTable,
    prior: BetaParams,
    state: GroupState,
    total_n: u32,
) -> Result<f64> {
    let bound = match table.min_failures(total_n) {
        Some(b) => b,
        // a relaxed rule can stop even with zero failures; only n = 0 has no boundary
        None => return Err(Error::Unreachable(total_n)),
    };
    if state.failures >= bound {
        return Ok(1.0);
    }
    let remaining = total_n - state.analysed;
    let needed = bound - state.failures;
    if needed > remaining {
        return Ok(0.0);
    }
    // future failures: the failure probability has posterior beta(b + f, a + s)
    let post = posterior_update(prior, state.successes() as u64, state.failures as u64);
    let fail_post = BetaParams::new(post.b(), post.a())?;
    beta_binom_tail_geq(remaining as u64, fail_post, needed as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumCheck {
    pub combined: StopDecision,
    pub strata: Vec<StopDecision>,
}

/// Applies the rule to the combined group and separately to each stratum.
pub fn stratum_check(rule: &StoppingRule, combined: GroupState, strata: &[GroupState]) -> Result<StratumCheck> {
    let n: u32 = strata.iter().map(|s| s.analysed).sum();
    let f: u32 = strata.iter().map(|s| s.failures).sum();
    if n != combined.analysed || f != combined.failures {
        return Err(Error::Validation(format!(
            "strata sum to ({n}, {f}) but combined group is ({}, {})",
            combined.analysed, combined.failures
        )));
    }
    Ok(StratumCheck {
        combined: should_stop(rule, combined)?,
        strata: strata.iter().map(|s| should_stop(rule, *s)).collect::<Result<_>>()?,
    })
}

/// Cure rates whose largest stop probability within a row is reported.
pub const TABLE_MAX_CURE_RATES: [f64; 2] = [0.9, 0.95];
/// Cure rates whose smallest stop probability within a row is reported.
pub const TABLE_MIN_CURE_RATES: [f64; 4] = [0.9, 0.8, 0.7, 0.6];

/// One line of the boundary/probability table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryReportRow {
    /// Analysed count, or a range like `3-7` in the grouped layout.
    pub analysed: String,
    pub min_failures: Option<u32>,
    /// Stop probabilities at the largest count of the row, cure rates 0.9 and 0.95.
    pub p_max: [f64; 2],
    /// Stop probabilities at the smallest count of the row, cure rates 0.9, 0.8, 0.7 and 0.6.
    pub p_min: [f64; 4],
}

fn report_row(table: &BoundaryTable, first: u32, last: u32, min_failures: Option<u32>) -> Result<BoundaryReportRow> {
    let mut p_max = [0.0; 2];
    for (slot, &cure) in p_max.iter_mut().zip(&TABLE_MAX_CURE_RATES) {
        *slot = stop_prob_with(table, last, cure)?;
    }
    let mut p_min = [0.0; 4];
    for (slot, &cure) in p_min.iter_mut().zip(&TABLE_MIN_CURE_RATES) {
        *slot = stop_prob_with(table, first, cure)?;
    }
    let analysed = if first == last { first.to_string() } else { format!("{first}-{last}") };
    Ok(BoundaryReportRow { analysed, min_failures, p_max, p_min })
}

/// One row per analysed count.
pub fn boundary_report(rule: &StoppingRule, max_n: u32) -> Result<Vec<BoundaryReportRow>> {
    let table = boundary(rule, max_n)?;
    table.rows.iter().map(|r| report_row(&table, r.analysed, r.analysed, r.min_failures)).collect()
}

/// Rows grouped by equal boundary, also split after each `split_at` count.
///
/// Within a group the probability of stopping grows with `n`, so the maxima
/// come from the largest `n` and the minima from the smallest.
pub fn boundary_report_grouped(rule: &StoppingRule, max_n: u32, split_at: &[u32]) -> Result<Vec<BoundaryReportRow>> {
    let table = boundary(rule, max_n)?;
    let mut out = Vec::new();
    let mut start: Option<(u32, u32)> = None;
    for row in &table.rows {
        let n = row.analysed;
        if let Some((first, b)) = start {
            if row.min_failures == Some(b) && !split_at.contains(&(n - 1)) {
                continue;
            }
            out.push(report_row(&table, first, n - 1, Some(b))?);
        }
        start = row.min_failures.map(|c| (n, c));
    }
    if let Some((first, b)) = start {
        out.push(report_row(&table, first, max_n, Some(b))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r3(x: f64) -> f64 {
        (x * 1000.0).round() / 1000.0
    }

    #[test]
    fn prior_alone_does_not_stop() {
        let d = should_stop(&StoppingRule::default(), GroupState::new(0, 0).unwrap()).unwrap();
        assert!(!d.stop);
        assert_eq!((d.posterior_prob * 100.0).round() / 100.0, 0.34);
    }

    #[test]
    fn full_group_thirteen_failures() {
        let rule = StoppingRule::default();
        let d13 = should_stop(&rule, GroupState::new(78, 13).unwrap()).unwrap();
        assert!(d13.stop && d13.posterior_prob > 0.95);
        let d12 = should_stop(&rule, GroupState::new(78, 12).unwrap()).unwrap();
        assert!(!d12.stop && d12.posterior_prob <= 0.95);
    }

    #[test]
    fn boundary_known_rows() {
        let t = boundary(&StoppingRule::default(), 78).unwrap();
        assert_eq!(t.min_failures(1), None);
        assert_eq!(t.min_failures(2), Some(2));
        for n in 3..=7 {
            assert_eq!(t.min_failures(n), Some(3));
        }
        for n in 72..=78 {
            assert_eq!(t.min_failures(n), Some(13));
        }
    }

    #[test]
    fn stop_probabilities() {
        let rule = StoppingRule::default();
        assert_eq!(r3(stop_prob(&rule, 7, 0.9).unwrap()), 0.026);
        assert_eq!(r3(stop_prob(&rule, 21, 0.6).unwrap()), 0.904);
        assert_eq!(stop_prob(&rule, 5, 1.0).unwrap(), 0.0);
        assert_eq!(stop_prob(&rule, 1, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn first_analysis_averages() {
        let rule = StoppingRule::default();
        let range = CureRateRange::default();
        for (n, want) in [(5, 0.124), (3, 0.021), (2, 0.070)] {
            assert_eq!(r3(avg_stop_prob(&rule, n, &range).unwrap()), want, "n={n}");
        }
    }

    #[test]
    fn uniform_average_on_two_equals_mean_square() {
        // boundary 2 at n = 2: stop iff both fail, so the average is E[(1-p)^2]
        let rule = StoppingRule::default();
        let v = avg_stop_prob(&rule, 2, &CureRateRange::default()).unwrap();
        let exact = (0.4f64.powi(3) - 0.1f64.powi(3)) / 3.0 / 0.3;
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn prior_weighting_is_lower_than_uniform() {
        // the prior density rises towards 0.9 where stopping is unlikely
        let rule = StoppingRule::default();
        let u = avg_stop_prob(&rule, 20, &CureRateRange::default()).unwrap();
        let w = avg_stop_prob(&rule, 20, &CureRateRange { weighting: Weighting::PriorTruncated, ..Default::default() })
            .unwrap();
        assert!(w < u);
    }

    #[test]
    fn predictive_edges() {
        let rule = StoppingRule::default();
        assert_eq!(predictive_stop_prob(&rule, GroupState::new(78, 13).unwrap(), 78).unwrap(), 1.0);
        assert_eq!(predictive_stop_prob(&rule, GroupState::new(78, 0).unwrap(), 78).unwrap(), 0.0);
        assert!(predictive_stop_prob(&rule, GroupState::new(79, 0).unwrap(), 78).is_err());
        assert!(matches!(predictive_stop_prob(&rule, GroupState::new(0, 0).unwrap(), 1), Err(Error::Unreachable(1))));
    }

    #[test]
    fn strata() {
        let rule = StoppingRule::default();
        let s = stratum_check(
            &rule,
            GroupState::new(78, 13).unwrap(),
            &[GroupState::new(39, 13).unwrap(), GroupState::new(39, 0).unwrap()],
        )
        .unwrap();
        assert!(s.combined.stop && s.strata[0].stop && !s.strata[1].stop);

        let z = GroupState::new(0, 0).unwrap();
        let s = stratum_check(&rule, z, &[z, z]).unwrap();
        assert!(!s.combined.stop && s.strata.iter().all(|d| !d.stop));

        let half = GroupState::new(39, 13).unwrap();
        let s = stratum_check(&rule, GroupState::new(78, 26).unwrap(), &[half, half]).unwrap();
        assert!(s.combined.stop && s.strata.iter().all(|d| d.stop));

        assert!(stratum_check(&rule, GroupState::new(78, 13).unwrap(), &[half, half]).is_err());
    }

    #[test]
    fn grouped_rows_merge_equal_boundaries() {
        let rows = boundary_report_grouped(&StoppingRule::default(), 78, &[39]).unwrap();
        let labels: Vec<_> = rows.iter().map(|r| r.analysed.as_str()).collect();
        assert_eq!(
            labels,
            [
                "2", "3-7", "8-13", "14-20", "21-26", "27-33", "34-39", "40-41", "42-48", "49-55", "56-63", "64-71",
                "72-78"
            ]
        );
    }

    #[test]
    fn validation() {
        assert!(GroupState::new(3, 4).is_err());
        assert!(StoppingRule::new(0.9, 0.4, BetaParams::new(1.0, 1.0).unwrap()).is_err());
        assert!(CureRateRange { lower: 0.9, upper: 0.6, weighting: Weighting::Uniform }.validate().is_err());
        assert!(boundary(&StoppingRule::default(), 0).is_err());
    }
}
