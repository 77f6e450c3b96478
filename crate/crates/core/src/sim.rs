//! Monte Carlo simulation of sequential futility monitoring.
//!
//! Each replicate simulates individual patients: randomisation time, stratum,
//! group, outcome lag and cure. At every scheduled analysis the monitored open
//! groups are tested on the patients whose outcome is known by then; stopped
//! groups are closed and later patients are randomised among the rest.
//! Replicate `i` draws from stream `(seed, i)` and results are combined by
//! integer counts, so reports do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{randomize, timing_search, OpenGroups, RecruitmentSchedule, TimingResult, TimingSpec, TrialDesign};
use crate::monitoring::{boundary, BoundaryTable, CureRateRange, StoppingRule};
use crate::num::{rng_stream, RngStream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Accrual {
    /// Randomisation times are i.i.d. draws from the schedule, sorted.
    #[default]
    Stochastic,
    /// Patient `i` arrives when the schedule reaches `i + 1/2`.
    Expected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoringScenario {
    pub design: TrialDesign,
    pub schedule: RecruitmentSchedule,
    pub rule: StoppingRule,
    pub analysis_months: Vec<u32>,
    /// True cure probability per group, indexed like [`TrialDesign::groups`].
    pub true_cure: Vec<f64>,
    pub replicates: u32,
    pub seed: u64,
    /// Probability that a patient belongs to the first stratum.
    pub stratum_prob: f64,
    pub accrual: Accrual,
    pub timing: TimingSpec,
}

impl MonitoringScenario {
    /// Default design and schedule, analyses at months 7, 10, 13 and 18,
    /// every group curing with probability `cure`.
    pub fn with_uniform_cure(cure: f64) -> Self {
        let design = TrialDesign::default();
        let groups = design.groups().len();
        Self {
            design,
            schedule: RecruitmentSchedule::default(),
            rule: StoppingRule::default(),
            analysis_months: vec![7, 10, 13, 18],
            true_cure: vec![cure; groups],
            replicates: 5000,
            seed: 20190930,
            stratum_prob: 0.5,
            accrual: Accrual::Stochastic,
            timing: TimingSpec::default(),
        }
    }

    /// Sets the cure probability of every group receiving `strategy`.
    pub fn set_strategy_cure(&mut self, strategy: usize, cure: f64) {
        for (i, g) in self.design.groups().iter().enumerate() {
            if g.strategy as usize == strategy {
                self.true_cure[i] = cure;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        self.schedule.validate_for(&self.design)?;
        self.rule.validate()?;
        self.timing.validate()?;
        if self.analysis_months.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("analysis months must be strictly ascending".into()));
        }
        if self.true_cure.len() != self.design.groups().len() {
            return Err(Error::Validation(format!(
                "expected {} group cure rates, got {}",
                self.design.groups().len(),
                self.true_cure.len()
            )));
        }
        if self.true_cure.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Validation("true cure rates must be probabilities".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Validation("replicates must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.stratum_prob) {
            return Err(Error::Validation("stratum_prob must be a probability".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStopReport {
    pub label: String,
    pub strategy: String,
    pub monitored: bool,
    pub true_cure: f64,
    /// Probability the group has stopped by each analysis.
    pub cumulative_stop: Vec<f64>,
    /// Binomial standard error of each entry of `cumulative_stop`.
    pub mc_se: Vec<f64>,
    /// Mean analysis month among replicates where the group stopped.
    pub mean_stop_month: Option<f64>,
    /// Mean patients with outcome data at each analysis.
    pub mean_analysed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopReport {
    pub analysis_months: Vec<u32>,
    pub replicates: u32,
    pub seed: u64,
    pub groups: Vec<GroupStopReport>,
    /// Largest standard error in the report.
    pub mc_se: f64,
    /// Mean number of patients who could not be randomised because every
    /// group in their stratum had closed.
    pub mean_unrandomised: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Tally {
    /// stopped_at[g][k]: replicates where group g stopped exactly at analysis k
    stopped_at: Vec<Vec<u64>>,
    analysed: Vec<Vec<u64>>,
    unrandomised: u64,
}

impl Tally {
    fn zero(groups: usize, analyses: usize) -> Self {
        Self { stopped_at: vec![vec![0; analyses]; groups], analysed: vec![vec![0; analyses]; groups], unrandomised: 0 }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.stopped_at.iter_mut().zip(other.stopped_at) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.analysed.iter_mut().zip(other.analysed) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.unrandomised += other.unrandomised;
        self
    }
}

struct Patient {
    group: usize,
    outcome_month: f64,
    failed: bool,
}

fn arrival_times(scenario: &MonitoringScenario, rng: &mut RngStream) -> Vec<f64> {
    let n = scenario.design.total_n as usize;
    let total = scenario.schedule.total();
    match scenario.accrual {
        Accrual::Expected => (0..n).map(|i| scenario.schedule.time_of((i as f64 + 0.5) / n as f64 * total)).collect(),
        Accrual::Stochastic => {
            let mut u: Vec<f64> = (0..n).map(|_| rng.uniform() * total).collect();
            u.sort_by(f64::total_cmp);
            u.into_iter().map(|c| scenario.schedule.time_of(c)).collect()
        }
    }
}

fn run_replicate(scenario: &MonitoringScenario, table: &BoundaryTable, replicate: u64) -> Result<Tally> {
    let design = &scenario.design;
    let groups = design.groups();
    let k_max = scenario.analysis_months.len();
    let mut rng = rng_stream(scenario.seed, replicate);
    let times = arrival_times(scenario, &mut rng);

    let mut open = OpenGroups::all(design);
    let mut tally = Tally::zero(groups.len(), k_max);
    let mut patients: Vec<Vec<Patient>> = (0..groups.len()).map(|_| Vec::new()).collect();
    let mut next = 0usize;

    let analyse = |k: usize, patients: &[Vec<Patient>], open: &mut OpenGroups, tally: &mut Tally| {
        let month = scenario.analysis_months[k] as f64;
        for (g, key) in groups.iter().enumerate() {
            let (mut n, mut f) = (0u32, 0u32);
            for p in &patients[g] {
                if p.outcome_month <= month {
                    n += 1;
                    f += p.failed as u32;
                }
            }
            tally.analysed[g][k] += n as u64;
            let monitored = design.strategies[key.strategy as usize].monitored;
            let still_open = open.is_open(g, 0) || open.is_open(g, 1);
            if monitored && still_open && table.stops(n, f) {
                open.close(g);
                tally.stopped_at[g][k] += 1;
            }
        }
    };

    for t in times {
        while next < k_max && t > scenario.analysis_months[next] as f64 {
            analyse(next, &patients, &mut open, &mut tally);
            next += 1;
        }
        let stratum = if rng.bernoulli(scenario.stratum_prob) { 0 } else { 1 };
        let assignment = match randomize(design, stratum, &open, &mut rng) {
            Ok(a) => a,
            Err(Error::Exhausted(_)) => {
                tally.unrandomised += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let arm = &design.strategies[assignment.key.strategy as usize];
        let lag = arm.draw_lag(&mut rng);
        let failed = !rng.bernoulli(scenario.true_cure[assignment.group]);
        patients[assignment.group].push(Patient {
            group: assignment.group,
            outcome_month: t + design.weeks_to_months(lag),
            failed,
        });
    }
    while next < k_max {
        analyse(next, &patients, &mut open, &mut tally);
        next += 1;
    }
    debug_assert!(patients.iter().enumerate().all(|(g, ps)| ps.iter().all(|p| p.group == g)));
    Ok(tally)
}

fn boundary_for(scenario: &MonitoringScenario) -> Result<BoundaryTable> {
    boundary(&scenario.rule, scenario.design.total_n.max(1))
}

/// Runs the scenario and reports cumulative stop probabilities per group and analysis.
pub fn simulate_monitoring(scenario: &MonitoringScenario) -> Result<StopReport> {
    scenario.validate()?;
    let table = boundary_for(scenario)?;
    let groups = scenario.design.groups();
    let k_max = scenario.analysis_months.len();
    let tally = (0..scenario.replicates as u64)
        .into_par_iter()
        .map(|r| run_replicate(scenario, &table, r))
        .try_reduce(|| Tally::zero(groups.len(), k_max), |a, b| Ok(a.merge(b)))?;

    let reps = scenario.replicates as f64;
    let mut max_se: f64 = 0.0;
    let mut out = Vec::with_capacity(groups.len());
    for (g, key) in groups.iter().enumerate() {
        let mut cum = 0u64;
        let mut cumulative = Vec::with_capacity(k_max);
        let mut se = Vec::with_capacity(k_max);
        let mut month_sum = 0u64;
        for k in 0..k_max {
            cum += tally.stopped_at[g][k];
            month_sum += tally.stopped_at[g][k] * scenario.analysis_months[k] as u64;
            let p = cum as f64 / reps;
            let s = (p * (1.0 - p) / reps).sqrt();
            max_se = max_se.max(s);
            cumulative.push(p);
            se.push(s);
        }
        let arm = &scenario.design.strategies[key.strategy as usize];
        out.push(GroupStopReport {
            label: scenario.design.group_label(key),
            strategy: arm.label.clone(),
            monitored: arm.monitored,
            true_cure: scenario.true_cure[g],
            cumulative_stop: cumulative,
            mc_se: se,
            mean_stop_month: (cum > 0).then(|| month_sum as f64 / cum as f64),
            mean_analysed: tally.analysed[g].iter().map(|&n| n as f64 / reps).collect(),
        });
    }
    Ok(StopReport {
        analysis_months: scenario.analysis_months.clone(),
        replicates: scenario.replicates,
        seed: scenario.seed,
        groups: out,
        mc_se: max_se,
        mean_unrandomised: tally.unrandomised as f64 / reps,
    })
}

/// Cumulative stop probabilities for a single group analysed at fixed counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLookReport {
    pub looks: Vec<u32>,
    pub cumulative_stop: Vec<f64>,
    pub mc_se: Vec<f64>,
}

/// Simulates one group whose patients accumulate and are analysed after
/// `looks[k]` outcomes, stopping at the first look that meets the boundary.
pub fn simulate_group_looks(
    rule: &StoppingRule,
    looks: &[u32],
    true_cure: f64,
    replicates: u32,
    seed: u64,
) -> Result<GroupLookReport> {
    if looks.is_empty() || looks.windows(2).any(|w| w[1] <= w[0]) || looks[0] == 0 {
        return Err(Error::Validation("looks must be positive and strictly ascending".into()));
    }
    if replicates == 0 {
        return Err(Error::Validation("replicates must be at least 1".into()));
    }
    crate::num::BinomialParams::new(1, true_cure)?;
    let table = boundary(rule, *looks.last().unwrap())?;
    let counts = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_stream(seed, r);
            let mut stopped = vec![0u64; looks.len()];
            let (mut n, mut f) = (0u32, 0u32);
            for (k, &look) in looks.iter().enumerate() {
                while n < look {
                    n += 1;
                    f += !rng.bernoulli(true_cure) as u32;
                }
                if table.stops(n, f) {
                    stopped[k] = 1;
                    break;
                }
            }
            stopped
        })
        .reduce(
            || vec![0u64; looks.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let reps = replicates as f64;
    let mut cum = 0;
    let (mut cumulative, mut se) = (Vec::new(), Vec::new());
    for c in counts {
        cum += c;
        let p = cum as f64 / reps;
        cumulative.push(p);
        se.push((p * (1.0 - p) / reps).sqrt());
    }
    Ok(GroupLookReport { looks: looks.to_vec(), cumulative_stop: cumulative, mc_se: se })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecruitmentScanRow {
    pub multiplier: f64,
    pub timing: TimingResult,
    /// Simulation at the analysis months found for this schedule.
    pub report: Option<StopReport>,
}

/// Re-plans the analyses and reruns the simulation for each recruitment-rate multiplier.
pub fn scan_recruitment(scenario: &MonitoringScenario, rate_multipliers: &[f64]) -> Result<Vec<RecruitmentScanRow>> {
    scenario.validate()?;
    rate_multipliers
        .iter()
        .map(|&m| {
            let schedule = scenario.schedule.scale_rate(m)?;
            let timing = timing_search(&scenario.design, &schedule, &scenario.rule, &scenario.timing)?;
            let months = timing.analysis_months();
            let report = if months.is_empty() {
                None
            } else {
                let s = MonitoringScenario { schedule, analysis_months: months, ..scenario.clone() };
                Some(simulate_monitoring(&s)?)
            };
            Ok(RecruitmentScanRow { multiplier: m, timing, report })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CureFloorRow {
    pub floor: f64,
    pub timing: TimingResult,
}

/// Re-plans the analyses with the lower end of the inferior cure-rate range set to each floor.
pub fn scan_cure_floor(scenario: &MonitoringScenario, floors: &[f64]) -> Result<Vec<CureFloorRow>> {
    scenario.validate()?;
    floors
        .iter()
        .map(|&floor| {
            let range = CureRateRange { lower: floor, ..scenario.timing.range };
            if !(floor < range.upper) {
                return Err(Error::Validation(format!("cure floor {floor} must be below {}", range.upper)));
            }
            let spec = TimingSpec { range, ..scenario.timing.clone() };
            let timing = timing_search(&scenario.design, &scenario.schedule, &scenario.rule, &spec)?;
            Ok(CureFloorRow { floor, timing })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monitoring::stop_prob;

    #[test]
    fn perfect_cure_never_stops() {
        let mut s = MonitoringScenario::with_uniform_cure(1.0);
        s.replicates = 200;
        let r = simulate_monitoring(&s).unwrap();
        assert!(r.groups.iter().all(|g| g.cumulative_stop.iter().all(|&p| p == 0.0)));
        assert_eq!(r.mean_unrandomised, 0.0);
    }

    #[test]
    fn controls_are_never_stopped() {
        let mut s = MonitoringScenario::with_uniform_cure(0.3);
        s.replicates = 200;
        let r = simulate_monitoring(&s).unwrap();
        for g in r.groups.iter().filter(|g| !g.monitored) {
            assert_eq!(*g.cumulative_stop.last().unwrap(), 0.0);
        }
        for g in r.groups.iter().filter(|g| g.monitored) {
            assert!(*g.cumulative_stop.last().unwrap() > 0.9);
        }
    }

    #[test]
    fn single_look_matches_analytic() {
        let rule = StoppingRule::default();
        let r = simulate_group_looks(&rule, &[7], 0.6, 40_000, 11).unwrap();
        let exact = stop_prob(&rule, 7, 0.6).unwrap();
        assert!((r.cumulative_stop[0] - exact).abs() < 3.0 * r.mc_se[0]);
    }

    #[test]
    fn reproducible() {
        let mut s = MonitoringScenario::with_uniform_cure(0.8);
        s.replicates = 50;
        assert_eq!(simulate_monitoring(&s).unwrap(), simulate_monitoring(&s).unwrap());
    }

    #[test]
    fn scenario_validation() {
        let mut s = MonitoringScenario::with_uniform_cure(0.9);
        s.analysis_months = vec![10, 7];
        assert!(s.validate().is_err());
        let mut s = MonitoringScenario::with_uniform_cure(0.9);
        s.true_cure.pop();
        assert!(s.validate().is_err());
        assert!(simulate_group_looks(&StoppingRule::default(), &[5, 5], 0.5, 10, 0).is_err());
    }
}
