use proptest::prelude::*;

use trialmon::design::{allocation_probs, default_design, project_eot12, OpenGroups, RecruitmentSchedule, TrialDesign};
use trialmon::monitoring::{
    avg_stop_prob, boundary, predictive_stop_prob, should_stop, stop_prob, CureRateRange, GroupState, StoppingRule,
    Weighting,
};
use trialmon::num::{beta_binom_tail_geq, binom_cdf, binom_tail_geq, reg_inc_beta, BetaParams, BinomialParams};
use trialmon::priors::{elicit_beta, posterior_update, ElicitationTarget, EssSearch, NamedPrior};

fn beta(a: f64, b: f64) -> BetaParams {
    BetaParams::new(a, b).unwrap()
}

proptest! {
    #[test]
    fn inc_beta_symmetry(a in 0.05f64..200.0, b in 0.05f64..200.0, x in 0.0f64..=1.0) {
        let lhs = reg_inc_beta(beta(a, b), x).unwrap();
        let rhs = 1.0 - reg_inc_beta(beta(b, a), 1.0 - x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10, "I={lhs} vs {rhs}");
    }

    #[test]
    fn inc_beta_monotone(a in 0.05f64..100.0, b in 0.05f64..100.0, x in 0.0f64..0.999, dx in 0.0f64..0.2) {
        let lo = reg_inc_beta(beta(a, b), x).unwrap();
        let hi = reg_inc_beta(beta(a, b), (x + dx).min(1.0)).unwrap();
        prop_assert!(hi >= lo - 1e-15);
        prop_assert!((0.0..=1.0).contains(&lo));
    }

    #[test]
    fn binomial_tail_complements_cdf(n in 1u64..300, q in 0.0f64..=1.0, k in 1u64..300) {
        let p = BinomialParams::new(n, q).unwrap();
        let total = binom_tail_geq(p, k).unwrap() + binom_cdf(p, k - 1).unwrap();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn posterior_mean_between_prior_and_data(a in 0.1f64..50.0, b in 0.1f64..50.0, s in 0u64..100, f in 0u64..100) {
        prop_assume!(s + f > 0);
        let prior = beta(a, b);
        let prop = s as f64 / (s + f) as f64;
        prop_assume!((prop - prior.mean()).abs() > 1e-9);
        let m = posterior_update(prior, s, f).mean();
        let (lo, hi) = if prop < prior.mean() { (prop, prior.mean()) } else { (prior.mean(), prop) };
        prop_assert!(m > lo && m < hi);
    }

    #[test]
    fn named_prior_moments(a in 0.01f64..1e3, b in 0.01f64..1e3) {
        let p = NamedPrior::new("p", beta(a, b));
        let s = a + b;
        prop_assert!((p.mean - a / s).abs() <= 1e-12);
        prop_assert!((p.variance - a * b / (s * s * (s + 1.0))).abs() <= 1e-12);
        prop_assert!((p.ess - s).abs() <= 1e-12 * s);
    }

    #[test]
    fn should_stop_matches_boundary(n in 1u32..=78, f in 0u32..=78) {
        prop_assume!(f <= n);
        let rule = StoppingRule::default();
        let table = boundary(&rule, 78).unwrap();
        let d = should_stop(&rule, GroupState::new(n, f).unwrap()).unwrap();
        let expected = table.min_failures(n).is_some_and(|b| f >= b);
        prop_assert_eq!(d.stop, expected);
    }
}

#[test]
fn inc_beta_endpoints() {
    for a in [0.1, 0.5, 1.0, 4.5, 30.0, 500.0] {
        for b in [0.1, 0.5, 1.0, 4.5, 30.0, 500.0] {
            assert_eq!(reg_inc_beta(beta(a, b), 0.0).unwrap(), 0.0);
            assert_eq!(reg_inc_beta(beta(a, b), 1.0).unwrap(), 1.0);
        }
    }
}

#[test]
fn beta_binomial_tends_to_binomial() {
    let m = 40;
    let direct = BinomialParams::new(m, 0.9).unwrap();
    for k in [30, 35, 38, 40] {
        let bin = binom_tail_geq(direct, k).unwrap();
        let bb = beta_binom_tail_geq(m, beta(9e4, 1e4), k).unwrap();
        assert!((bin - bb).abs() < 1e-3, "k={k}: {bin} vs {bb}");
    }
}

#[test]
fn elicited_ess_falls_as_tail_rises() {
    let ess =
        |t: f64| elicit_beta(ElicitationTarget::new(0.9, 0.9, t).unwrap(), EssSearch::default()).unwrap().prior.ess;
    let tails = [0.2, 0.25, 0.3, 0.34, 0.4, 0.45];
    let values: Vec<f64> = tails.iter().map(|&t| ess(t)).collect();
    for w in values.windows(2) {
        // with mean at the threshold the tail mass below it grows as the prior widens
        assert!(w[0] < w[1], "{values:?}");
    }
}

#[test]
fn boundary_steps_by_at_most_one() {
    for rule in [
        StoppingRule::default(),
        StoppingRule::new(0.9, 0.95, beta(1.0, 1.0)).unwrap(),
        StoppingRule::new(0.8, 0.9, beta(2.0, 2.0)).unwrap(),
    ] {
        let t = boundary(&rule, 300).unwrap();
        let mut prev: Option<u32> = None;
        for n in 1..=300 {
            let cur = t.min_failures(n);
            if let (Some(p), Some(c)) = (prev, cur) {
                assert!(c == p || c == p + 1, "n={n}: {p} -> {c}");
            }
            assert!(!(prev.is_some() && cur.is_none()));
            prev = cur;
        }
    }
}

#[test]
fn correct_stop_risk_below_five_percent() {
    let rule = StoppingRule::default();
    for n in 1..=78 {
        let p = stop_prob(&rule, n, 0.9).unwrap();
        assert!(p < 0.05, "n={n}: {p}");
    }
}

#[test]
fn stop_prob_decreases_in_cure() {
    let rule = StoppingRule::default();
    for n in [3, 7, 20, 50, 78] {
        let ps: Vec<f64> = (0..=20).map(|i| stop_prob(&rule, n, 0.5 + 0.025 * i as f64).unwrap()).collect();
        for w in ps.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }
}

#[test]
fn average_stop_prob_matches_fine_grid() {
    let rule = StoppingRule::default();
    let range = CureRateRange { lower: 0.6, upper: 0.9, weighting: Weighting::Uniform };
    for n in [3, 5, 10, 21, 40, 78] {
        let quad = avg_stop_prob(&rule, n, &range).unwrap();
        let k = 100_000;
        let grid: f64 =
            (0..k).map(|i| stop_prob(&rule, n, 0.6 + 0.3 * (i as f64 + 0.5) / k as f64).unwrap()).sum::<f64>()
                / k as f64;
        assert!((quad - grid).abs() < 1e-4, "n={n}: {quad} vs {grid}");
    }
}

#[test]
fn predictive_with_zero_threshold_is_certain() {
    let rule = StoppingRule { posterior_prob_threshold: 0.0, ..StoppingRule::default() };
    for total in [5, 20, 78] {
        let t = boundary(&rule, total).unwrap();
        if t.min_failures(total).is_some_and(|b| b <= total) {
            let p = predictive_stop_prob(&rule, GroupState::new(2, 0).unwrap(), total).unwrap();
            assert!((p - 1.0).abs() < 1e-12, "total {total}: {p}");
        }
    }
}

#[test]
fn projections_monotone_and_conserved() {
    let design = TrialDesign::default();
    let schedule = RecruitmentSchedule::default();
    let mut prev = project_eot12(&design, &schedule, 0.0);
    for tenth in 1..=300 {
        let t = tenth as f64 / 10.0;
        let row = project_eot12(&design, &schedule, t);
        for (s, e) in row.per_group_expected.iter().enumerate() {
            assert!(*e >= prev.per_group_expected[s] - 1e-12);
        }
        let outcomes: f64 =
            row.per_group_expected.iter().enumerate().map(|(s, e)| e * design.multiplicity(s) as f64).sum();
        assert!(outcomes <= schedule.at(t) + 1e-9, "month {t}");
        // control = 0, PEG-IFN = 1, RGT = 2, induction/maintenance = 3
        let e = &row.per_group_expected;
        assert!(e[1] >= e[2] - 1e-12 && e[2] >= e[3] - 1e-12);
        assert!((e[3] - e[0]).abs() < 1e-9);
        prev = row;
    }
}

#[test]
fn closures_renormalise() {
    let design = default_design();
    let groups = design.groups();
    for mask in 0u8..16 {
        let mut open = OpenGroups::all(&design);
        for s in 0..4 {
            if mask & (1 << s) != 0 {
                open.close_strategy(&design, s);
            }
        }
        for stratum in 0..2 {
            match allocation_probs(&design, &open, stratum) {
                Ok(p) => {
                    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12, "mask {mask:04b}");
                    for (g, key) in groups.iter().enumerate() {
                        if mask & (1 << key.strategy) != 0 {
                            assert_eq!(p[g], 0.0);
                        }
                    }
                }
                Err(_) => assert_eq!(mask, 0b1111),
            }
        }
    }
}
