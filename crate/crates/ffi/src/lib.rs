//! C ABI for trialmon.
//!
//! Every function returns a [`TrialmonStatus`]; results are written through
//! out-pointers. Rules and designs are opaque handles created by `*_new` /
//! `*_default` and released with `*_free`. After a non-OK status,
//! [`trialmon_last_error`] returns a message for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use trialmon::analysis::single_group_sample_size;
use trialmon::design::{project_eot12, RecruitmentSchedule, TrialDesign};
use trialmon::monitoring::{
    avg_stop_prob_with, boundary, predictive_stop_prob, should_stop, stop_prob_with, BoundaryTable, CureRateRange,
    GroupState, StoppingRule, Weighting,
};
use trialmon::num::{reg_inc_beta, BetaParams};
use trialmon::priors::{elicit_beta, ElicitationTarget, EssSearch};
use trialmon::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialmonStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Unreachable = 3,
    NoSolution = 4,
    Numerical = 5,
    BufferTooSmall = 6,
    Panic = 99,
}

/// A stopping rule with its boundary table cached up to `max_n`.
pub struct TrialmonRule {
    rule: StoppingRule,
    table: BoundaryTable,
}

/// A trial design together with its recruitment schedule.
pub struct TrialmonDesign {
    design: TrialDesign,
    schedule: RecruitmentSchedule,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> TrialmonStatus {
    match e {
        Error::Unreachable(_) => TrialmonStatus::Unreachable,
        Error::Elicitation { .. } => TrialmonStatus::NoSolution,
        Error::Separation(_) | Error::Rank(_) | Error::Convergence(_) | Error::Exhausted(_) => {
            TrialmonStatus::Numerical
        }
        _ => TrialmonStatus::InvalidArgument,
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), (TrialmonStatus, String)>>(f: F) -> TrialmonStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TrialmonStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TrialmonStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (TrialmonStatus, String)>;
}

impl<T> IntoFfi<T> for trialmon::Result<T> {
    fn ffi(self) -> Result<T, (TrialmonStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(name: &str) -> (TrialmonStatus, String) {
    (TrialmonStatus::NullPointer, format!("{name} is null"))
}

unsafe fn write<T>(out: *mut T, v: T, name: &str) -> Result<(), (TrialmonStatus, String)> {
    if out.is_null() {
        return Err(null(name));
    }
    *out = v;
    Ok(())
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (TrialmonStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

/// Message for the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn trialmon_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn trialmon_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// Regularised incomplete beta function `I_x(a, b)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn trialmon_reg_inc_beta(a: f64, b: f64, x: f64, out: *mut f64) -> TrialmonStatus {
    guard(|| {
        let v = reg_inc_beta(BetaParams::new(a, b).ffi()?, x).ffi()?;
        write(out, v, "out")
    })
}

/// Creates a rule and caches its boundary for group sizes up to `max_n`.
///
/// # Safety
/// `out` must be valid for writes. Release the handle with [`trialmon_rule_free`].
#[no_mangle]
pub unsafe extern "C" fn trialmon_rule_new(
    cure_threshold: f64,
    posterior_prob_threshold: f64,
    prior_a: f64,
    prior_b: f64,
    max_n: u32,
    out: *mut *mut TrialmonRule,
) -> TrialmonStatus {
    guard(|| {
        let rule =
            StoppingRule::new(cure_threshold, posterior_prob_threshold, BetaParams::new(prior_a, prior_b).ffi()?)
                .ffi()?;
        let table = boundary(&rule, max_n).ffi()?;
        write(out, Box::into_raw(Box::new(TrialmonRule { rule, table })), "out")
    })
}

/// The default rule: beta(4.5, 0.5) prior, stop when Pr(cure < 0.9) > 0.95.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn trialmon_rule_default(max_n: u32, out: *mut *mut TrialmonRule) -> TrialmonStatus {
    let r = StoppingRule::default();
    trialmon_rule_new(r.cure_threshold, r.posterior_prob_threshold, r.prior.a(), r.prior.b(), max_n, out)
}

/// # Safety
/// `rule` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn trialmon_rule_free(rule: *mut TrialmonRule) {
    if !rule.is_null() {
        drop(Box::from_raw(rule));
    }
}

/// Largest group size cached in the rule.
///
/// # Safety
/// `rule` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn trialmon_rule_max_n(rule: *const TrialmonRule, out: *mut u32) -> TrialmonStatus {
    guard(|| write(out, deref(rule, "rule")?.table.max_n(), "out"))
}

/// Posterior probability that the cure rate is below the threshold and
/// whether the group stops.
///
/// # Safety
/// `rule`, `out_stop` and `out_prob` must be valid.
#[no_mangle]
pub unsafe extern "C" fn trialmon_should_stop(
    rule: *const TrialmonRule,
    analysed: u32,
    failures: u32,
    out_stop: *mut bool,
    out_prob: *mut f64,
) -> TrialmonStatus {
    guard(|| {
        let r = deref(rule, "rule")?;
        let d = should_stop(&r.rule, GroupState::new(analysed, failures).ffi()?).ffi()?;
        write(out_stop, d.stop, "out_stop")?;
        write(out_prob, d.posterior_prob, "out_prob")
    })
}

/// Minimum failures to stop for `n = 1..=len`, written to `out[n - 1]`;
/// -1 where no number of failures stops the group.
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn trialmon_boundary(rule: *const TrialmonRule, out: *mut i32, len: usize) -> TrialmonStatus {
    guard(|| {
        let r = deref(rule, "rule")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if len > r.table.max_n() as usize {
            return Err((TrialmonStatus::BufferTooSmall, format!("rule caches n up to {}", r.table.max_n())));
        }
        let slice = std::slice::from_raw_parts_mut(out, len);
        for (i, slot) in slice.iter_mut().enumerate() {
            *slot = r.table.min_failures(i as u32 + 1).map(|f| f as i32).unwrap_or(-1);
        }
        Ok(())
    })
}

/// Probability of stopping at `n` when the true cure rate is `true_cure`.
///
/// # Safety
/// `rule` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn trialmon_stop_prob(
    rule: *const TrialmonRule,
    n: u32,
    true_cure: f64,
    out: *mut f64,
) -> TrialmonStatus {
    guard(|| {
        let r = deref(rule, "rule")?;
        write(out, stop_prob_with(&r.table, n, true_cure).ffi()?, "out")
    })
}

/// Stop probability at `n` averaged uniformly over cure rates in `[lower, upper]`.
///
/// # Safety
/// `rule` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn trialmon_avg_stop_prob(
    rule: *const TrialmonRule,
    n: u32,
    lower: f64,
    upper: f64,
    out: *mut f64,
) -> TrialmonStatus {
    guard(|| {
        let r = deref(rule, "rule")?;
        let range = CureRateRange { lower, upper, weighting: Weighting::Uniform };
        write(out, avg_stop_prob_with(&r.table, r.rule.prior, n, &range).ffi()?, "out")
    })
}

/// Probability, given the current data, that the rule is met once `total_n`
/// patients have outcomes.
///
/// # Safety
/// `rule` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn trialmon_predictive_stop_prob(
    rule: *const TrialmonRule,
    analysed: u32,
    failures: u32,
    total_n: u32,
    out: *mut f64,
) -> TrialmonStatus {
    guard(|| {
        let r = deref(rule, "rule")?;
        let p = predictive_stop_prob(&r.rule, GroupState::new(analysed, failures).ffi()?, total_n).ffi()?;
        write(out, p, "out")
    })
}

/// Beta prior with the given mean and `Pr(p < threshold) = tail_prob`.
///
/// # Safety
/// `out_a` and `out_b` must be valid.
#[no_mangle]
pub unsafe extern "C" fn trialmon_elicit_beta(
    mean: f64,
    threshold: f64,
    tail_prob: f64,
    out_a: *mut f64,
    out_b: *mut f64,
) -> TrialmonStatus {
    guard(|| {
        let e = elicit_beta(ElicitationTarget::new(mean, threshold, tail_prob).ffi()?, EssSearch::default()).ffi()?;
        write(out_a, e.prior.params.a(), "out_a")?;
        write(out_b, e.prior.params.b(), "out_b")
    })
}

/// Single-group sample size after loss-to-follow-up inflation.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn trialmon_sample_size(
    target: f64,
    unacceptable: f64,
    power: f64,
    alpha: f64,
    ltfu: f64,
    out: *mut u64,
) -> TrialmonStatus {
    guard(|| {
        let r = single_group_sample_size(target, unacceptable, power, alpha, ltfu).ffi()?;
        write(out, r.n, "out")
    })
}

/// The default design and recruitment schedule.
///
/// # Safety
/// `out` must be valid. Release with [`trialmon_design_free`].
#[no_mangle]
pub unsafe extern "C" fn trialmon_design_default(out: *mut *mut TrialmonDesign) -> TrialmonStatus {
    guard(|| {
        let d = TrialmonDesign { design: TrialDesign::default(), schedule: RecruitmentSchedule::default() };
        write(out, Box::into_raw(Box::new(d)), "out")
    })
}

/// # Safety
/// `design` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn trialmon_design_free(design: *mut TrialmonDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// Number of strategies (control included).
///
/// # Safety
/// `design` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn trialmon_design_strategy_count(
    design: *const TrialmonDesign,
    out: *mut usize,
) -> TrialmonStatus {
    guard(|| write(out, deref(design, "design")?.design.strategies.len(), "out"))
}

/// Projected patients per group with outcome data at `month`, one entry per
/// strategy, plus the trial total.
///
/// # Safety
/// `counts` must be valid for `len` writes and `out_total` for one.
#[no_mangle]
pub unsafe extern "C" fn trialmon_design_project(
    design: *const TrialmonDesign,
    month: f64,
    counts: *mut u32,
    len: usize,
    out_total: *mut u32,
) -> TrialmonStatus {
    guard(|| {
        let d = deref(design, "design")?;
        if !month.is_finite() {
            return Err((TrialmonStatus::InvalidArgument, "month must be finite".into()));
        }
        let row = project_eot12(&d.design, &d.schedule, month);
        let k = row.per_group_at_eot12.len();
        if counts.is_null() {
            return Err(null("counts"));
        }
        if len < k {
            return Err((TrialmonStatus::BufferTooSmall, format!("need {k} entries")));
        }
        let slice = std::slice::from_raw_parts_mut(counts, k);
        for (slot, (_, c)) in slice.iter_mut().zip(&row.per_group_at_eot12) {
            *slot = *c;
        }
        write(out_total, row.total_at_eot12, "out_total")
    })
}
