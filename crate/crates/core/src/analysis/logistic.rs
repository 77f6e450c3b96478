//! Logistic regression on the randomised factors and marginal risk
//! differences by standardisation.
//!
//! Patients are aggregated into (group, stratum) cells before fitting; the
//! binomial likelihood of the cells equals the Bernoulli likelihood of the
//! patients.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{PatientRecord, N_STRATEGIES};
use crate::design::GroupKey;
use crate::num::normal_quantile;
use crate::{Error, Result};

const GRAD_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 40;
const DIVERGED: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelTerms {
    /// Intercept, regimen, strategy dummies, ribavirin and stratum.
    #[default]
    MainEffects,
    /// Main effects plus regimen x strategy and ribavirin x strategy
    /// (shortening strategies only; the first shortening strategy is the reference).
    Interactions,
    /// One parameter per (group, stratum) cell.
    Saturated,
}

/// A risk-difference contrast computed after the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Contrast {
    /// Second regimen minus first, standardised over all patients.
    Regimen,
    /// Mean of the shortening strategies (both ribavirin levels) minus control.
    StrategyPooled,
    /// One shortening strategy (averaged over ribavirin) minus control.
    Strategy(u8),
    /// Ribavirin minus no ribavirin, standardised over shortening patients.
    Ribavirin,
}

impl fmt::Display for Contrast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Contrast::Regimen => write!(f, "regimen"),
            Contrast::StrategyPooled => write!(f, "strategy"),
            Contrast::Strategy(k) => write!(f, "strategy-{k}"),
            Contrast::Ribavirin => write!(f, "ribavirin"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalEffect {
    pub contrast: Contrast,
    pub estimate: f64,
    pub se: f64,
    /// Two-sided 95% Wald interval.
    pub ci95: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionFlag {
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    /// The 95% Wald interval of the log-odds coefficient excludes 0.
    pub retained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelTerms,
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Inverse observed information, row-major.
    pub covariance: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub n: usize,
    pub marginal: Vec<MarginalEffect>,
    pub interaction_flags: Vec<InteractionFlag>,
}

impl FitResult {
    pub fn effect(&self, contrast: Contrast) -> Option<&MarginalEffect> {
        self.marginal.iter().find(|m| m.contrast == contrast)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Cell {
    key: GroupKey,
    stratum: u8,
}

struct Counts {
    n: f64,
    y: f64,
}

struct Model {
    terms: ModelTerms,
    names: Vec<String>,
    /// Saturated-model column of each cell.
    cell_index: BTreeMap<Cell, usize>,
}

fn all_cells() -> Vec<Cell> {
    let mut out = Vec::new();
    for regimen in 0..2 {
        for strategy in 0..N_STRATEGIES {
            let levels: &[Option<bool>] = if strategy == 0 { &[None] } else { &[Some(false), Some(true)] };
            for &ribavirin in levels {
                for stratum in 0..2 {
                    out.push(Cell { key: GroupKey { regimen, strategy, ribavirin }, stratum });
                }
            }
        }
    }
    out
}

fn cell_name(c: &Cell) -> String {
    let rbv = match c.key.ribavirin {
        None => String::new(),
        Some(v) => format!(",ribavirin={}", v as u8),
    };
    format!("regimen={},strategy={}{rbv},stratum={}", c.key.regimen, c.key.strategy, c.stratum)
}

impl Model {
    fn new(terms: ModelTerms) -> Self {
        let mut names = Vec::new();
        let mut cell_index = BTreeMap::new();
        match terms {
            ModelTerms::Saturated => {
                for (i, c) in all_cells().into_iter().enumerate() {
                    names.push(cell_name(&c));
                    cell_index.insert(c, i);
                }
            }
            _ => {
                names.push("intercept".into());
                names.push("regimen".into());
                for k in 1..N_STRATEGIES {
                    names.push(format!("strategy[{k}]"));
                }
                names.push("ribavirin".into());
                names.push("stratum".into());
                if terms == ModelTerms::Interactions {
                    for k in 1..N_STRATEGIES {
                        names.push(format!("regimen:strategy[{k}]"));
                    }
                    for k in 2..N_STRATEGIES {
                        names.push(format!("ribavirin:strategy[{k}]"));
                    }
                }
            }
        }
        Self { terms, names, cell_index }
    }

    fn row(&self, c: &Cell) -> DVector<f64> {
        let mut x = DVector::zeros(self.names.len());
        if self.terms == ModelTerms::Saturated {
            x[self.cell_index[c]] = 1.0;
            return x;
        }
        let s = c.key.strategy as usize;
        let r = c.key.regimen as f64;
        let v = c.key.ribavirin.unwrap_or(false) as u8 as f64;
        let ns = N_STRATEGIES as usize;
        x[0] = 1.0;
        x[1] = r;
        if s > 0 {
            x[1 + s] = 1.0;
        }
        x[ns + 1] = v;
        x[ns + 2] = c.stratum as f64;
        if self.terms == ModelTerms::Interactions {
            let base = ns + 3;
            if s > 0 {
                x[base + s - 1] = r;
            }
            if s > 1 {
                x[base + (ns - 1) + s - 2] = v;
            }
        }
        x
    }
}

fn aggregate(data: &[PatientRecord]) -> Result<BTreeMap<Cell, Counts>> {
    let mut cells = BTreeMap::new();
    for rec in data {
        rec.validate()?;
        let c = Cell {
            key: GroupKey { regimen: rec.regimen, strategy: rec.strategy, ribavirin: rec.ribavirin },
            stratum: rec.stratum,
        };
        let e = cells.entry(c).or_insert(Counts { n: 0.0, y: 0.0 });
        e.n += 1.0;
        e.y += rec.outcome as u8 as f64;
    }
    Ok(cells)
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^eta) without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

struct Design {
    x: Vec<DVector<f64>>,
    n: Vec<f64>,
    y: Vec<f64>,
}

impl Design {
    fn log_lik(&self, beta: &DVector<f64>) -> f64 {
        self.x
            .iter()
            .zip(self.n.iter().zip(&self.y))
            .map(|(x, (&n, &y))| {
                let eta = x.dot(beta);
                y * eta - n * softplus(eta)
            })
            .sum()
    }

    fn grad_hess(&self, beta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let p = beta.len();
        let mut g = DVector::zeros(p);
        let mut h = DMatrix::zeros(p, p);
        for (x, (&n, &y)) in self.x.iter().zip(self.n.iter().zip(&self.y)) {
            let mu = sigmoid(x.dot(beta));
            g.axpy(y - n * mu, x, 1.0);
            h.ger(n * mu * (1.0 - mu), x, x, 1.0);
        }
        (g, h)
    }
}

/// Main-effects fit, or the interaction model when `include_interactions` is set.
pub fn fit_logistic(data: &[PatientRecord], include_interactions: bool) -> Result<FitResult> {
    fit_model(data, if include_interactions { ModelTerms::Interactions } else { ModelTerms::MainEffects })
}

pub fn fit_model(data: &[PatientRecord], terms: ModelTerms) -> Result<FitResult> {
    let cells = aggregate(data)?;
    let total: f64 = cells.values().map(|c| c.n).sum();
    let successes: f64 = cells.values().map(|c| c.y).sum();
    if total == 0.0 {
        return Err(Error::Validation("no patient records".into()));
    }
    if successes == 0.0 || successes == total {
        return Err(Error::Validation("all outcomes are identical".into()));
    }
    let model = Model::new(terms);
    let design = Design {
        x: cells.keys().map(|c| model.row(c)).collect(),
        n: cells.values().map(|c| c.n).collect(),
        y: cells.values().map(|c| c.y).collect(),
    };
    check_columns(&model, &design)?;

    let (beta, info, iterations) = newton(&model, &design)?;
    let cov = info
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Rank("information matrix not positive definite".into()))?
        .inverse();
    let log_likelihood = design.log_lik(&beta);

    let population: Vec<(Cell, f64)> = cells.iter().map(|(c, k)| (*c, k.n)).collect();
    let mut marginal = Vec::new();
    let z = normal_quantile(0.975);
    for contrast in contrasts(&population) {
        let (estimate, grad) = risk_difference(&model, &beta, &population, contrast);
        let se = grad.dot(&(&cov * &grad)).max(0.0).sqrt();
        marginal.push(MarginalEffect { contrast, estimate, se, ci95: (estimate - z * se, estimate + z * se) });
    }

    let interaction_flags = if terms == ModelTerms::Interactions {
        model
            .names
            .iter()
            .enumerate()
            .filter(|(_, n)| n.contains(':'))
            .map(|(j, n)| {
                let se = cov[(j, j)].sqrt();
                InteractionFlag { term: n.clone(), estimate: beta[j], se, retained: (beta[j] / se).abs() > z }
            })
            .collect()
    } else {
        Vec::new()
    };

    let p = beta.len();
    Ok(FitResult {
        model: terms,
        terms: model.names.clone(),
        coefficients: beta.iter().copied().collect(),
        covariance: (0..p).map(|i| (0..p).map(|j| cov[(i, j)]).collect()).collect(),
        log_likelihood,
        iterations,
        n: total as usize,
        marginal,
        interaction_flags,
    })
}

/// Rejects empty columns and columns whose patients all share one outcome.
fn check_columns(model: &Model, design: &Design) -> Result<()> {
    let totals: Vec<(f64, f64)> = (0..model.names.len())
        .map(|j| {
            design
                .x
                .iter()
                .zip(design.n.iter().zip(&design.y))
                .filter(|(x, _)| x[j] != 0.0)
                .fold((0.0, 0.0), |(n, y), (_, (&cn, &cy))| (n + cn, y + cy))
        })
        .collect();
    let named = || model.names.iter().zip(&totals).filter(|(name, _)| *name != "intercept");
    if let Some((name, _)) = named().find(|(_, (n, _))| *n == 0.0) {
        return Err(Error::Rank(format!("no observations for term {name}")));
    }
    if let Some((name, _)) = named().find(|(_, &(n, y))| y == 0.0 || y == n) {
        return Err(Error::Separation(name.clone()));
    }
    Ok(())
}

fn newton(model: &Model, design: &Design) -> Result<(DVector<f64>, DMatrix<f64>, usize)> {
    let p = model.names.len();
    let mut beta = DVector::zeros(p);
    let mut ll = design.log_lik(&beta);
    for iter in 0..MAX_ITER {
        let (g, h) = design.grad_hess(&beta);
        if g.norm() <= GRAD_TOL {
            return Ok((beta, h, iter));
        }
        let chol = h.clone().cholesky().ok_or_else(|| Error::Rank("information matrix is singular".into()))?;
        let step = chol.solve(&g);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand = &beta + &step * t;
            let cand_ll = design.log_lik(&cand);
            if cand_ll >= ll - 1e-12 * ll.abs() {
                beta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if let Some((j, b)) = beta.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())) {
            if b.abs() > DIVERGED {
                return Err(Error::Separation(model.names[j].clone()));
            }
        }
        if !accepted {
            return Err(Error::Convergence("line search failed to increase the likelihood".into()));
        }
    }
    Err(Error::Convergence(format!("no convergence after {MAX_ITER} Newton steps")))
}

fn contrasts(population: &[(Cell, f64)]) -> Vec<Contrast> {
    let has = |s: u8| population.iter().any(|(c, _)| c.key.strategy == s);
    let mut out = vec![Contrast::Regimen];
    if has(0) && (1..N_STRATEGIES).all(has) {
        out.push(Contrast::StrategyPooled);
    }
    for k in 1..N_STRATEGIES {
        if has(0) && has(k) {
            out.push(Contrast::Strategy(k));
        }
    }
    if (1..N_STRATEGIES).any(has) {
        out.push(Contrast::Ribavirin);
    }
    out
}

/// Counterfactual assignment applied to a patient's cell.
type Setter = fn(&Cell, u8) -> Option<Cell>;

fn with_regimen(c: &Cell, r: u8) -> Option<Cell> {
    Some(Cell { key: GroupKey { regimen: r, ..c.key }, ..*c })
}

fn with_strategy_rbv(c: &Cell, code: u8) -> Option<Cell> {
    // code = strategy * 2 + ribavirin; strategy 0 ignores the ribavirin bit
    let strategy = code / 2;
    let ribavirin = (strategy > 0).then_some(code % 2 == 1);
    Some(Cell { key: GroupKey { strategy, ribavirin, ..c.key }, ..*c })
}

fn with_ribavirin(c: &Cell, v: u8) -> Option<Cell> {
    (c.key.strategy > 0).then_some(Cell { key: GroupKey { ribavirin: Some(v == 1), ..c.key }, ..*c })
}

/// Mean predicted probability (and its gradient) over the population, each
/// patient averaged over the listed counterfactual levels.
fn standardised(
    model: &Model,
    beta: &DVector<f64>,
    pop: &[(Cell, f64)],
    set: Setter,
    levels: &[u8],
) -> (f64, DVector<f64>) {
    let mut mean = 0.0;
    let mut grad = DVector::zeros(beta.len());
    let mut weight = 0.0;
    for (cell, w) in pop {
        for &l in levels {
            let Some(cf) = set(cell, l) else { continue };
            let x = model.row(&cf);
            let mu = sigmoid(x.dot(beta));
            let wl = w / levels.len() as f64;
            mean += wl * mu;
            grad.axpy(wl * mu * (1.0 - mu), &x, 1.0);
        }
        if set(cell, levels[0]).is_some() {
            weight += w;
        }
    }
    (mean / weight, grad / weight)
}

fn risk_difference(model: &Model, beta: &DVector<f64>, pop: &[(Cell, f64)], contrast: Contrast) -> (f64, DVector<f64>) {
    let ((a, ga), (b, gb)) = match contrast {
        Contrast::Regimen => {
            (standardised(model, beta, pop, with_regimen, &[1]), standardised(model, beta, pop, with_regimen, &[0]))
        }
        Contrast::StrategyPooled => {
            let short: Vec<u8> = (2..N_STRATEGIES * 2).collect();
            (
                standardised(model, beta, pop, with_strategy_rbv, &short),
                standardised(model, beta, pop, with_strategy_rbv, &[0]),
            )
        }
        Contrast::Strategy(k) => (
            standardised(model, beta, pop, with_strategy_rbv, &[2 * k, 2 * k + 1]),
            standardised(model, beta, pop, with_strategy_rbv, &[0]),
        ),
        Contrast::Ribavirin => {
            (standardised(model, beta, pop, with_ribavirin, &[1]), standardised(model, beta, pop, with_ribavirin, &[0]))
        }
    };
    (a - b, ga - gb)
}

/// Fits the interaction model and returns every interaction term with its
/// retention flag (95% Wald interval excluding 0).
pub fn interaction_screen(data: &[PatientRecord]) -> Result<Vec<InteractionFlag>> {
    Ok(fit_model(data, ModelTerms::Interactions)?.interaction_flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::simulate_dataset;
    use crate::design::TrialDesign;
    use crate::num::rng_stream;

    fn rec(regimen: u8, strategy: u8, ribavirin: Option<bool>, stratum: u8, outcome: bool) -> PatientRecord {
        PatientRecord { regimen, strategy, ribavirin, stratum, outcome }
    }

    #[test]
    fn two_group_proportions() {
        let mut data = Vec::new();
        for i in 0..100 {
            data.push(rec(1, 0, None, 0, i < 90));
            data.push(rec(0, 0, None, 0, i < 80));
        }
        // the full models need every factor level, so fit intercept + regimen directly
        let cells = aggregate(&data).unwrap();
        let design = Design {
            x: cells.keys().map(|c| DVector::from_vec(vec![1.0, c.key.regimen as f64])).collect(),
            n: cells.values().map(|c| c.n).collect(),
            y: cells.values().map(|c| c.y).collect(),
        };
        let model = Model {
            terms: ModelTerms::MainEffects,
            names: vec!["intercept".into(), "regimen".into()],
            cell_index: BTreeMap::new(),
        };
        let (beta, _, _) = newton(&model, &design).unwrap();
        let rd = sigmoid(beta[0] + beta[1]) - sigmoid(beta[0]);
        assert!((rd - 0.10).abs() < 1e-10);
        assert!(matches!(fit_model(&data, ModelTerms::Saturated), Err(Error::Rank(_))));
    }

    #[test]
    fn saturated_matches_raw_contrasts() {
        let design = TrialDesign::default();
        let cure: Vec<f64> = (0..14).map(|g| 0.6 + 0.02 * g as f64).collect();
        let data = simulate_dataset(&design, &cure, 0.5, 0.0, &mut rng_stream(3, 0)).unwrap();
        let fit = fit_model(&data, ModelTerms::Saturated).unwrap();
        let cells = aggregate(&data).unwrap();
        let prop = |c: &Cell| cells[c].y / cells[c].n;
        // regimen: standardised raw proportions
        let (mut num, mut den) = (0.0, 0.0);
        for (c, k) in &cells {
            let a = Cell { key: GroupKey { regimen: 1, ..c.key }, ..*c };
            let b = Cell { key: GroupKey { regimen: 0, ..c.key }, ..*c };
            num += k.n * (prop(&a) - prop(&b));
            den += k.n;
        }
        let raw = num / den;
        assert!((fit.effect(Contrast::Regimen).unwrap().estimate - raw).abs() < 1e-8);
        // ribavirin over shortening patients
        let (mut num, mut den) = (0.0, 0.0);
        for (c, k) in cells.iter().filter(|(c, _)| c.key.strategy > 0) {
            let a = Cell { key: GroupKey { ribavirin: Some(true), ..c.key }, ..*c };
            let b = Cell { key: GroupKey { ribavirin: Some(false), ..c.key }, ..*c };
            num += k.n * (prop(&a) - prop(&b));
            den += k.n;
        }
        assert!((fit.effect(Contrast::Ribavirin).unwrap().estimate - num / den).abs() < 1e-8);
    }

    #[test]
    fn relabelling_negates() {
        let design = TrialDesign::default();
        let mut cure = vec![0.9; 14];
        for (g, k) in design.groups().iter().enumerate() {
            if k.regimen == 1 {
                cure[g] = 0.8;
            }
        }
        let data = simulate_dataset(&design, &cure, 0.5, 0.0, &mut rng_stream(4, 0)).unwrap();
        let flipped: Vec<_> = data.iter().map(|r| PatientRecord { regimen: 1 - r.regimen, ..*r }).collect();
        let a = fit_logistic(&data, false).unwrap().effect(Contrast::Regimen).unwrap().clone();
        let b = fit_logistic(&flipped, false).unwrap().effect(Contrast::Regimen).unwrap().clone();
        assert!((a.estimate + b.estimate).abs() < 1e-9);
        assert!((a.se - b.se).abs() < 1e-9);
        assert!(a.estimate < -0.05);
    }

    #[test]
    fn separation_and_degenerate_outcomes() {
        let design = TrialDesign::default();
        let mut cure = vec![0.8; 14];
        for (g, k) in design.groups().iter().enumerate() {
            if k.strategy == 1 {
                cure[g] = 1.0;
            }
        }
        let data = simulate_dataset(&design, &cure, 0.5, 0.0, &mut rng_stream(5, 0)).unwrap();
        match fit_logistic(&data, false) {
            Err(Error::Separation(term)) => assert_eq!(term, "strategy[1]"),
            other => panic!("expected separation, got {other:?}"),
        }
        let all = simulate_dataset(&design, &[1.0; 14], 0.5, 0.0, &mut rng_stream(5, 1)).unwrap();
        assert!(matches!(fit_logistic(&all, false), Err(Error::Validation(_))));
    }

    #[test]
    fn missing_level_is_rank_error() {
        let data = vec![rec(0, 0, None, 0, true), rec(1, 0, None, 1, false), rec(0, 0, None, 1, true)];
        assert!(matches!(fit_logistic(&data, false), Err(Error::Rank(_))));
    }

    #[test]
    fn interaction_terms() {
        let model = Model::new(ModelTerms::Interactions);
        assert!(model.names.iter().any(|n| n == "regimen:strategy[1]"));
        assert!(model.names.iter().any(|n| n == "ribavirin:strategy[3]"));
        assert!(!model.names.iter().any(|n| n == "ribavirin:strategy[0]" || n == "ribavirin:strategy[1]"));
        let design = TrialDesign::default();
        let data = simulate_dataset(&design, &[0.85; 14], 0.5, 0.0, &mut rng_stream(6, 0)).unwrap();
        let flags = interaction_screen(&data).unwrap();
        assert_eq!(flags.len(), 5);
    }

    #[test]
    fn covariance_is_symmetric_psd() {
        let design = TrialDesign::default();
        let data = simulate_dataset(&design, &[0.9; 14], 0.5, 0.0, &mut rng_stream(7, 0)).unwrap();
        let fit = fit_logistic(&data, false).unwrap();
        let p = fit.coefficients.len();
        let m = DMatrix::from_fn(p, p, |i, j| fit.covariance[i][j]);
        assert!((&m - m.transpose()).abs().max() < 1e-12);
        assert!(m.symmetric_eigenvalues().iter().all(|&e| e > 0.0));
        for e in &fit.marginal {
            assert!(e.ci95.0 <= e.ci95.1);
        }
    }
}
