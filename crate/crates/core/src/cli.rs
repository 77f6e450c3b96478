//! Command-line front end. A TOML config supplies every setting; flags
//! override it. Errors are printed to stderr as JSON and mapped to exit
//! code 2 (bad configuration or input) or 3 (numerical failure).

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{
    bayes_risk_difference, fit_model, power_study, read_records, sensitivity_priors, simulate_dataset,
    single_group_sample_size, test_comparison, write_records, AnalysisPrior, ComparisonOutcome, ComparisonSpec, Factor,
    FitResult, ModelTerms, NormalPosterior, PowerTable, SampleSizeReport, StrategyContrast,
};
use crate::config::RunConfig;
use crate::design::{project_eot12, timing_search, TimingEvaluator, TimingResult};
use crate::monitoring::{boundary, boundary_report, boundary_report_grouped, stop_prob_with, Weighting};
use crate::num::{rng_stream, BetaParams};
use crate::output::{Precision, Series, Sink, Table};
use crate::priors::{elicit_beta, NamedPrior};
use crate::sim::{scan_cure_floor, scan_recruitment, simulate_monitoring, StopReport};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "trialmon", version, about = "Futility monitoring, interim timing and power for factorial trials")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Check the configuration and exit without computing.
    #[arg(long, global = true)]
    pub validate_only: bool,
    /// Write every artefact to this directory instead of printing the main one.
    #[arg(long, global = true, env = "TRIALMON_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Print numbers at full precision instead of six significant digits.
    #[arg(long, global = true)]
    pub full_precision: bool,
    /// Monitoring prior shapes as `a,b`.
    #[arg(long, global = true, value_parser = parse_pair)]
    pub prior: Option<(f64, f64)>,
    #[arg(long, global = true)]
    pub cure_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub posterior_threshold: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimum failures to stop and stop probabilities by group size.
    Boundary(BoundaryArgs),
    /// Interim-analysis timing from projected recruitment.
    Timing(TimingArgs),
    /// Projected patients with outcome data at one month.
    Project(ProjectArgs),
    /// Monte Carlo simulation of sequential monitoring.
    Simulate(SimulateArgs),
    /// Simulated power of the final comparisons.
    Power(PowerArgs),
    /// Fit the final-analysis model to a patient CSV.
    Analyse(AnalyseArgs),
    /// Write one simulated trial dataset as CSV.
    Dataset(DatasetArgs),
    /// Elicit a beta prior from a mean and a tail probability.
    Elicit(ElicitArgs),
    /// Single-group sample size.
    Samplesize(SampleSizeArgs),
}

#[derive(Debug, Args)]
pub struct BoundaryArgs {
    #[arg(long)]
    pub max_n: Option<u32>,
    /// Merge consecutive group sizes sharing a boundary.
    #[arg(long)]
    pub grouped: bool,
}

#[derive(Debug, Args)]
pub struct TimingArgs {
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long)]
    pub recruitment_multiplier: Option<f64>,
    #[arg(long)]
    pub cure_floor: Option<f64>,
    #[arg(long, value_parser = parse_weighting)]
    pub weighting: Option<Weighting>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub month: f64,
    #[arg(long)]
    pub recruitment_multiplier: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub replicates: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub analysis_months: Option<Vec<u32>>,
    /// Per strategy (control first) or per group.
    #[arg(long, value_delimiter = ',')]
    pub true_cure: Option<Vec<f64>>,
    #[arg(long)]
    pub recruitment_multiplier: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub rate_multipliers: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub cure_floors: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long)]
    pub replicates: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub ltfu: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyseArgs {
    /// CSV with columns regimen,strategy,ribavirin,stratum,outcome.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelTerms>,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Index of the power scenario supplying the cure rates.
    #[arg(long, default_value_t = 0)]
    pub scenario: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ElicitArgs {
    #[arg(long)]
    pub mean: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub tail: Option<f64>,
    #[arg(long)]
    pub fixed_ess: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SampleSizeArgs {
    #[arg(long)]
    pub target: Option<f64>,
    #[arg(long)]
    pub unacceptable: Option<f64>,
    #[arg(long)]
    pub power: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub ltfu: Option<f64>,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected `a,b`, got `{s}`"));
    }
    let f = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((f(parts[0])?, f(parts[1])?))
}

fn parse_weighting(s: &str) -> std::result::Result<Weighting, String> {
    match s {
        "uniform" => Ok(Weighting::Uniform),
        "prior-truncated" => Ok(Weighting::PriorTruncated),
        _ => Err(format!("unknown weighting `{s}` (uniform, prior-truncated)")),
    }
}

fn parse_model(s: &str) -> std::result::Result<ModelTerms, String> {
    match s {
        "main-effects" => Ok(ModelTerms::MainEffects),
        "interactions" => Ok(ModelTerms::Interactions),
        "saturated" => Ok(ModelTerms::Saturated),
        _ => Err(format!("unknown model `{s}` (main-effects, interactions, saturated)")),
    }
}

/// Exit code for an error: 2 for configuration or input problems, 3 for
/// numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Validation(_) | Error::Domain(_) | Error::Io(_) => 2,
        _ => 3,
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            let report = ErrorReport { error: e.kind(), message: e.to_string(), exit_code: code };
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| e.to_string()));
            code
        }
    }
}

/// Loads the config and applies every flag on top of it.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = cli.prior {
        c.rule.prior = p;
    }
    if let Some(v) = cli.cure_threshold {
        c.rule.cure_threshold = v;
    }
    if let Some(v) = cli.posterior_threshold {
        c.rule.posterior_prob_threshold = v;
    }
    if let Some(d) = &cli.out_dir {
        c.output.dir = Some(d.clone());
    }
    if cli.full_precision {
        c.output.full_precision = true;
    }
    match &cli.command {
        Command::Boundary(a) => {
            if a.max_n.is_some() {
                c.boundary.max_n = a.max_n;
            }
            c.boundary.grouped |= a.grouped;
        }
        Command::Timing(a) => {
            if let Some(t) = &a.thresholds {
                c.timing.thresholds = t.clone();
            }
            if let Some(m) = a.recruitment_multiplier {
                c.schedule.rate_multiplier = m;
            }
            if let Some(f) = a.cure_floor {
                c.timing.cure_floor = f;
            }
            if let Some(w) = a.weighting {
                c.timing.weighting = w;
            }
        }
        Command::Project(a) => {
            if let Some(m) = a.recruitment_multiplier {
                c.schedule.rate_multiplier = m;
            }
        }
        Command::Simulate(a) => {
            if let Some(v) = a.replicates {
                c.scenario.replicates = v;
            }
            if let Some(v) = a.seed {
                c.scenario.seed = v;
            }
            if let Some(v) = &a.analysis_months {
                c.scenario.analysis_months = Some(v.clone());
            }
            if let Some(v) = &a.true_cure {
                c.scenario.true_cure = v.clone();
            }
            if let Some(m) = a.recruitment_multiplier {
                c.schedule.rate_multiplier = m;
            }
            if let Some(v) = &a.rate_multipliers {
                c.scenario.rate_multipliers = v.clone();
            }
            if let Some(v) = &a.cure_floors {
                c.scenario.cure_floors = v.clone();
            }
        }
        Command::Power(a) => {
            if let Some(v) = a.replicates {
                c.power.replicates = v;
            }
            if let Some(v) = a.seed {
                c.power.seed = v;
            }
            if let Some(v) = a.ltfu {
                c.power.ltfu = v;
            }
        }
        Command::Dataset(a) => {
            if let Some(v) = a.seed {
                c.power.seed = v;
            }
        }
        Command::Elicit(a) => {
            if let Some(v) = a.mean {
                c.elicit.mean = v;
            }
            if let Some(v) = a.threshold {
                c.elicit.threshold = v;
            }
            if let Some(v) = a.tail {
                c.elicit.tail = v;
            }
            if a.fixed_ess.is_some() {
                c.elicit.fixed_ess = a.fixed_ess;
            }
        }
        Command::Samplesize(a) => {
            let s = &mut c.samplesize;
            for (dst, src) in [
                (&mut s.target, a.target),
                (&mut s.unacceptable, a.unacceptable),
                (&mut s.power, a.power),
                (&mut s.alpha, a.alpha),
                (&mut s.ltfu, a.ltfu),
            ] {
                if let Some(v) = src {
                    *dst = v;
                }
            }
        }
        Command::Analyse(_) => {}
    }
    Ok(c)
}

pub fn run(cli: &Cli) -> Result<()> {
    let config = resolve_config(cli)?;
    config.validate()?;
    if let Command::Project(a) = &cli.command {
        if !a.month.is_finite() {
            return Err(Error::Validation("month must be finite".into()));
        }
    }
    if cli.validate_only {
        println!("{{\"valid\":true}}");
        return Ok(());
    }
    let p = Precision { full: config.output.full_precision };
    let mut sink = Sink::new(config.output.dir.clone())?;
    match &cli.command {
        Command::Boundary(_) => cmd_boundary(&config, p, &mut sink),
        Command::Timing(_) => cmd_timing(&config, p, &mut sink),
        Command::Project(a) => cmd_project(&config, a.month, p, &mut sink),
        Command::Simulate(_) => cmd_simulate(&config, p, &mut sink),
        Command::Power(_) => cmd_power(&config, p, &mut sink),
        Command::Analyse(a) => cmd_analyse(&config, a, p, &mut sink),
        Command::Dataset(a) => cmd_dataset(&config, a.scenario, &mut sink),
        Command::Elicit(_) => cmd_elicit(&config, p, &mut sink),
        Command::Samplesize(_) => cmd_samplesize(&config, p, &mut sink),
    }
}

/// Boundary table: `analysed,min_failures`, the largest stop probabilities
/// in the row at cure rates 90% and 95%, then the smallest at 90/80/70/60%.
pub fn boundary_table(config: &RunConfig, p: Precision) -> Result<Table> {
    let rule = config.rule()?;
    let max_n = config.boundary_max_n()?;
    let rows = if config.boundary.grouped {
        let half = config.design()?.group_size / 2;
        boundary_report_grouped(&rule, max_n, &[half])?
    } else {
        boundary_report(&rule, max_n)?
    };
    let mut t = Table::new([
        "analysed",
        "min_failures",
        "p_max_90",
        "p_max_95",
        "p_min_90",
        "p_min_80",
        "p_min_70",
        "p_min_60",
    ]);
    for r in rows {
        let mut cells = vec![r.analysed.clone(), r.min_failures.map(|f| f.to_string()).unwrap_or_default()];
        cells.extend(r.p_max.iter().chain(&r.p_min).map(|&x| p.fmt(x)));
        t.push(cells);
    }
    Ok(t)
}

fn cmd_boundary(config: &RunConfig, p: Precision, sink: &mut Sink) -> Result<()> {
    sink.primary("boundary.csv", &boundary_table(config, p)?.to_csv()?)
}

fn column_label(result: &TimingResult, k: usize) -> String {
    let early = result.early.is_some() as usize;
    if k < early {
        "early".into()
    } else {
        format!("threshold {}", result.hits[k - early].threshold)
    }
}

/// Timing table: one column per analysis, one row per reported quantity.
pub fn timing_table(config: &RunConfig, result: &TimingResult, p: Precision) -> Result<Table> {
    let design = config.design()?;
    let mut columns: Vec<(String, Option<&crate::design::AnalysisPoint>)> = Vec::new();
    if let Some(e) = &result.early {
        columns.push((column_label(result, 0), Some(e)));
    }
    for h in &result.hits {
        columns.push((format!("threshold {}", p.fmt(h.threshold)), h.point.as_ref()));
    }
    let mut header = vec!["quantity".to_string()];
    header.extend(columns.iter().map(|c| c.0.clone()));
    let mut t = Table::new(header);
    let row = |name: String, f: &dyn Fn(&crate::design::AnalysisPoint) -> String| {
        let mut r = vec![name];
        r.extend(columns.iter().map(|(_, pt)| pt.map(f).unwrap_or_else(|| "unreachable".into())));
        r
    };
    t.push(row("month".into(), &|pt| pt.month.to_string()));
    t.push(row("total_recruited".into(), &|pt| pt.projection.total_recruited.to_string()));
    t.push(row("total_at_eot12".into(), &|pt| pt.projection.total_at_eot12.to_string()));
    let monitored: Vec<usize> = (0..design.strategies.len()).filter(|&s| design.strategies[s].monitored).collect();
    for &s in &monitored {
        let label = &design.strategies[s].label;
        t.push(row(format!("n_per_group {label}"), &|pt| pt.projection.count_for(s).to_string()));
    }
    for (i, &s) in monitored.iter().enumerate() {
        let label = &design.strategies[s].label;
        t.push(row(format!("avg_stop {label}"), &|pt| p.fmt(pt.avg_stop[i].1)));
    }
    Ok(t)
}

fn cmd_timing(config: &RunConfig, p: Precision, sink: &mut Sink) -> Result<()> {
    let design = config.design()?;
    let schedule = config.schedule()?;
    let rule = config.rule()?;
    let spec = config.timing_spec()?;
    let result = timing_search(&design, &schedule, &rule, &spec)?;
    sink.primary("timing.csv", &timing_table(config, &result, p)?.to_csv()?)?;
    sink.secondary("timing.json", &p.json(&result)?)?;

    if sink.dir().is_some() {
        // initial stop probability by month, assuming no earlier analysis
        let mut eval = TimingEvaluator::new(&design, &schedule, &rule, spec.range)?;
        let table = boundary(&rule, design.total_n)?;
        let mut series = Series::default();
        for m in 0..=eval.horizon() {
            let pt = eval.point(m)?;
            series.push("total_recruited", m as f64, pt.projection.total_recruited as f64);
            for (s, arm) in design.strategies.iter().enumerate().filter(|(_, a)| a.monitored) {
                let n = pt.projection.count_for(s);
                for &cure in &config.timing.plot_cure_rates {
                    series.push(
                        format!("{} cure {}", arm.label, p.fmt(cure)),
                        m as f64,
                        stop_prob_with(&table, n, cure)?,
                    );
                }
                let avg = pt.avg_stop.iter().find(|(l, _)| l == &arm.label).map(|x| x.1).unwrap_or(0.0);
                series.push(format!("{} average", arm.label), m as f64, avg);
            }
        }
        sink.secondary("stop_prob_curves.csv", &series.to_table(p).to_csv()?)?;
    }
    Ok(())
}

fn cmd_project(config: &RunConfig, month: f64, p: Precision, sink: &mut Sink) -> Result<()> {
    let row = project_eot12(&config.design()?, &config.schedule()?, month);
    sink.primary("projection.json", &p.json(&row)?)
}

/// One row per group and analysis.
pub fn stop_report_table(report: &StopReport, p: Precision) -> Table {
    let mut t = Table::new([
        "group",
        "strategy",
        "true_cure",
        "analysis",
        "month",
        "cumulative_stop",
        "mc_se",
        "mean_analysed",
    ]);
    for g in &report.groups {
        for (k, &m) in report.analysis_months.iter().enumerate() {
            t.push([
                g.label.clone(),
                g.strategy.clone(),
                p.fmt(g.true_cure),
                (k + 1).to_string(),
                m.to_string(),
                p.fmt(g.cumulative_stop[k]),
                p.fmt(g.mc_se[k]),
                p.fmt(g.mean_analysed[k]),
            ]);
        }
    }
    t
}

fn cmd_simulate(config: &RunConfig, p: Precision, sink: &mut Sink) -> Result<()> {
    let scenario = config.monitoring_scenario()?;
    let report = simulate_monitoring(&scenario)?;
    sink.primary("stop_report.json", &p.json(&report)?)?;
    sink.secondary("stop_report.csv", &stop_report_table(&report, p).to_csv()?)?;
    let mut series = Series::default();
    for g in report.groups.iter().filter(|g| g.monitored) {
        series.push(g.label.clone(), 0.0, 0.0);
        for (k, &m) in report.analysis_months.iter().enumerate() {
            series.push(g.label.clone(), m as f64, g.cumulative_stop[k]);
        }
    }
    sink.secondary("cumulative_stop.csv", &series.to_table(p).to_csv()?)?;

    if !config.scenario.rate_multipliers.is_empty() {
        let rows = scan_recruitment(&scenario, &config.scenario.rate_multipliers)?;
        let mut t = Table::new(["multiplier", "analysis", "month", "total_at_eot12"]);
        for r in &rows {
            for (k, pt) in r.timing.points().iter().enumerate() {
                t.push([
                    p.fmt(r.multiplier),
                    column_label(&r.timing, k),
                    pt.month.to_string(),
                    pt.projection.total_at_eot12.to_string(),
                ]);
            }
        }
        sink.secondary("recruitment_scan.csv", &t.to_csv()?)?;
        sink.secondary("recruitment_scan.json", &p.json(&rows)?)?;
    }
    if !config.scenario.cure_floors.is_empty() {
        let rows = scan_cure_floor(&scenario, &config.scenario.cure_floors)?;
        let mut t = Table::new(["floor", "analysis", "month"]);
        for r in &rows {
            let early = r.timing.early.as_ref().map(|e| e.month.to_string()).unwrap_or_else(|| "unreachable".into());
            t.push([p.fmt(r.floor), "early".into(), early]);
            for h in &r.timing.hits {
                let m = h.month().map(|m| m.to_string()).unwrap_or_else(|| "unreachable".into());
                t.push([p.fmt(r.floor), format!("threshold {}", p.fmt(h.threshold)), m]);
            }
        }
        sink.secondary("cure_floor_scan.csv", &t.to_csv()?)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerColumn {
    pub scenario: String,
    pub table: PowerTable,
}

/// Runs every configured power scenario.
pub fn power_columns(config: &RunConfig) -> Result<Vec<PowerColumn>> {
    let design = config.design()?;
    let specs = config.comparisons();
    config
        .power_cells(&design)?
        .into_iter()
        .map(|(scenario, cure)| {
            let table =
                power_study(&design, &cure, &specs, config.power.replicates, config.power.seed, config.power.ltfu)?;
            Ok(PowerColumn { scenario, table })
        })
        .collect()
}

/// Comparison rows by scenario columns.
pub fn power_table(columns: &[PowerColumn], p: Precision) -> Table {
    let mut header = vec!["comparison".to_string()];
    header.extend(columns.iter().map(|c| c.scenario.clone()));
    let mut t = Table::new(header);
    if let Some(first) = columns.first() {
        for (i, row) in first.table.rows.iter().enumerate() {
            let mut r = vec![row.label.clone()];
            r.extend(columns.iter().map(|c| p.fmt(c.table.rows[i].power)));
            t.push(r);
        }
    }
    let mut r = vec!["fit_errors".to_string()];
    r.extend(columns.iter().map(|c| c.table.fit_errors.to_string()));
    t.push(r);
    t
}

fn cmd_power(config: &RunConfig, p: Precision, sink: &mut Sink) -> Result<()> {
    let columns = power_columns(config)?;
    sink.primary("power.csv", &power_table(&columns, p).to_csv()?)?;
    sink.secondary("power.json", &p.json(&columns)?)
}

#[derive(Debug, Clone, Serialize)]
struct ComparisonReport {
    comparison: String,
    outcome: ComparisonOutcome,
    posterior: Vec<NormalPosterior>,
}

#[derive(Debug, Clone, Serialize)]
struct PriorPosterior {
    comparison: Factor,
    role: &'static str,
    prior: AnalysisPrior,
    posterior: NormalPosterior,
}

#[derive(Debug, Clone, Serialize)]
struct AnalysisReport {
    fit: FitResult,
    comparisons: Vec<ComparisonReport>,
    sensitivity: Vec<PriorPosterior>,
}

fn cmd_analyse(config: &RunConfig, args: &AnalyseArgs, p: Precision, sink: &mut Sink) -> Result<()> {
    let file =
        std::fs::File::open(&args.data).map_err(|e| Error::Io(format!("cannot open {}: {e}", args.data.display())))?;
    let data = read_records(file)?;
    let fit = fit_model(&data, args.model.unwrap_or_default())?;
    let mut comparisons = Vec::new();
    for spec in config.comparisons() {
        comparisons.push(ComparisonReport {
            comparison: spec.row_label(),
            outcome: test_comparison(&fit, &spec)?,
            posterior: bayes_risk_difference(&fit, &spec)?,
        });
    }
    let mut sensitivity = Vec::new();
    for set in sensitivity_priors() {
        let base = match set.label {
            Factor::Strategy => ComparisonSpec::non_inferiority(Factor::Strategy, -0.10)
                .with_strategy_contrast(StrategyContrast::Pooled),
            Factor::Regimen => ComparisonSpec::non_inferiority(Factor::Regimen, -0.05),
            Factor::Ribavirin => ComparisonSpec::superiority(Factor::Ribavirin, 0.05),
        };
        let mut priors = vec![("reference", set.reference), ("enthusiastic", set.enthusiastic)];
        priors.extend(set.sceptical.iter().map(|&s| ("sceptical", s)));
        for (role, prior) in priors {
            let spec = ComparisonSpec { prior, ..base.clone() };
            for posterior in bayes_risk_difference(&fit, &spec)? {
                sensitivity.push(PriorPosterior { comparison: set.label, role, prior, posterior });
            }
        }
    }
    sink.primary("analysis.json", &p.json(&AnalysisReport { fit, comparisons, sensitivity })?)
}

fn cmd_dataset(config: &RunConfig, scenario: usize, sink: &mut Sink) -> Result<()> {
    let design = config.design()?;
    let cells = config.power_cells(&design)?;
    let (_, cure) =
        cells.get(scenario).ok_or_else(|| Error::Validation(format!("no power scenario with index {scenario}")))?;
    let mut rng = rng_stream(config.power.seed, 0);
    let data = simulate_dataset(&design, cure, 0.5, config.power.ltfu, &mut rng)?;
    let mut buf = Vec::new();
    write_records(&mut buf, &data)?;
    sink.primary("dataset.csv", &String::from_utf8(buf).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Serialize)]
struct ElicitReport {
    prior: NamedPrior,
    /// Shapes rounded to two decimals.
    rounded: BetaParams,
    /// ESS rounded to the configured step, then shapes to two decimals.
    displayed: BetaParams,
    displayed_variance: f64,
    achieved_tail: f64,
    non_unique: bool,
}

fn cmd_elicit(config: &RunConfig, p: Precision, sink: &mut Sink) -> Result<()> {
    let (target, search) = config.elicitation()?;
    let e = elicit_beta(target, search)?;
    let displayed = e.prior.round_for_display(config.elicit.ess_step)?;
    let report = ElicitReport {
        displayed_variance: displayed.variance(),
        prior: e.prior,
        rounded: e.rounded,
        displayed,
        achieved_tail: e.achieved_tail,
        non_unique: e.non_unique,
    };
    sink.primary("elicit.json", &p.json(&report)?)
}

fn cmd_samplesize(config: &RunConfig, p: Precision, sink: &mut Sink) -> Result<()> {
    let s = &config.samplesize;
    let report: SampleSizeReport = single_group_sample_size(s.target, s.unacceptable, s.power, s.alpha, s.ltfu)?;
    sink.primary("samplesize.json", &p.json(&report)?)
}
