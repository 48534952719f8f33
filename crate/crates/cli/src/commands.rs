//! The five subcommands. Each turns a resolved configuration into a
//! [`Report`]; writing files is left to the caller.

use std::path::Path;

use dlcz_repeater::chain::{simulate_chain, simulate_elementary_link, ChainTrace, ElementaryStats};
use dlcz_repeater::experiment::{run_experiment, ExperimentReport};
use dlcz_repeater::fit::{fit_exponential, fit_linear_origin, fit_sinusoid, FitResult, Samples};
use dlcz_repeater::rate::{elementary_p0, multiplexed_success, swap_chain, ChainReport, RateError};
use dlcz_repeater::sweep::{sweep, sweep_fixed_total, SweepReport, PARAMETERS};
use serde::Serialize;

use crate::config::{RunConfig, SimMode};
use crate::error::CliError;
use crate::output::{cell, json, sig9, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `A·exp(−x/τ)`
    Exp,
    /// `s·x`
    Linear,
    /// `a·(1 + V·cos(x + φ))`
    Sinusoid,
}

impl FitModel {
    fn parameter_names(self) -> &'static [&'static str] {
        match self {
            FitModel::Exp => &["amplitude", "decay_time"],
            FitModel::Linear => &["slope"],
            FitModel::Sinusoid => &["mean", "visibility", "phase_rad"],
        }
    }
}

/// What a command produced.
#[derive(Debug)]
pub struct Report {
    pub command: &'static str,
    pub stdout: String,
    /// Result files as (name, contents).
    pub files: Vec<(String, String)>,
    pub warnings: Vec<String>,
    /// Raised once the files are safely written.
    pub failure: Option<CliError>,
}

impl Report {
    fn new(command: &'static str) -> Self {
        Self {
            command,
            stdout: String::new(),
            files: Vec::new(),
            warnings: Vec::new(),
            failure: None,
        }
    }

    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }
}

fn render<T: Serialize>(format: Format, value: &T, table: &Table) -> String {
    match format {
        Format::Json => json(value),
        Format::Csv => table.to_csv(),
    }
}

#[derive(Debug, Serialize)]
struct StalledChain {
    p0: f64,
    p0_multiplexed: f64,
    rate_hz: f64,
    stalled_level: usize,
}

fn chain_table(r: &ChainReport) -> Table {
    let mut t = Table::new(&["quantity", "value"]);
    let mut row = |k: String, v: f64| t.push(vec![k, sig9(v)]);
    row("p0".into(), r.p0);
    row("p0_multiplexed".into(), r.p0_multiplexed);
    row("p0_multiplexed_linear".into(), r.p0_multiplexed_linear);
    row("t_cc_s".into(), r.t_cc);
    row("t0_s".into(), r.t0);
    for level in &r.levels {
        row(format!("p{}", level.level), level.p_swap);
        row(format!("t{}_s", level.level), level.time);
    }
    row("p_pr".into(), r.p_pr);
    row("rate_hz".into(), r.rate_hz);
    t
}

/// Closed-form chain rate.
pub fn rate(cfg: &RunConfig, format: Format) -> Result<Report, CliError> {
    let chain = cfg.chain();
    let mut report = Report::new("rate");
    match swap_chain(&chain) {
        Ok(r) => {
            let table = chain_table(&r);
            report.file("rate.json", json(&r));
            report.file("rate.csv", table.to_csv());
            report.stdout = render(format, &r, &table);
        }
        Err(RateError::Stalled { level }) => {
            let p0 = elementary_p0(&chain)?;
            let stalled = StalledChain {
                p0,
                p0_multiplexed: multiplexed_success(p0, chain.mode_count)?,
                rate_hz: 0.0,
                stalled_level: level,
            };
            report.warnings.push(format!(
                "chain stalls at level {level}: a success probability is zero, rate is 0"
            ));
            let mut table = Table::new(&["quantity", "value"]);
            table.push(vec!["p0".into(), sig9(stalled.p0)]);
            table.push(vec!["p0_multiplexed".into(), sig9(stalled.p0_multiplexed)]);
            table.push(vec!["rate_hz".into(), "0".into()]);
            table.push(vec!["stalled_level".into(), level.to_string()]);
            report.file("rate.json", json(&stalled));
            report.file("rate.csv", table.to_csv());
            report.stdout = render(format, &stalled, &table);
        }
        Err(e) => return Err(e.into()),
    }
    Ok(report)
}

#[derive(Debug, Serialize)]
struct ChainSummary {
    trials: u64,
    delivered: u64,
    timed_out: u64,
    mean_delivery_time_s: Option<f64>,
    empirical_rate_hz: Option<f64>,
    rate_stderr_hz: Option<f64>,
    analytic_rate_hz: Option<f64>,
    swap_success: Vec<Option<f64>>,
}

#[derive(Debug, Serialize)]
struct ElementarySummary {
    intervals: u64,
    successes: u64,
    success_per_interval: f64,
    stderr: f64,
    analytic_success: f64,
    mean_waiting_time_s: f64,
}

fn summary_table(pairs: &[(&str, Option<f64>)]) -> Table {
    let mut t = Table::new(&["quantity", "value"]);
    for (k, v) in pairs {
        t.push(vec![k.to_string(), cell(*v)]);
    }
    t
}

fn simulate_full_chain(cfg: &RunConfig, format: Format) -> Result<Report, CliError> {
    let config = cfg.sim_config();
    let trace: ChainTrace = simulate_chain(&config)?;
    let mut report = Report::new("simulate");
    let mut latency = Table::new(&["bin_start_s", "bin_end_s", "count"]);
    let w = trace.latency_histogram.bin_width;
    for (i, &n) in trace.latency_histogram.counts.iter().enumerate() {
        latency.push(vec![sig9(i as f64 * w), sig9((i + 1) as f64 * w), n.to_string()]);
    }
    let summary = ChainSummary {
        trials: trace.trials,
        delivered: trace.delivered(),
        timed_out: trace.timed_out,
        mean_delivery_time_s: trace.mean_delivery_time,
        empirical_rate_hz: trace.empirical_rate_hz,
        rate_stderr_hz: trace.rate_stderr_hz,
        analytic_rate_hz: trace.analytic_rate_hz,
        swap_success: trace.levels.iter().map(|l| l.success_fraction()).collect(),
    };
    let table = summary_table(&[
        ("trials", Some(summary.trials as f64)),
        ("delivered", Some(summary.delivered as f64)),
        ("timed_out", Some(summary.timed_out as f64)),
        ("mean_delivery_time_s", summary.mean_delivery_time_s),
        ("empirical_rate_hz", summary.empirical_rate_hz),
        ("rate_stderr_hz", summary.rate_stderr_hz),
        ("analytic_rate_hz", summary.analytic_rate_hz),
    ]);
    report.file("trace.json", json(&trace));
    report.file("latency.csv", latency.to_csv());
    report.stdout = render(format, &summary, &table);
    if trace.timeout_fraction() > 0.5 {
        report.failure = Some(CliError::Starved(format!(
            "{} of {} trials exceeded max_sim_time_s = {} s",
            trace.timed_out,
            trace.trials,
            sig9(config.max_sim_time)
        )));
    }
    Ok(report)
}

fn simulate_link(cfg: &RunConfig, format: Format) -> Result<Report, CliError> {
    let chain = cfg.chain();
    let stats: ElementaryStats = simulate_elementary_link(&chain, cfg.sim().trials, cfg.seed)?;
    let analytic = multiplexed_success(elementary_p0(&chain)?, chain.mode_count)?;
    let mut report = Report::new("simulate");
    let mut waiting = Table::new(&["intervals", "count"]);
    for (k, &n) in stats.waiting.iter().enumerate() {
        waiting.push(vec![(k + 1).to_string(), n.to_string()]);
    }
    let summary = ElementarySummary {
        intervals: stats.intervals,
        successes: stats.successes,
        success_per_interval: stats.success_per_interval,
        stderr: stats.stderr,
        analytic_success: analytic,
        mean_waiting_time_s: stats.mean_waiting_time,
    };
    let table = summary_table(&[
        ("intervals", Some(summary.intervals as f64)),
        ("successes", Some(summary.successes as f64)),
        ("success_per_interval", Some(summary.success_per_interval)),
        ("stderr", Some(summary.stderr)),
        ("analytic_success", Some(summary.analytic_success)),
        ("mean_waiting_time_s", Some(summary.mean_waiting_time_s)),
    ]);
    report.file("elementary.json", json(&stats));
    report.file("waiting.csv", waiting.to_csv());
    report.stdout = render(format, &summary, &table);
    Ok(report)
}

/// Monte Carlo of the chain or of one elementary link.
pub fn simulate(cfg: &RunConfig, format: Format) -> Result<Report, CliError> {
    match cfg.sim().mode {
        SimMode::Chain => simulate_full_chain(cfg, format),
        SimMode::ElementaryLink => simulate_link(cfg, format),
    }
}

fn storage_table(report: &ExperimentReport) -> Table {
    let mut t = Table::new(&["storage_time_us", "C", "C_stderr", "V", "eta", "V_stderr"]);
    for p in &report.storage_scan {
        t.push(vec![
            sig9(p.storage_time * 1e6),
            sig9(p.concurrence),
            sig9(p.concurrence_se),
            sig9(p.visibility),
            cell(p.efficiency),
            sig9(p.visibility_se),
        ]);
    }
    t
}

#[derive(Debug, Serialize)]
struct ExperimentSummary<'a> {
    storage_scan: Vec<StorageRow>,
    mode_scan: Option<&'a dlcz_repeater::experiment::ModeScan>,
}

#[derive(Debug, Serialize)]
struct StorageRow {
    storage_time_us: f64,
    concurrence: f64,
    concurrence_se: f64,
    visibility: f64,
    visibility_se: f64,
    efficiency: Option<f64>,
}

/// Simulated concurrence, visibility and efficiency measurements.
pub fn link_experiment(cfg: &RunConfig, format: Format) -> Result<Report, CliError> {
    let plan = cfg.experiment_plan();
    let mut report = Report::new("link-experiment");
    report.warnings = plan.link.warnings();
    let result = run_experiment(&plan)?;
    let storage = storage_table(&result);
    report.file("experiment.json", json(&result));
    if !result.storage_scan.is_empty() {
        report.file("storage.csv", storage.to_csv());
    }
    let mut primary = storage;
    if let Some(scan) = &result.mode_scan {
        let mut t = Table::new(&["mode_count", "P_D", "C", "P_D_stderr", "C_stderr"]);
        for p in &scan.points {
            t.push(vec![
                p.mode_count.to_string(),
                sig9(p.detection),
                sig9(p.concurrence),
                sig9(p.detection_se),
                sig9(p.concurrence_se),
            ]);
        }
        t.notes.push(format!(
            "slope {} +/- {}, single-mode model {}",
            sig9(scan.slope.params[0]),
            sig9(scan.slope.std_errors[0]),
            sig9(scan.expected_slope)
        ));
        report.file("modes.csv", t.to_csv());
        if result.storage_scan.is_empty() {
            primary = t;
        }
    }
    let summary = ExperimentSummary {
        storage_scan: result
            .storage_scan
            .iter()
            .map(|p| StorageRow {
                storage_time_us: p.storage_time * 1e6,
                concurrence: p.concurrence,
                concurrence_se: p.concurrence_se,
                visibility: p.visibility,
                visibility_se: p.visibility_se,
                efficiency: p.efficiency,
            })
            .collect(),
        mode_scan: result.mode_scan.as_ref(),
    };
    report.stdout = render(format, &summary, &primary);
    Ok(report)
}

/// Reads `x,y[,weight]` samples; columns are found by header name.
pub fn read_samples(path: &Path) -> Result<Samples, CliError> {
    let bad = |msg: String| CliError::Parse(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ix), Some(iy)) = (column("x"), column("y")) else {
        return Err(bad(format!("header must name columns x and y, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    };
    let iw = column("weight");
    let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let line = record.position().map_or(i as u64 + 2, |p| p.line());
        let field = |k: usize, name: &str| -> Result<f64, CliError> {
            let raw = record.get(k).ok_or_else(|| bad(format!("line {line}: missing {name}")))?;
            raw.parse::<f64>()
                .map_err(|_| bad(format!("line {line}: {name} = `{raw}` is not a number")))
        };
        x.push(field(ix, "x")?);
        y.push(field(iy, "y")?);
        if let Some(k) = iw {
            w.push(field(k, "weight")?);
        }
    }
    let samples = if iw.is_some() {
        Samples::with_weights(x, y, w)
    } else {
        Samples::new(x, y)
    };
    Ok(samples?)
}

#[derive(Debug, Serialize)]
struct FitOutput<'a> {
    model: FitModel,
    parameter_names: &'static [&'static str],
    #[serde(flatten)]
    result: &'a FitResult,
}

/// Weighted least-squares fit of a CSV file.
pub fn fit(csv_path: &Path, model: FitModel, format: Format) -> Result<Report, CliError> {
    let samples = read_samples(csv_path)?;
    let result = match model {
        FitModel::Exp => fit_exponential(&samples),
        FitModel::Linear => fit_linear_origin(&samples),
        FitModel::Sinusoid => fit_sinusoid(&samples),
    }?;
    let names = model.parameter_names();
    let mut table = Table::new(&["parameter", "value", "std_error"]);
    for ((name, v), se) in names.iter().zip(&result.params).zip(&result.std_errors) {
        table.push(vec![name.to_string(), sig9(*v), sig9(*se)]);
    }
    let out = FitOutput { model, parameter_names: names, result: &result };
    let mut report = Report::new("fit");
    report.file("fit.json", json(&out));
    report.file("fit.csv", table.to_csv());
    report.stdout = render(format, &out, &table);
    if !result.converged {
        report.failure = Some(CliError::NotConverged(format!(
            "{model:?} fit did not converge after {} iterations",
            result.iterations
        )));
    }
    Ok(report)
}

/// Grid of a sweep: evenly spaced values, or nesting depths at a fixed
/// total distance.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepArgs {
    pub param: String,
    pub min: f64,
    pub max: f64,
    pub steps: Option<usize>,
    pub fixed_total_km: Option<f64>,
}

/// Closed-form rate along one parameter.
pub fn sweep_rate(cfg: &RunConfig, args: &SweepArgs, format: Format) -> Result<Report, CliError> {
    if !PARAMETERS.contains(&args.param.as_str()) {
        return Err(CliError::Usage(format!(
            "unknown sweep parameter `{}`; expected one of {}",
            args.param,
            PARAMETERS.join(", ")
        )));
    }
    let base = cfg.chain();
    let result: SweepReport = match (args.fixed_total_km, args.steps) {
        (Some(total), _) => {
            if args.param != "l0_km" {
                return Err(CliError::Usage("--fixed-total-km sweeps l0_km only".into()));
            }
            sweep_fixed_total(&base, total, args.min, args.max)?
        }
        (None, Some(steps)) => sweep(&base, &args.param, args.min, args.max, steps)?,
        (None, None) => return Err(CliError::Usage("--steps is required".into())),
    };
    let mut table = Table::new(&["value", "l0_km", "n_levels", "rate_hz", "stalled"]);
    for r in &result.rows {
        table.push(vec![
            sig9(r.value),
            sig9(r.l0_km),
            r.n_levels.to_string(),
            sig9(r.rate_hz),
            r.stalled.to_string(),
        ]);
    }
    let m = result.monotonicity;
    table.notes.push(format!(
        "non_decreasing={} non_increasing={} strictly_increasing={} strictly_decreasing={}",
        m.non_decreasing, m.non_increasing, m.strictly_increasing, m.strictly_decreasing
    ));
    table.notes.push(format!(
        "argmax_row={} interior_maximum={}",
        result.argmax, result.interior_maximum
    ));
    let mut report = Report::new("sweep");
    if result.rows.iter().any(|r| r.stalled) {
        report.warnings.push("some grid points stall; their rate is reported as 0".into());
    }
    report.file("sweep.json", json(&result));
    report.file("sweep.csv", table.to_csv());
    report.stdout = render(format, &result, &table);
    Ok(report)
}
