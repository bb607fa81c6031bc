//! Command-line driver: `run`, `study`, `check-kernel` and `two-run`.
//!
//! Exit codes: 0 when every toggled check passes, 1 when a check fails,
//! 2 for configuration, I/O, hypothesis-gate and solver errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{Config, ConfigErrors};
use crate::diagnostics::{check_stability_envelope, compute_kappa, BoundReport, CheckKind, KappaBreakdown, MomentSeries};
use crate::kernels::{admissible_m0_interval, CoagKernel, FragRate};
use crate::solver::{run_with, two_run_distance, RunOutput, Scenario, SolverError, TwoRunOutput};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigErrors),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cofrag", version, about = "Coagulation with multiple fragmentation on a logarithmic size grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one scenario and check its envelopes.
    Run(CommonArgs),
    /// Sweep the truncation size and/or the grid resolution.
    Study(CommonArgs),
    /// Certify the kernel hypotheses without integrating.
    CheckKernel(CommonArgs),
    /// Integrate a datum and a perturbed copy in lockstep.
    TwoRun(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Scenario file in `key = value` format.
    config: PathBuf,
    /// Run even when the kernel hypotheses cannot be certified.
    #[arg(long)]
    force: bool,
    /// Validate and print the resolved parameters without writing anything.
    #[arg(long)]
    dry_run: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Parse `args` (including the program name), execute, return the exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn execute(command: Command) -> Result<bool, CliError> {
    let (args, kind) = match &command {
        Command::Run(a) => (a, "run"),
        Command::Study(a) => (a, "study"),
        Command::CheckKernel(a) => (a, "check-kernel"),
        Command::TwoRun(a) => (a, "two-run"),
    };
    let text = fs::read_to_string(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    let config = Config::parse(&text)?;
    if kind == "study" {
        study_plan(&config)?;
    }
    if args.dry_run {
        print!("{}", dry_run_summary(&config)?);
        return Ok(true);
    }
    match command {
        Command::Run(a) => cmd_run(&config, &a),
        Command::Study(a) => cmd_study(&config, &a),
        Command::CheckKernel(_) => cmd_check_kernel(&config),
        Command::TwoRun(a) => cmd_two_run(&config, &a),
    }
}

fn dry_run_summary(config: &Config) -> Result<String, CliError> {
    let sc = &config.scenario;
    let grid = sc.grid()?;
    let mut out = config.to_text();
    let _ = writeln!(out, "# grid: {} cells on [{:e}, {:e}), ratio {:.6}", grid.len(), sc.x_min, sc.j, grid.ratio());
    let _ = writeln!(out, "# outputs: {}", sc.output_times().len());
    Ok(out)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn header(config: &Config) -> String {
    config.to_text().lines().map(|l| format!("# {l}\n")).collect()
}

/// Moment time series with the resolved configuration as a comment header.
pub fn moments_csv(config: &Config, series: &MomentSeries) -> String {
    let sc = &config.scenario;
    let m0 = sc.spec.m0();
    let with_number = !sc.spec.frag.is_zero();
    let mut orders = vec![m0];
    if !with_number {
        orders.push(0.0);
    }
    orders.extend([1.0, 2.0, 2.0 + sc.delta]);
    if !orders.contains(&sc.moment_order) {
        orders.push(sc.moment_order);
    }
    let flux = sc.flux_orders();
    let mut out = header(config);
    let mut cols = vec!["t".to_string()];
    cols.extend(orders.iter().map(|m| format!("M_{m}")));
    cols.push("W".into());
    cols.extend(flux.iter().map(|m| format!("P_{m}")));
    cols.push("subgrid_fraction".into());
    out.push_str(&cols.join(","));
    out.push('\n');
    let moments: Vec<&[f64]> = orders.iter().map(|&m| series.moment(m).expect("recorded order")).collect();
    let fluxes: Vec<&[f64]> = flux.iter().map(|&m| series.flux(m).expect("recorded order")).collect();
    for i in 0..series.len() {
        let mut row = vec![format!("{:.16e}", series.times[i])];
        row.extend(moments.iter().map(|c| format!("{:.16e}", c[i])));
        row.push(format!("{:.16e}", series.w_functional[i]));
        row.extend(fluxes.iter().map(|c| format!("{:.16e}", c[i])));
        row.push(format!("{:.16e}", series.subgrid_fraction[i]));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn run_text(out: &RunOutput, report: &BoundReport) -> String {
    let s = &out.stats;
    let mut text = out.hypotheses.render();
    let _ = writeln!(text);
    let _ = writeln!(
        text,
        "steps {}  rejected {}  restricted {}  dt in [{:.3e}, {:.3e}]  wall {:.3} s",
        s.steps, s.rejected, s.restricted, s.dt_min, s.dt_max, s.wall_seconds
    );
    let _ = writeln!(text);
    text.push_str(&report.render());
    text
}

fn cmd_run(config: &Config, args: &CommonArgs) -> Result<bool, CliError> {
    ensure_dir(&args.out)?;
    let mut sc = config.scenario.clone();
    let fatal = sc.checks_fatal;
    // the report is written either way; fatality only sets the exit code
    sc.checks_fatal = false;
    let out = run_with(&sc, args.force)?;
    write(&args.out.join("moments.csv"), &moments_csv(config, &out.series))?;
    let report = &out.report;
    write(&args.out.join("report.txt"), &run_text(&out, report))?;
    write(&args.out.join("report.csv"), &report.to_csv())?;
    print!("{}", report.render());
    if fatal && !report.passed() {
        eprintln!("bound checks failed");
    }
    Ok(report.passed())
}

/// Two lockstep runs plus the stability check, when it is toggled.
pub struct TwoRunResult {
    pub output: TwoRunOutput,
    pub kappa: Option<KappaBreakdown>,
    pub report: BoundReport,
    pub notes: Vec<String>,
}

pub fn two_run_check(sc: &Scenario, force: bool) -> Result<TwoRunResult, SolverError> {
    let output = two_run_distance(sc, force)?;
    let mut notes = Vec::new();
    let mut report = BoundReport::default();
    let kappa = match compute_kappa(&sc.spec, sc.delta, sc.sample_budget) {
        Ok(k) => Some(k),
        Err(e) => {
            notes.push(format!("contraction constant unavailable: {e}"));
            None
        }
    };
    if sc.checks.contains(&CheckKind::Stability) {
        let k = kappa.as_ref().map_or(f64::INFINITY, |k| k.kappa);
        let check = check_stability_envelope(
            &output.times,
            &output.distance,
            &output.series[0],
            &output.series[1],
            k,
            sc.spec.m0(),
            sc.delta,
            sc.tolerance + sc.allowance,
        )?;
        report.checks.push(check);
    }
    Ok(TwoRunResult { output, kappa, report, notes })
}

fn cmd_two_run(config: &Config, args: &CommonArgs) -> Result<bool, CliError> {
    ensure_dir(&args.out)?;
    let res = two_run_check(&config.scenario, args.force)?;
    let mut csv = header(config);
    csv.push_str("t,distance,envelope\n");
    let env = res.report.get(CheckKind::Stability).map(|c| c.envelope.clone());
    for (i, (t, d)) in res.output.times.iter().zip(&res.output.distance).enumerate() {
        let e = env.as_ref().map_or(f64::NAN, |e| e[i]);
        let _ = writeln!(csv, "{t:.16e},{d:.16e},{e:.16e}");
    }
    write(&args.out.join("distance.csv"), &csv)?;
    let mut text = String::new();
    if let Some(k) = &res.kappa {
        let _ = writeln!(text, "kappa {:.6e} attained by {} (Y = {:.6})", k.kappa, k.attaining, k.y);
        for (name, v) in &k.terms {
            let _ = writeln!(text, "    {name:<34} {v:.6e}");
        }
    }
    for n in &res.notes {
        let _ = writeln!(text, "note: {n}");
    }
    text.push_str(&res.report.render());
    write(&args.out.join("report.txt"), &text)?;
    write(&args.out.join("report.csv"), &res.report.to_csv())?;
    print!("{text}");
    Ok(res.report.passed())
}

fn cmd_check_kernel(config: &Config) -> Result<bool, CliError> {
    let sc = &config.scenario;
    let hyp = sc.hypotheses()?;
    let mut text = hyp.render();
    if let (CoagKernel::PowerLawSum { alpha, beta }, FragRate::PowerLaw { gamma }) = (&sc.spec.coag, &sc.spec.frag) {
        match admissible_m0_interval(*alpha, *beta, *gamma, sc.spec.nu()) {
            Ok(Some((lo, hi))) => {
                let _ = writeln!(text, "admissible m0 interval: ({lo:.6}, {hi:.6}]");
            }
            Ok(None) => {
                let _ = writeln!(text, "admissible m0 interval: empty");
            }
            Err(e) => {
                let _ = writeln!(text, "admissible m0 interval: {e}");
            }
        }
    }
    match compute_kappa(&sc.spec, sc.delta, sc.sample_budget) {
        Ok(k) => {
            let _ = writeln!(text, "kappa {:.6e} attained by {}", k.kappa, k.attaining);
        }
        Err(e) => {
            let _ = writeln!(text, "kappa unavailable: {e}");
        }
    }
    print!("{text}");
    Ok(hyp.existence_ok())
}

/// Values swept by a study: truncation sizes and resolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyPlan {
    pub js: Vec<f64>,
    pub resolutions: Vec<usize>,
    /// Resolution of the reference run, twice the finest swept one.
    pub reference: Option<usize>,
}

pub fn study_plan(config: &Config) -> Result<StudyPlan, CliError> {
    let sc = &config.scenario;
    let by_j = config.study_j.len() >= 3;
    let by_res = config.study_resolutions.len() >= 3;
    if !by_j && !by_res {
        return Err(CliError::Usage(
            "a study needs at least three values in study_j or study_resolutions".into(),
        ));
    }
    let js = if by_j { config.study_j.clone() } else { vec![sc.j] };
    let resolutions = if by_res { config.study_resolutions.clone() } else { vec![sc.cells_per_decade] };
    let reference = by_res.then(|| 2 * resolutions.iter().copied().max().unwrap_or(0));
    for &j in &js {
        if !(j > sc.x_min) {
            return Err(CliError::Usage(format!("study_j value {j} must exceed x_min")));
        }
    }
    if resolutions.contains(&0) {
        return Err(CliError::Usage("study_resolutions must be positive".into()));
    }
    Ok(StudyPlan { js, resolutions, reference })
}

/// Final moments and check margins of one study run.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub j: f64,
    pub cells_per_decade: usize,
    pub reference: bool,
    pub final_moments: Vec<(f64, f64)>,
    pub report: BoundReport,
    pub wall_seconds: f64,
}

/// One line of the convergence summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceLine {
    /// `truncation` or `resolution`.
    pub kind: &'static str,
    pub j: f64,
    pub cells_per_decade: usize,
    pub moment: f64,
    /// Relative change from the previous `j`, or relative error against the reference.
    pub value: f64,
    /// Observed order from the previous resolution, when defined.
    pub order: Option<f64>,
}

pub struct StudyResult {
    pub plan: StudyPlan,
    pub rows: Vec<StudyRow>,
    pub convergence: Vec<ConvergenceLine>,
}

fn worker_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("COFRAG_WORKERS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("COFRAG_WORKERS must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Usage(e.to_string()))
}

/// Run every point of the study plan in parallel.
pub fn run_study(config: &Config, force: bool) -> Result<StudyResult, CliError> {
    let plan = study_plan(config)?;
    let mut points: Vec<(f64, usize, bool)> = Vec::new();
    for &j in &plan.js {
        for &r in &plan.resolutions {
            points.push((j, r, false));
        }
        if let Some(r) = plan.reference {
            points.push((j, r, true));
        }
    }
    let base = &config.scenario;
    let orders = [base.spec.m0(), 1.0, 2.0];
    let rows: Vec<Result<StudyRow, SolverError>> = worker_pool()?.install(|| {
        points
            .par_iter()
            .map(|&(j, r, reference)| {
                let mut sc = base.clone();
                sc.j = j;
                sc.cells_per_decade = r;
                sc.checks_fatal = false;
                let out = run_with(&sc, force)?;
                let final_moments = orders
                    .iter()
                    .map(|&m| (m, *out.series.moment(m).expect("recorded").last().expect("nonempty")))
                    .collect();
                Ok(StudyRow {
                    j,
                    cells_per_decade: r,
                    reference,
                    final_moments,
                    report: out.report,
                    wall_seconds: out.stats.wall_seconds,
                })
            })
            .collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let convergence = convergence_lines(&plan, &rows, &orders);
    Ok(StudyResult { plan, rows, convergence })
}

fn moment_of(row: &StudyRow, m: f64) -> f64 {
    row.final_moments.iter().find(|(o, _)| *o == m).map_or(f64::NAN, |(_, v)| *v)
}

fn convergence_lines(plan: &StudyPlan, rows: &[StudyRow], orders: &[f64]) -> Vec<ConvergenceLine> {
    let find = |j: f64, r: usize, reference: bool| {
        rows.iter().find(|x| x.j == j && x.cells_per_decade == r && x.reference == reference)
    };
    let mut lines = Vec::new();
    if plan.js.len() >= 3 {
        for &r in &plan.resolutions {
            for w in plan.js.windows(2) {
                let (Some(a), Some(b)) = (find(w[0], r, false), find(w[1], r, false)) else { continue };
                for &m in orders {
                    let (va, vb) = (moment_of(a, m), moment_of(b, m));
                    lines.push(ConvergenceLine {
                        kind: "truncation",
                        j: w[1],
                        cells_per_decade: r,
                        moment: m,
                        value: (vb - va).abs() / vb.abs(),
                        order: None,
                    });
                }
            }
        }
    }
    if let Some(rref) = plan.reference {
        for &j in &plan.js {
            let Some(reference) = find(j, rref, true) else { continue };
            for &m in orders {
                let exact = moment_of(reference, m);
                let mut prev: Option<(usize, f64)> = None;
                for &r in &plan.resolutions {
                    let Some(row) = find(j, r, false) else { continue };
                    let err = (moment_of(row, m) - exact).abs() / exact.abs();
                    let order = prev.and_then(|(pr, pe)| {
                        let o = (pe / err).ln() / (r as f64 / pr as f64).ln();
                        (o.is_finite() && r != pr).then_some(o)
                    });
                    lines.push(ConvergenceLine {
                        kind: "resolution",
                        j,
                        cells_per_decade: r,
                        moment: m,
                        value: err,
                        order,
                    });
                    prev = Some((r, err));
                }
            }
        }
    }
    lines
}

fn cmd_study(config: &Config, args: &CommonArgs) -> Result<bool, CliError> {
    ensure_dir(&args.out)?;
    let res = run_study(config, args.force)?;
    let mut csv = header(config);
    let mut cols: Vec<String> = ["j", "cells_per_decade", "reference"].iter().map(|s| s.to_string()).collect();
    if let Some(r) = res.rows.first() {
        cols.extend(r.final_moments.iter().map(|(m, _)| format!("M_{m}")));
        cols.extend(r.report.checks.iter().map(|c| format!("margin_{}", c.name())));
    }
    csv.push_str(&cols.join(","));
    csv.push('\n');
    let mut passed = true;
    for r in &res.rows {
        let mut row = vec![format!("{:.16e}", r.j), r.cells_per_decade.to_string(), r.reference.to_string()];
        row.extend(r.final_moments.iter().map(|(_, v)| format!("{v:.16e}")));
        row.extend(r.report.checks.iter().map(|c| format!("{:.16e}", c.worst_margin)));
        csv.push_str(&row.join(","));
        csv.push('\n');
        passed &= r.report.passed();
    }
    write(&args.out.join("study.csv"), &csv)?;
    let mut conv = header(config);
    conv.push_str("kind,j,cells_per_decade,moment,value,observed_order\n");
    for l in &res.convergence {
        let order = l.order.map_or(String::new(), |o| format!("{o:.6}"));
        let _ = writeln!(conv, "{},{:.16e},{},{},{:.16e},{}", l.kind, l.j, l.cells_per_decade, l.moment, l.value, order);
    }
    write(&args.out.join("study_convergence.csv"), &conv)?;
    let wall: f64 = res.rows.iter().map(|r| r.wall_seconds).sum();
    println!("{} runs ({wall:.2} s of solver time), checks {}", res.rows.len(), if passed { "pass" } else { "FAIL" });
    Ok(passed)
}
