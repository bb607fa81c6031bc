//! Time integration of the truncated system on a fixed grid.

mod initial;
mod stepper;

pub use initial::InitialCondition;
pub use stepper::{StepControl, StepInfo, Stepper};

use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::diagnostics::{self, BoundReport, CheckKind, DiagnosticsError, MomentSeries};
use crate::discretization::{build_grid, DiscretizationError, Operators, SizeGrid, State};
use crate::kernels::{
    verify_hypotheses, CoagKernel, DaughterDist, FragRate, HypothesisReport, KernelError, KernelSpec,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("non-finite derivative at t = {t} in cell {cell}")]
    NonFinite { t: f64, cell: usize },
    #[error("step control failed: {0}")]
    StepFailure(String),
    #[error("kernel hypotheses not certified (use --force to run anyway):\n{0}")]
    HypothesesFailed(String),
    #[error("bound checks failed:\n{}", .0.render())]
    ChecksFailed(Box<BoundReport>),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: KernelSpec,
    pub x_min: f64,
    pub j: f64,
    pub cells_per_decade: usize,
    pub initial: InitialCondition,
    pub t_end: f64,
    pub cadence: f64,
    pub control: StepControl,
    pub checks: Vec<CheckKind>,
    /// Abort `run` with the report when a toggled check fails.
    pub checks_fatal: bool,
    pub tolerance: f64,
    /// Extra relative slack added to every envelope for discretization error.
    pub allowance: f64,
    /// Exponent in `xi(x) = max(x^m0, x^(1 + delta))`, in `(0, 1)`.
    pub delta: f64,
    /// Order `m > 1` of the higher-moment check.
    pub moment_order: f64,
    pub subgrid_threshold: f64,
    /// Relative mass perturbation of the second run in two-run tests.
    pub perturbation: f64,
    pub hypothesis_radius: f64,
    pub sample_budget: usize,
}

impl Scenario {
    /// `K = x^0.3 y^0.3 + x^0.3 y^0.3`, `a(x) = x`, `nu = -1.2`, `m0 = 0.3`,
    /// exponential datum with mean and mass 1 on `[1e-4, 1e3)` at 32 cells
    /// per decade, up to `t = 5`.
    pub fn canonical() -> Self {
        Self {
            spec: KernelSpec::new(
                CoagKernel::PowerLawSum { alpha: 0.3, beta: 0.3 },
                FragRate::PowerLaw { gamma: 1.0 },
                DaughterDist::new(-1.2).expect("valid exponent"),
                0.3,
            )
            .expect("valid m0"),
            x_min: 1e-4,
            j: 1e3,
            cells_per_decade: 32,
            initial: InitialCondition::Exponential { mean: 1.0, mass: 1.0 },
            t_end: 5.0,
            cadence: 0.1,
            control: StepControl::default(),
            checks: CheckKind::ALL.to_vec(),
            checks_fatal: false,
            tolerance: 1e-6,
            allowance: 0.0,
            delta: 0.5,
            moment_order: 2.0,
            subgrid_threshold: 0.01,
            perturbation: 1e-3,
            hypothesis_radius: 1.0,
            sample_budget: 200,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::Argument(msg));
        self.control.validate()?;
        self.initial.validate(self.spec.m0())?;
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.cadence > 0.0 && self.cadence <= self.t_end) {
            return bad(format!("cadence must lie in (0, t_end], got {}", self.cadence));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.moment_order > 1.0 && self.moment_order.is_finite()) {
            return bad(format!("moment_order must exceed 1, got {}", self.moment_order));
        }
        if !(self.tolerance >= 0.0 && self.allowance >= 0.0) {
            return bad("tolerance and allowance must be nonnegative".into());
        }
        if !(self.subgrid_threshold > 0.0) {
            return bad(format!("subgrid_threshold must be positive, got {}", self.subgrid_threshold));
        }
        if !(self.perturbation >= 0.0 && self.perturbation.is_finite()) {
            return bad(format!("perturbation must be nonnegative, got {}", self.perturbation));
        }
        if !(self.hypothesis_radius > 0.0) {
            return bad(format!("hypothesis_radius must be positive, got {}", self.hypothesis_radius));
        }
        if self.sample_budget == 0 {
            return bad("sample_budget must be positive".into());
        }
        build_grid(self.x_min, self.j, self.cells_per_decade)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<SizeGrid>, SolverError> {
        Ok(Arc::new(build_grid(self.x_min, self.j, self.cells_per_decade)?))
    }

    pub fn hypotheses(&self) -> Result<HypothesisReport, SolverError> {
        Ok(verify_hypotheses(&self.spec, self.hypothesis_radius, self.sample_budget)?)
    }

    /// Moment orders recorded during a run.
    pub fn moment_orders(&self) -> Vec<f64> {
        let m0 = self.spec.m0();
        let mut orders = vec![m0, 0.0, 1.0, 2.0, 2.0 + self.delta];
        if !orders.contains(&self.moment_order) {
            orders.push(self.moment_order);
        }
        orders
    }

    /// Orders of the fragmentation flux `P_m` recorded during a run.
    pub fn flux_orders(&self) -> Vec<f64> {
        let m0 = self.spec.m0();
        vec![m0, 0.5 * (m0 + 1.0)]
    }

    /// Output times: multiples of the cadence, always ending at `t_end`.
    pub fn output_times(&self) -> Vec<f64> {
        let mut times = vec![0.0];
        let mut k = 1usize;
        loop {
            let t = k as f64 * self.cadence;
            if t >= self.t_end * (1.0 - 1e-12) {
                break;
            }
            times.push(t);
            k += 1;
        }
        times.push(self.t_end);
        times
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunStats {
    pub steps: usize,
    pub rejected: usize,
    pub restricted: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub grid: Arc<SizeGrid>,
    pub snapshots: Vec<State>,
    pub series: MomentSeries,
    pub stats: RunStats,
    pub hypotheses: HypothesisReport,
    pub report: BoundReport,
}

/// Advance `states` in lockstep through every time in `outputs` (the first
/// must equal the current time), calling `record` at each of them.
pub fn integrate(
    ops: &Operators,
    control: StepControl,
    states: &mut [State],
    outputs: &[f64],
    mut record: impl FnMut(&[State]),
) -> Result<RunStats, SolverError> {
    let start = Instant::now();
    let mut stepper = Stepper::new(ops, control)?;
    let mut stats = RunStats { dt_min: f64::INFINITY, ..RunStats::default() };
    let mut hint = control.dt_init.min(control.dt_max);
    record(states);
    for &t_out in outputs.iter().skip(1) {
        while states[0].t < t_out {
            let remaining = t_out - states[0].t;
            let snap = remaining <= hint * (1.0 + 1e-9);
            let limit = if snap { remaining } else { hint };
            let info = stepper.step(states, limit)?;
            stats.steps += 1;
            stats.rejected += info.rejected;
            if snap && !info.restricted {
                states.iter_mut().for_each(|s| s.t = t_out);
            }
            if info.restricted {
                stats.restricted += 1;
                hint = info.dt.max(hint * control.safety);
            } else if !snap {
                hint = (2.0 * hint).min(control.dt_max);
            }
            stats.dt_min = stats.dt_min.min(info.dt);
            stats.dt_max = stats.dt_max.max(info.dt);
        }
        record(states);
    }
    stats.wall_seconds = start.elapsed().as_secs_f64();
    Ok(stats)
}

fn gate(scenario: &Scenario, force: bool) -> Result<HypothesisReport, SolverError> {
    scenario.validate()?;
    let hyp = scenario.hypotheses()?;
    if !force && !hyp.existence_ok() {
        return Err(SolverError::HypothesesFailed(hyp.render()));
    }
    Ok(hyp)
}

/// Run `scenario` after certifying the kernel hypotheses.
pub fn run(scenario: &Scenario) -> Result<RunOutput, SolverError> {
    run_with(scenario, false)
}

/// Run `scenario`; `force` skips the hypothesis gate.
pub fn run_with(scenario: &Scenario, force: bool) -> Result<RunOutput, SolverError> {
    let hypotheses = gate(scenario, force)?;
    let grid = scenario.grid()?;
    let ops = Operators::new(grid.clone(), &scenario.spec)?;
    let initial = scenario.initial.project(&grid)?;
    let mut series = MomentSeries::new(scenario.moment_orders(), scenario.flux_orders());
    let mut snapshots = Vec::new();
    let rates = ops.frag_tables().loss_rates().to_vec();
    let mut states = [initial];
    let stats = integrate(&ops, scenario.control, &mut states, &scenario.output_times(), |s| {
        series.record(&s[0], &rates);
        snapshots.push(s[0].clone());
    })?;
    let report = diagnostics::evaluate(scenario, &hypotheses, &series, &grid)?;
    if scenario.checks_fatal && !report.passed() {
        return Err(SolverError::ChecksFailed(Box::new(report)));
    }
    Ok(RunOutput { grid, snapshots, series, stats, hypotheses, report })
}

/// Lockstep runs from `f_in` and `(1 + perturbation) f_in`.
#[derive(Debug, Clone)]
pub struct TwoRunOutput {
    pub times: Vec<f64>,
    /// `sum_i xi(x_i) |f_1 - f_2|_i` in cell-mass form.
    pub distance: Vec<f64>,
    pub series: [MomentSeries; 2],
    pub stats: RunStats,
    pub hypotheses: HypothesisReport,
}

pub fn two_run_distance(scenario: &Scenario, force: bool) -> Result<TwoRunOutput, SolverError> {
    let hypotheses = gate(scenario, force)?;
    let grid = scenario.grid()?;
    let ops = Operators::new(grid.clone(), &scenario.spec)?;
    let a = scenario.initial.project(&grid)?;
    let b = scenario.initial.scaled(1.0 + scenario.perturbation).project(&grid)?;
    let rates = ops.frag_tables().loss_rates().to_vec();
    let mut series = [
        MomentSeries::new(scenario.moment_orders(), scenario.flux_orders()),
        MomentSeries::new(scenario.moment_orders(), scenario.flux_orders()),
    ];
    let (m0, delta) = (scenario.spec.m0(), scenario.delta);
    let mut times = Vec::new();
    let mut distance = Vec::new();
    let mut states = [a, b];
    let stats = integrate(&ops, scenario.control, &mut states, &scenario.output_times(), |s| {
        series[0].record(&s[0], &rates);
        series[1].record(&s[1], &rates);
        times.push(s[0].t);
        distance.push(diagnostics::xi_distance(&s[0], &s[1], m0, delta));
    })?;
    Ok(TwoRunOutput { times, distance, series, stats, hypotheses })
}

/// Final moments at `dt_max` and `dt_max / 2` with fixed steps and the
/// Richardson estimate `|coarse - fine| / 3` of the fine run's error.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalError {
    pub orders: Vec<f64>,
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
    pub estimate: Vec<f64>,
}

pub fn temporal_error_estimate(scenario: &Scenario, force: bool) -> Result<TemporalError, SolverError> {
    let orders = vec![0.0, 1.0, 2.0];
    let final_moments = |dt: f64| -> Result<Vec<f64>, SolverError> {
        let mut sc = scenario.clone();
        sc.control.dt_max = dt;
        sc.control.dt_init = dt;
        sc.checks.clear();
        let out = run_with(&sc, force)?;
        Ok(orders
            .iter()
            .map(|&m| *out.series.moment(m).expect("recorded").last().expect("nonempty"))
            .collect())
    };
    let coarse = final_moments(scenario.control.dt_max)?;
    let fine = final_moments(0.5 * scenario.control.dt_max)?;
    let estimate = coarse.iter().zip(&fine).map(|(c, f)| (c - f).abs() / 3.0).collect();
    Ok(TemporalError { orders, coarse, fine, estimate })
}
