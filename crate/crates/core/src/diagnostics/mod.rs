//! Moment functionals, closed-form fragmentation defects and the Gronwall
//! envelope checks evaluated on recorded runs.

mod defects;
mod envelopes;
mod functionals;
mod kappa;
mod report;

pub use defects::{frag_moment_defect, TestFunction};
pub use envelopes::{
    moment_growth_constant, check_frag_flux, check_high_moment, check_small_moment, check_stability_envelope,
    check_subgrid, check_weight_envelope, cumulative_trapezoid, linear_envelope, total_mass,
    weight_envelope,
};
pub use functionals::{phi_functional, state_moment, w_functional, xi, xi_distance, MomentSeries};
pub use kappa::{compute_kappa, kappa_from_constants, kappa_threshold, KappaBreakdown, KappaInputs};
pub use report::{BoundCheck, BoundReport, CheckKind};

use thiserror::Error;

use crate::discretization::SizeGrid;
use crate::kernels::{HypothesisReport, KernelError};
use crate::solver::Scenario;
use crate::weights::WeightError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("divergent integral: m + nu + 1 = {0} <= 0")]
    Divergent(f64),
    #[error("missing series: {0}")]
    MissingSeries(String),
    #[error("the two runs were not advanced in lockstep")]
    NotLockstep,
    #[error("hypothesis not certified: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Constants used by the single-run checks, with notes on any that had to
/// be replaced by grid-restricted values.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckConstants {
    pub k0: f64,
    pub l1: f64,
    pub a1: f64,
    pub notes: Vec<String>,
}

impl CheckConstants {
    /// `K0` and `A_1` come from the certification; when `L_1` is infinite
    /// the supremum over pivot pairs below 1 is used, which is the constant
    /// the discrete system actually sees.
    pub fn new(scenario: &Scenario, hyp: &HypothesisReport, grid: &SizeGrid) -> Self {
        let spec = &scenario.spec;
        let budget = scenario.sample_budget;
        let m0 = spec.m0();
        let mut notes = Vec::new();
        let k0 = if hyp.linear_growth.holds {
            hyp.linear_growth.constant
        } else {
            notes.push("linear growth bound not certified; envelopes are infinite".into());
            f64::INFINITY
        };
        let l1c = spec.coag.small_size_constant(1.0, m0, budget);
        let l1 = if l1c.holds {
            l1c.constant
        } else {
            let x: Vec<f64> = grid.pivots().iter().copied().filter(|&x| x < 1.0).collect();
            let mut sup = 0.0f64;
            for &a in &x {
                for &b in &x {
                    sup = sup.max(spec.coag.eval(a, b).unwrap_or(f64::INFINITY) / a.min(b).powf(m0));
                }
            }
            notes.push(format!("L_1 not certified; using the pivot supremum {sup:.6e}"));
            sup
        };
        let a1c = spec.frag.small_size_constant(1.0, spec.frag_exponent(), budget);
        let a1 = if a1c.holds {
            a1c.constant
        } else {
            notes.push("A_1 not certified; small-moment envelope is infinite".into());
            f64::INFINITY
        };
        Self { k0, l1, a1, notes }
    }
}

/// Evaluate every toggled single-run check. The stability check needs two
/// lockstep runs and is evaluated by the two-run driver instead.
pub fn evaluate(
    scenario: &Scenario,
    hyp: &HypothesisReport,
    series: &MomentSeries,
    grid: &SizeGrid,
) -> Result<BoundReport, DiagnosticsError> {
    let spec = &scenario.spec;
    let tol = scenario.tolerance + scenario.allowance;
    let constants = CheckConstants::new(scenario, hyp, grid);
    let mut checks = Vec::new();
    for kind in CheckKind::ALL {
        if !scenario.checks.contains(&kind) {
            continue;
        }
        let mut check = match kind {
            CheckKind::WeightEnvelope => check_weight_envelope(series, constants.k0, tol)?,
            CheckKind::FragFlux => check_frag_flux(
                series,
                0.5 * (spec.m0() + 1.0),
                constants.k0,
                &spec.frag,
                spec.frag_exponent(),
                scenario.sample_budget,
                tol,
            )?,
            CheckKind::SmallMoment => check_small_moment(series, spec.m0(), spec.nu(), constants.a1, tol)?,
            CheckKind::HighMoment => {
                check_high_moment(series, scenario.moment_order, spec.m0(), constants.k0, constants.l1, tol)?
            }
            CheckKind::Subgrid => check_subgrid(series, scenario.subgrid_threshold, tol)?,
            CheckKind::Stability => continue,
        };
        if matches!(kind, CheckKind::HighMoment) {
            check.warnings.extend(constants.notes.iter().filter(|n| n.starts_with("L_1")).cloned());
        }
        checks.push(check);
    }
    Ok(BoundReport { checks })
}
