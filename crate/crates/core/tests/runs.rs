mod common;

use cofrag::diagnostics::{phi_functional, state_moment, xi};
use cofrag::diagnostics::CheckKind;
use cofrag::solver::{run_with, temporal_error_estimate, two_run_distance, InitialCondition, SolverError};
use cofrag::weights::{build_dlvp_weight, SampledDensity};
use cofrag::{run, CoagKernel, FragRate, Scenario};
use common::{canonical_frag, canonical_kernel, with_kernels};

fn short(mut sc: Scenario, t_end: f64) -> Scenario {
    sc.t_end = t_end;
    sc.cadence = t_end / 10.0;
    sc
}

#[test]
fn null_dynamics_leave_the_datum_unchanged() {
    let sc = short(with_kernels(CoagKernel::Constant(0.0), FragRate::Zero), 1.0);
    for initial in [
        InitialCondition::Exponential { mean: 1.0, mass: 1.0 },
        InitialCondition::Monodisperse { size: 3.0, mass: 2.0 },
        InitialCondition::PowerCutoff { p: 1.1, cutoff: 10.0, mass: 1.0 },
    ] {
        let sc = Scenario { initial, ..sc.clone() };
        let out = run_with(&sc, true).unwrap();
        let first = &out.snapshots[0].mass;
        assert!(out.snapshots.iter().all(|s| &s.mass == first));
        for kind in [CheckKind::WeightEnvelope, CheckKind::FragFlux, CheckKind::HighMoment] {
            assert!(out.report.get(kind).unwrap().pass, "{kind:?}");
        }
    }
}

#[test]
fn pure_coagulation_conserves_the_second_moment_without_kernel() {
    // monodisperse datum with K = 0 and a = 0: M_2 stays at its initial value
    let mut sc = short(with_kernels(CoagKernel::Constant(0.0), FragRate::Zero), 2.0);
    sc.initial = InitialCondition::Monodisperse { size: 1.0, mass: 1.0 };
    let out = run_with(&sc, true).unwrap();
    let m2 = out.series.moment(2.0).unwrap();
    assert!(m2.iter().all(|&m| (m - m2[0]).abs() <= 1e-14 * m2[0]));
}

#[test]
fn coagulation_only_has_no_fragmentation_flux() {
    let out = run_with(&short(with_kernels(canonical_kernel(), FragRate::Zero), 2.0), true).unwrap();
    let flux = out.report.get(CheckKind::FragFlux).unwrap();
    assert!(flux.pass);
    assert!(flux.observed.iter().all(|&v| v == 0.0));
}

#[test]
fn additive_kernel_respects_high_moment_envelope() {
    let mut sc = short(with_kernels(CoagKernel::Additive, FragRate::Zero), 1.0);
    sc.j = 1e4;
    let out = run_with(&sc, true).unwrap();
    assert!(out.report.get(CheckKind::HighMoment).unwrap().pass);
}

#[test]
fn fatal_checks_abort_the_run() {
    let mut sc = short(Scenario::canonical(), 1.0);
    sc.subgrid_threshold = 1e-9;
    sc.checks_fatal = true;
    match run(&sc) {
        Err(SolverError::ChecksFailed(report)) => assert!(!report.get(CheckKind::Subgrid).unwrap().pass),
        other => panic!("expected check failure, got {other:?}"),
    }
}

#[test]
fn additive_kernel_is_gated() {
    let sc = short(with_kernels(CoagKernel::Additive, canonical_frag()), 1.0);
    assert!(matches!(run(&sc), Err(SolverError::HypothesesFailed(_))));
}

#[test]
fn identical_runs_stay_identical() {
    let mut sc = short(Scenario::canonical(), 1.0);
    sc.perturbation = 0.0;
    let out = two_run_distance(&sc, false).unwrap();
    assert!(out.distance.iter().all(|&d| d == 0.0));
}

#[test]
fn initial_distance_is_the_scaled_xi_moment() {
    let sc = short(Scenario::canonical(), 0.5);
    let out = two_run_distance(&sc, false).unwrap();
    let grid = sc.grid().unwrap();
    let g = sc.initial.project(&grid).unwrap();
    let expected: f64 = sc.perturbation
        * grid
            .pivots()
            .iter()
            .zip(&g.mass)
            .map(|(&x, m)| xi(x, sc.spec.m0(), sc.delta) / x * m)
            .sum::<f64>();
    assert!((out.distance[0] - expected).abs() <= 1e-10 * expected);
    let m1 = out.series[1].moment(1.0).unwrap();
    assert!((m1[0] / out.series[0].moment(1.0).unwrap()[0] - 1.001).abs() < 1e-12);
}

#[test]
fn halving_the_step_stays_within_the_error_estimate() {
    let mut sc = short(Scenario::canonical(), 1.0);
    sc.j = 10.0;
    sc.control.dt_max = 0.01;
    let est = temporal_error_estimate(&sc, false).unwrap();
    let mut finer = sc.clone();
    finer.control.dt_max = 0.0025;
    finer.control.dt_init = 0.0025;
    finer.checks.clear();
    let out = run(&finer).unwrap();
    for (k, &m) in est.orders.iter().enumerate() {
        let finest = *out.series.moment(m).unwrap().last().unwrap();
        assert!((est.fine[k] - finest).abs() <= est.estimate[k] + 1e-14, "M_{m}");
    }
}

#[test]
fn phi_functional_stays_bounded_under_refinement() {
    let values: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&cpd| {
            let sc = Scenario { cells_per_decade: cpd, ..short(Scenario::canonical(), 1.0) };
            let out = run(&sc).unwrap();
            let g = &out.grid;
            let start = &out.snapshots[0];
            let density = SampledDensity {
                pivots: g.pivots().to_vec(),
                widths: g.widths().to_vec(),
                values: start.densities(),
            };
            let vp = build_dlvp_weight(&density, sc.spec.m0()).unwrap();
            let end = out.snapshots.last().unwrap();
            let m0 = sc.spec.m0();
            let phi = phi_functional(end, &vp, m0, 1.0);
            assert!(phi.is_finite() && phi > 0.0);
            assert!(phi_functional(end, &vp, m0, 0.1) <= phi && phi <= phi_functional(end, &vp, m0, 10.0));
            // the weight never exceeds a linear bound on the m0 moment of the datum
            assert!(phi_functional(start, &vp, m0, 1e3) <= 4.0 * (1.0 + vp.levels() as f64) * state_moment(start, m0));
            phi
        })
        .collect();
    // the weight is rebuilt from each grid's datum, so only boundedness carries over
    assert!(values.iter().all(|&v| v <= 1.5 * values[0]), "{values:?}");
}
