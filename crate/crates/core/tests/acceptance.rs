//! Acceptance suite. Prints one pass/fail line per criterion and exits
//! nonzero when any fails.

mod common;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use cofrag::cli::two_run_check;
use cofrag::config::Config;
use cofrag::diagnostics::{self, check_stability_envelope, frag_moment_defect, CheckKind, MomentSeries, TestFunction};
use cofrag::discretization::FragTables;
use cofrag::solver::{run, run_with, InitialCondition, RunOutput, Scenario};
use cofrag::{build_grid, CoagKernel, DaughterDist, FragRate, KernelSpec};

use common::{canonical_frag, canonical_kernel, defect_by_quadrature, with_kernels};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn last(series: &MomentSeries, m: f64) -> f64 {
    *series.moment(m).expect("recorded").last().expect("nonempty")
}

fn quiet(mut sc: Scenario) -> Scenario {
    sc.checks.clear();
    sc
}

fn mass_conservation() -> Outcome {
    let start = Instant::now();
    let out = run(&Scenario::canonical()).expect("canonical run");
    let wall = start.elapsed().as_secs_f64();
    let m1 = out.series.moment(1.0).unwrap();
    let dev = m1.iter().map(|m| (m - m1[0]).abs() / m1[0]).fold(0.0, f64::max);
    outcome(
        dev <= 1e-10 && wall <= 60.0,
        format!("max |M_1(t) - M_1(0)| / M_1(0) = {dev:.3e}, wall {wall:.2} s"),
    )
}

fn shipped_configs() -> Vec<(String, Config)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut out = Vec::new();
    for entry in std::fs::read_dir(&dir).expect("configs directory") {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            let text = std::fs::read_to_string(&path).unwrap();
            let config = Config::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            out.push((path.file_name().unwrap().to_string_lossy().into_owned(), config));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn daughter_exactness() -> Outcome {
    let mut cases: Vec<(f64, f64, usize, KernelSpec)> = Vec::new();
    for (_, c) in shipped_configs() {
        let sc = &c.scenario;
        let mut resolutions = vec![sc.cells_per_decade];
        resolutions.extend(c.study_resolutions.iter().copied());
        resolutions.extend(c.study_resolutions.iter().max().map(|r| 2 * r));
        let mut js = vec![sc.j];
        js.extend(c.study_j.iter().copied());
        for &r in &resolutions {
            for &j in &js {
                cases.push((sc.x_min, j, r, sc.spec.clone()));
            }
        }
    }
    for nu in [-1.999, -1.7, -1.5, -1.2, -1.0] {
        for cpd in [4, 8, 16, 32, 64] {
            let d = DaughterDist::new(nu).unwrap();
            let spec = KernelSpec::new(CoagKernel::Constant(0.0), canonical_frag(), d, -0.5 * nu).unwrap();
            cases.push((1e-6, 1e4, cpd, spec));
        }
    }
    let mut worst = 0.0f64;
    let mut columns = 0usize;
    for (x_min, j, cpd, spec) in &cases {
        let grid = build_grid(*x_min, *j, *cpd).unwrap();
        let tables = FragTables::new(&grid, spec).unwrap();
        for k in 0..grid.len() {
            let sum: f64 = tables.row(k).iter().sum::<f64>() + tables.subgrid(k);
            worst = worst.max((sum - 1.0).abs());
            columns += 1;
        }
    }
    outcome(
        worst <= 1e-13,
        format!("{} grids, {columns} parent pivots, max |column sum - 1| = {worst:.3e}", cases.len()),
    )
}

fn random_test_function(rng: &mut StdRng, nu: f64) -> TestFunction {
    let lower = -1.0 - nu;
    match rng.gen_range(0..3) {
        0 => TestFunction::Power(rng.gen_range(lower + 0.01..4.0)),
        1 => TestFunction::PowerThenLinear(rng.gen_range(lower + 0.01..0.99f64.max(lower + 0.02))),
        _ => TestFunction::Xi {
            m0: rng.gen_range(lower + 0.01..0.99f64.max(lower + 0.02)),
            delta: rng.gen_range(0.01..0.99),
        },
    }
}

fn defect_identities() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    let mut worst_case = String::new();
    for _ in 0..1000 {
        let nu = rng.gen_range(-1.98..-1.0);
        let theta = random_test_function(&mut rng, nu);
        if let TestFunction::PowerThenLinear(m0) | TestFunction::Xi { m0, .. } = theta {
            if m0 >= 1.0 {
                continue;
            }
        }
        let y = 10f64.powf(rng.gen_range(-3.0..3.0));
        let exact = frag_moment_defect(&DaughterDist::new(nu).unwrap(), theta, y).unwrap();
        let quad = defect_by_quadrature(nu, theta, y);
        let rel = (exact - quad).abs() / exact.abs();
        if rel > worst {
            worst = rel;
            worst_case = format!("{theta:?}, nu = {nu:.4}, y = {y:.4e}");
        }
    }
    let mut mass_exact = true;
    for _ in 0..1000 {
        let nu = rng.gen_range(-1.999..=-1.0);
        let y = 10f64.powf(rng.gen_range(-6.0..6.0));
        mass_exact &= frag_moment_defect(&DaughterDist::new(nu).unwrap(), TestFunction::Power(1.0), y).unwrap() == 0.0;
    }
    outcome(
        worst <= 1e-10 && mass_exact,
        format!("max relative error {worst:.3e} ({worst_case}); N for x^1 identically zero: {mass_exact}"),
    )
}

fn coagulation_oracles() -> Outcome {
    let sc = quiet(with_kernels(CoagKernel::Constant(2.0), FragRate::Zero));
    // constant and additive kernels violate the small-size bound L_R for
    // any admissible m0 > 0, so both oracle runs bypass the gate
    let out = run_with(&sc, true).expect("constant kernel run");
    let m0 = out.series.moment(0.0).unwrap();
    let n0 = m0[0];
    let expected: Vec<f64> = out.series.times.iter().map(|t| n0 / (1.0 + n0 * t)).collect();
    let constant_err = common::max_relative_deviation(m0, &expected);

    let mut sc = quiet(with_kernels(CoagKernel::Additive, FragRate::Zero));
    sc.j = 1e5;
    let out = run_with(&sc, true).expect("additive kernel run");
    let m0 = out.series.moment(0.0).unwrap();
    let rho = out.series.moment(1.0).unwrap()[0];
    let expected: Vec<f64> = out.series.times.iter().map(|t| m0[0] * (-rho * t).exp()).collect();
    let additive_err = common::max_relative_deviation(m0, &expected);
    outcome(
        constant_err <= 0.01 && additive_err <= 0.01,
        format!("constant K = 2: max rel err {constant_err:.3e}; additive (j = 1e5): max rel err {additive_err:.3e}"),
    )
}

fn fragmentation_oracle() -> Outcome {
    let mut sc = quiet(with_kernels(CoagKernel::Constant(0.0), canonical_frag()));
    sc.initial = InitialCondition::Monodisperse { size: 1.0, mass: 1.0 };
    sc.t_end = 2.0;
    sc.cadence = 0.5;
    sc.control.dt_max = 1e-3;
    let out = run(&sc).expect("fragmentation run");
    let grid = Arc::clone(&out.grid);
    let tables = FragTables::new(&grid, &sc.spec).unwrap();
    let n = grid.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let rate = tables.loss_rate(k);
        for (i, f) in tables.row(k).iter().enumerate() {
            a[(i, k)] += rate * f;
        }
        a[(0, k)] += rate * tables.subgrid(k);
        a[(k, k)] -= rate;
    }
    let g0 = DVector::from_vec(out.snapshots[0].mass.clone());
    let reference = (a * sc.t_end).exp() * g0;
    let fin = &out.snapshots.last().unwrap().mass;
    let diff: f64 = fin.iter().zip(reference.iter()).map(|(x, r)| (x - r).abs()).sum();
    let norm: f64 = reference.iter().map(|r| r.abs()).sum();
    let err = diff / norm;
    outcome(err <= 1e-6, format!("relative L1 error vs matrix exponential {err:.3e} ({n} cells, dt_max 1e-3)"))
}

fn corrupt(series: &MomentSeries, f: impl Fn(&mut MomentSeries)) -> MomentSeries {
    let mut s = series.clone();
    f(&mut s);
    s
}

fn scale_later(values: &mut [f64], times: &[f64], factor: impl Fn(f64) -> f64) {
    for (v, &t) in values.iter_mut().zip(times) {
        if t > 0.0 {
            *v *= factor(t);
        }
    }
}

fn envelope_suite() -> Outcome {
    let sc = Scenario::canonical();
    let out: RunOutput = run(&sc).expect("canonical run");
    let mut lines = Vec::new();
    let mut pass = true;
    for kind in [
        CheckKind::WeightEnvelope,
        CheckKind::FragFlux,
        CheckKind::SmallMoment,
        CheckKind::HighMoment,
        CheckKind::Subgrid,
    ] {
        let c = out.report.get(kind).expect("check evaluated");
        pass &= c.pass && c.worst_margin > 0.0;
        lines.push(format!("{} {:+.3}", kind.name(), c.worst_margin));
    }
    let two = two_run_check(&sc, false).expect("two-run");
    let stab = two.report.get(CheckKind::Stability).expect("stability evaluated");
    pass &= stab.pass && stab.worst_margin > 0.0;
    lines.push(format!("stability {:+.3}", stab.worst_margin));

    // corrupted fixtures: each must fail its own check
    let s = &out.series;
    let t = s.times.clone();
    let m0 = sc.spec.m0();
    let rho = s.moment(1.0).unwrap()[0];
    let k0 = out.hypotheses.linear_growth.constant;
    let b = 2.0 * k0 * rho;
    let fixtures: Vec<(CheckKind, MomentSeries)> = vec![
        (CheckKind::WeightEnvelope, corrupt(s, |c| scale_later(&mut c.w_functional, &t, |t| (3.0 * b * t).exp()))),
        (CheckKind::FragFlux, corrupt(s, |c| {
            let i = c.flux_orders.iter().position(|&m| m == 0.5 * (m0 + 1.0)).unwrap();
            scale_later(&mut c.flux[i], &t, |_| 1e3);
        })),
        (CheckKind::SmallMoment, corrupt(s, |c| {
            let i = c.moment_orders.iter().position(|&m| m == m0).unwrap();
            scale_later(&mut c.moments[i], &t, |_| 10.0);
        })),
        (CheckKind::HighMoment, corrupt(s, |c| {
            let i = c.moment_orders.iter().position(|&m| m == 2.0).unwrap();
            scale_later(&mut c.moments[i], &t, |_| 10.0);
        })),
        (CheckKind::Subgrid, corrupt(s, |c| scale_later(&mut c.subgrid_fraction, &t, |_| 10.0))),
    ];
    let mut detected = Vec::new();
    for (kind, bad) in fixtures {
        let report = diagnostics::evaluate(&sc, &out.hypotheses, &bad, &out.grid).unwrap();
        let fails = !report.get(kind).unwrap().pass;
        pass &= fails;
        detected.push(format!("{}:{}", kind.name(), if fails { "caught" } else { "MISSED" }));
    }
    // The canonical contraction envelope overflows, so inflating the real
    // distance cannot fail it; detection is shown on a finite envelope.
    let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
    let zero = MomentSeries {
        times: times.clone(),
        moment_orders: vec![m0, 2.5],
        moments: vec![vec![0.0; 11], vec![0.0; 11]],
        flux_orders: vec![],
        flux: vec![],
        w_functional: vec![0.0; 11],
        subgrid_fraction: vec![0.0; 11],
    };
    let honest: Vec<f64> = times.iter().map(|t| 1e-3 * (1.0 + 0.5 * t)).collect();
    let mut inflated = honest.clone();
    *inflated.last_mut().unwrap() *= 10.0;
    let ok = check_stability_envelope(&times, &honest, &zero, &zero, 1.0, m0, 0.5, 1e-6).unwrap();
    let bad = check_stability_envelope(&times, &inflated, &zero, &zero, 1.0, m0, 0.5, 1e-6).unwrap();
    pass &= ok.pass && !bad.pass;
    detected.push(format!("stability:{}", if ok.pass && !bad.pass { "caught" } else { "MISSED" }));
    let mut canonical_inflated = two.output.distance.clone();
    *canonical_inflated.last_mut().unwrap() *= 10.0;
    let kappa = two.kappa.as_ref().map_or(f64::INFINITY, |k| k.kappa);
    let c = check_stability_envelope(
        &two.output.times,
        &canonical_inflated,
        &two.output.series[0],
        &two.output.series[1],
        kappa,
        m0,
        sc.delta,
        sc.tolerance,
    )
    .unwrap();
    outcome(
        pass,
        format!(
            "margins [{}]; fixtures [{}]; canonical kappa {kappa:.1} envelope informative: {}",
            lines.join(", "),
            detected.join(", "),
            !c.pass
        ),
    )
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn nondecreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

fn monotonicity() -> Outcome {
    let sc = quiet(with_kernels(canonical_kernel(), FragRate::Zero));
    let out = run(&sc).unwrap();
    let coag_m0 = nonincreasing(out.series.moment(sc.spec.m0()).unwrap());
    let coag_m2 = nondecreasing(out.series.moment(2.0).unwrap());
    let sc = quiet(with_kernels(CoagKernel::Constant(0.0), canonical_frag()));
    let out = run(&sc).unwrap();
    let frag_m2 = nonincreasing(out.series.moment(2.0).unwrap());
    outcome(
        coag_m0 && coag_m2 && frag_m2,
        format!("coagulation: M_m0 nonincreasing {coag_m0}, M_2 nondecreasing {coag_m2}; fragmentation: M_2 nonincreasing {frag_m2}"),
    )
}

fn truncation() -> Outcome {
    let sc = quiet(Scenario::canonical());
    let js = [1e2, 1e3, 1e4];
    let finals: Vec<MomentSeries> = js
        .iter()
        .map(|&j| run(&Scenario { j, ..sc.clone() }).unwrap().series)
        .collect();
    let m0 = sc.spec.m0();
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [m0, 2.0] {
        let v: Vec<f64> = finals.iter().map(|s| last(s, m)).collect();
        let d1 = (v[1] - v[0]).abs();
        let d2 = (v[2] - v[1]).abs();
        // differences already at rounding level count as converged
        let floor = 1e-13 * v[2].abs();
        let ok = d2 <= d1.max(floor);
        pass &= ok;
        parts.push(format!("M_{m}: {d1:.2e} -> {d2:.2e}"));
    }
    let m1: Vec<f64> = finals.iter().map(|s| last(s, 1.0)).collect();
    let spread = m1.iter().map(|v| (v - m1[0]).abs() / m1[0]).fold(0.0, f64::max);
    pass &= spread <= 1e-10;
    parts.push(format!("M_1 spread {spread:.2e}"));
    outcome(pass, parts.join("; "))
}

fn subgrid_bias() -> Outcome {
    let sc = quiet(Scenario::canonical());
    let peak = |x_min: f64| {
        let out = run(&Scenario { x_min, ..sc.clone() }).unwrap();
        out.series.subgrid_fraction.iter().copied().fold(0.0, f64::max)
    };
    let f1 = peak(sc.x_min);
    let f2 = peak(0.5 * sc.x_min);
    let ratio = f2 / f1;
    let bound = 0.5f64.powf(sc.spec.nu() + 2.0);
    outcome(
        f1 <= 1e-2 && ratio <= bound,
        format!("fraction {f1:.4e}; halving x_min gives ratio {ratio:.6} (bound {bound:.6})"),
    )
}

fn time_convergence() -> Outcome {
    let mut sc = quiet(Scenario::canonical());
    sc.j = 10.0;
    let m2: Vec<f64> = [0.02, 0.01, 0.005, 0.0025]
        .iter()
        .map(|&dt| {
            let mut s = sc.clone();
            s.control.dt_init = dt;
            s.control.dt_max = dt;
            last(&run(&s).unwrap().series, 2.0)
        })
        .collect();
    let d: Vec<f64> = m2.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let r1 = d[0] / d[1];
    let r2 = d[1] / d[2];
    outcome(
        r1 >= 3.0 && r2 >= 3.0,
        format!("changes {:.2e}, {:.2e}, {:.2e}; ratios {r1:.2}, {r2:.2}", d[0], d[1], d[2]),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("mass conservation", mass_conservation),
        ("daughter-law exactness", daughter_exactness),
        ("fragmentation defect identities", defect_identities),
        ("coagulation oracles", coagulation_oracles),
        ("fragmentation oracle", fragmentation_oracle),
        ("envelope suite", envelope_suite),
        ("monotonicity", monotonicity),
        ("truncation behavior", truncation),
        ("sub-grid bias", subgrid_bias),
        ("time self-convergence", time_convergence),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<32} {}  {} [{:.1} s]",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
