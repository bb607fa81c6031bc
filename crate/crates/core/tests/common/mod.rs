#![allow(dead_code)]

use cofrag::diagnostics::TestFunction;
use cofrag::solver::Scenario;
use cofrag::{CoagKernel, DaughterDist, FragRate, KernelSpec};

/// Tanh-sinh quadrature of `f` over `[0, len]`; `f` receives the distances
/// `(x, len - x)` to both endpoints so neither end loses precision.
pub fn tanh_sinh<F: Fn(f64, f64) -> f64>(f: F, len: f64, rel_tol: f64) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let node = |t: f64| -> f64 {
        let s = half_pi * t.sinh();
        let left = len / (1.0 + (-2.0 * s).exp());
        let right = len / (1.0 + (2.0 * s).exp());
        if left <= 0.0 || right <= 0.0 {
            return 0.0;
        }
        let sech = 2.0 / (s.exp() + (-s).exp());
        let w = half_pi * t.cosh() * 0.5 * len * sech * sech;
        if w == 0.0 {
            0.0
        } else {
            w * f(left, right)
        }
    };
    let t_max = 6.5;
    let mut h = 0.5;
    let mut sum = node(0.0);
    let mut k = 1;
    while k as f64 * h <= t_max {
        let t = k as f64 * h;
        sum += node(t) + node(-t);
        k += 1;
    }
    let mut estimate = sum * h;
    for _ in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= t_max {
            let t = k as f64 * h;
            sum += node(t) + node(-t);
            k += 2;
        }
        let next = sum * h;
        if (next - estimate).abs() <= rel_tol * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// `∫_0^y r(x) x^p dx` for bounded `r` and `p > -1`. The substitution
/// `x = y s^(1/(p+1))` turns the integrand into `y^(p+1) r(x) / (p+1)`;
/// `r` receives `ln x`, since `x` itself underflows for strong singularities.
pub fn integrate_from_zero<R: Fn(f64) -> f64>(r: R, p: f64, y: f64) -> f64 {
    let k = 1.0 / (p + 1.0);
    let ln_y = y.ln();
    y.powf(p + 1.0) * k * tanh_sinh(|s, _| r(ln_y + k * s.ln()), 1.0, 1e-13)
}

pub fn theta_value(theta: TestFunction, x: f64) -> f64 {
    match theta {
        TestFunction::Power(m) => x.powf(m),
        TestFunction::PowerThenLinear(m0) => x.max(x.powf(m0)),
        TestFunction::Xi { m0, delta } => x.powf(m0).max(x.powf(1.0 + delta)),
    }
}

/// Exponent `q` of `x theta(y) / y - theta(x)` as `x -> 0`, and that
/// bracket divided by `x^q` at `x = exp(ln_x)`, written without cancellation.
fn reduced_bracket(theta: TestFunction, ln_x: f64, y: f64) -> (f64, f64) {
    let l = ln_x - y.ln();
    let pow = |a: f64| (a * ln_x).exp();
    match theta {
        TestFunction::Power(m) if m < 1.0 => (m, ((1.0 - m) * l).exp_m1()),
        TestFunction::Power(m) => (1.0, -y.powf(m - 1.0) * ((m - 1.0) * l).exp_m1()),
        TestFunction::PowerThenLinear(m0) => {
            let ty = theta_value(theta, y);
            (m0, pow(1.0 - m0) * ty / y - pow(1.0 - m0).max(1.0))
        }
        TestFunction::Xi { m0, delta } => {
            let ty = theta_value(theta, y);
            (m0, pow(1.0 - m0) * ty / y - pow(1.0 + delta - m0).max(1.0))
        }
    }
}

/// Defect by quadrature of `∫_0^y [x theta(y) / y - theta(x)] b(x, y) dx`,
/// which equals `theta(y) - ∫ theta b` by mass conservation and avoids
/// the cancellation of the direct form. Kinks at 1 are split out.
pub fn defect_by_quadrature(nu: f64, theta: TestFunction, y: f64) -> f64 {
    let c = (nu + 2.0) / y.powf(nu + 1.0);
    let q = reduced_bracket(theta, 0.0, y).0;
    let p = q + nu;
    // integrand = r(x) x^p with r bounded near 0
    let r = |ln_x: f64| c * reduced_bracket(theta, ln_x, y).1;
    let smooth = matches!(theta, TestFunction::Power(_));
    if smooth || y <= 1.0 {
        integrate_from_zero(r, p, y)
    } else {
        let head = integrate_from_zero(r, p, 1.0);
        let tail = tanh_sinh(|l, _| r(l.ln_1p()) * (1.0 + l).powf(p), y - 1.0, 1e-13);
        head + tail
    }
}

pub fn spec(coag: CoagKernel, frag: FragRate) -> KernelSpec {
    KernelSpec::new(coag, frag, DaughterDist::new(-1.2).unwrap(), 0.3).unwrap()
}

/// Canonical scenario with its kernels replaced.
pub fn with_kernels(coag: CoagKernel, frag: FragRate) -> Scenario {
    Scenario { spec: spec(coag, frag), ..Scenario::canonical() }
}

pub fn canonical_kernel() -> CoagKernel {
    CoagKernel::PowerLawSum { alpha: 0.3, beta: 0.3 }
}

pub fn canonical_frag() -> FragRate {
    FragRate::PowerLaw { gamma: 1.0 }
}

pub fn max_relative_deviation(values: &[f64], reference: &[f64]) -> f64 {
    values
        .iter()
        .zip(reference)
        .map(|(v, r)| ((v - r) / r).abs())
        .fold(0.0, f64::max)
}
