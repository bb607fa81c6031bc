use super::{BoundCheck, CheckKind, DiagnosticsError, MomentSeries};
use crate::kernels::FragRate;
use crate::weights::{superlinearity_gap_growth, LogLogWeight, Weight};

fn required<'a>(s: Option<&'a [f64]>, what: &str) -> Result<&'a [f64], DiagnosticsError> {
    s.ok_or_else(|| DiagnosticsError::MissingSeries(what.to_string()))
}

fn nonempty(series: &MomentSeries) -> Result<(), DiagnosticsError> {
    if series.is_empty() {
        Err(DiagnosticsError::MissingSeries("no recorded times".into()))
    } else {
        Ok(())
    }
}

/// Total mass `rho = M_1(0)`.
pub fn total_mass(series: &MomentSeries) -> Result<f64, DiagnosticsError> {
    series_first(series.moment(1.0), "M_1")
}

fn series_first(s: Option<&[f64]>, what: &str) -> Result<f64, DiagnosticsError> {
    required(s, what)?
        .first()
        .copied()
        .ok_or_else(|| DiagnosticsError::MissingSeries(what.to_string()))
}

/// Cumulative trapezoid integral of `v` over `t`.
pub fn cumulative_trapezoid(t: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    for i in 0..t.len() {
        if i > 0 {
            acc += 0.5 * (t[i] - t[i - 1]) * (v[i] + v[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// Solution of `y' = A + B y`, `y(0) = y0`.
pub fn linear_envelope(y0: f64, a: f64, b: f64, t: f64) -> f64 {
    if b == 0.0 {
        y0 + a * t
    } else {
        (b * t).exp() * y0 + a * (b * t).exp_m1() / b
    }
}

/// Envelope of the weight functional with `A = K0 W''(0) rho^2`, `B = 2 K0 rho`.
pub fn weight_envelope(k0: f64, rho: f64, y0: f64, t: f64) -> f64 {
    let w2 = LogLogWeight.second_derivative(0.0);
    linear_envelope(y0, k0 * w2 * rho * rho, 2.0 * k0 * rho, t)
}

pub fn check_weight_envelope(series: &MomentSeries, k0: f64, tolerance: f64) -> Result<BoundCheck, DiagnosticsError> {
    nonempty(series)?;
    let rho = total_mass(series)?;
    let y0 = series.w_functional[0];
    let env = series.times.iter().map(|&t| weight_envelope(k0, rho, y0, t)).collect();
    Ok(BoundCheck::new(
        CheckKind::WeightEnvelope,
        series.times.clone(),
        series.w_functional.clone(),
        env,
        tolerance,
    ))
}

/// `∫_0^t P_m <= A_{x_m} x_m^(m0 + nu + 1) rho t + 2 Y(t)`, with `x_m` the
/// threshold beyond which `x W' - W >= x^m` and `Y` the weight envelope.
pub fn check_frag_flux(
    series: &MomentSeries,
    m: f64,
    k0: f64,
    frag: &FragRate,
    frag_exponent: f64,
    budget: usize,
    tolerance: f64,
) -> Result<BoundCheck, DiagnosticsError> {
    if !(m > 0.0 && m < 1.0) {
        return Err(DiagnosticsError::Argument(format!("flux order must lie in (0, 1), got {m}")));
    }
    nonempty(series)?;
    let p = required(series.flux(m), &format!("P_{m}"))?;
    let rho = total_mass(series)?;
    let x_m = superlinearity_gap_growth(m)?;
    let a = frag.small_size_constant(x_m, frag_exponent, budget);
    let coef = a.constant * x_m.powf(frag_exponent) * rho;
    let y0 = series.w_functional[0];
    let env = series
        .times
        .iter()
        .map(|&t| {
            let from_small = if coef == 0.0 { 0.0 } else { coef * t };
            from_small + 2.0 * weight_envelope(k0, rho, y0, t)
        })
        .collect();
    let observed = cumulative_trapezoid(&series.times, p);
    let mut check = BoundCheck::new(CheckKind::FragFlux, series.times.clone(), observed, env, tolerance);
    if series.len() < 16 {
        check.warnings.push(format!(
            "only {} samples; the trapezoid integral of P_m may be inaccurate",
            series.len()
        ));
    }
    if !a.holds {
        check.warnings.push(format!("fragmentation rate bound not certified up to x_m = {x_m:.4e}"));
    }
    Ok(check)
}

/// `M_m0(t) <= e^(ct) [M_m0(0) + ∫_0^t e^(-cs) d(s) ds]` with
/// `c = A_1 / (nu + m0 + 1)` and `d = P_m0 / (nu + m0 + 1)`.
pub fn check_small_moment(
    series: &MomentSeries,
    m0: f64,
    nu: f64,
    a1: f64,
    tolerance: f64,
) -> Result<BoundCheck, DiagnosticsError> {
    nonempty(series)?;
    let mm = required(series.moment(m0), "M_m0")?;
    let p = required(series.flux(m0), "P_m0")?;
    let denom = nu + m0 + 1.0;
    let c = a1 / denom;
    let t = &series.times;
    let discounted: Vec<f64> = t
        .iter()
        .zip(p)
        .map(|(&s, &p)| if p == 0.0 { 0.0 } else { (-c * s).exp() * p / denom })
        .collect();
    let integral = cumulative_trapezoid(t, &discounted);
    let env = t
        .iter()
        .zip(&integral)
        .map(|(&s, &i)| (c * s).exp() * (mm[0] + i))
        .collect();
    Ok(BoundCheck::new(CheckKind::SmallMoment, t.clone(), mm.to_vec(), env, tolerance))
}

/// `sup (x + y) ((x + y)^m - x^m - y^m) / (x^m y + x y^m)` over a
/// 1000 x 1000 logarithmic sample of `[1e-6, 1e6]^2`, inflated by 5%.
pub fn moment_growth_constant(m: f64) -> Result<f64, DiagnosticsError> {
    if !(m > 1.0 && m.is_finite()) {
        return Err(DiagnosticsError::Argument(format!("moment order must exceed 1, got {m}")));
    }
    let xs: Vec<f64> = (0..1000).map(|i| 10f64.powf(-6.0 + 12.0 * i as f64 / 999.0)).collect();
    let mut sup = 0.0f64;
    for &x in &xs {
        for &y in &xs {
            // the ratio is symmetric and depends on x / y only; t <= 1 avoids cancellation
            let t = x.min(y) / x.max(y);
            let tm = t.powf(m);
            let chi = (m * t.ln_1p()).exp_m1() - tm;
            sup = sup.max((1.0 + t) * chi / (tm + t));
        }
    }
    Ok(1.05 * sup)
}

/// `M_m(t) <= e^(3 K0 C7 rho t) [M_m(0) + L_1 C3^2 / (3 K0 C7 rho)]` with
/// `C3` the observed supremum of `M_m0`.
pub fn check_high_moment(
    series: &MomentSeries,
    m: f64,
    m0: f64,
    k0: f64,
    l1: f64,
    tolerance: f64,
) -> Result<BoundCheck, DiagnosticsError> {
    let c7 = moment_growth_constant(m)?;
    nonempty(series)?;
    let mm = required(series.moment(m), &format!("M_{m}"))?;
    let c3 = required(series.moment(m0), "M_m0")?.iter().copied().fold(0.0, f64::max);
    let rho = total_mass(series)?;
    let rate = 3.0 * k0 * c7 * rho;
    let forcing = if l1 == 0.0 { 0.0 } else { l1 * c3 * c3 };
    let env = series
        .times
        .iter()
        .map(|&t| linear_envelope(mm[0], forcing, rate, t))
        .collect();
    Ok(BoundCheck::new(CheckKind::HighMoment, series.times.clone(), mm.to_vec(), env, tolerance))
}

/// `D(t) <= D(0) exp(kappa ∫_0^t [1 + M_m0(f1 + f2) + M_(2+delta)(f1 + f2)])`.
#[allow(clippy::too_many_arguments)]
pub fn check_stability_envelope(
    times: &[f64],
    distance: &[f64],
    a: &MomentSeries,
    b: &MomentSeries,
    kappa: f64,
    m0: f64,
    delta: f64,
    tolerance: f64,
) -> Result<BoundCheck, DiagnosticsError> {
    if a.times != times || b.times != times || distance.len() != times.len() {
        return Err(DiagnosticsError::NotLockstep);
    }
    let high = 2.0 + delta;
    let (am0, bm0) = (required(a.moment(m0), "M_m0")?, required(b.moment(m0), "M_m0")?);
    let (ah, bh) = (required(a.moment(high), "M_2+delta")?, required(b.moment(high), "M_2+delta")?);
    let integrand: Vec<f64> = (0..times.len()).map(|i| 1.0 + am0[i] + bm0[i] + ah[i] + bh[i]).collect();
    let integral = cumulative_trapezoid(times, &integrand);
    let d0 = distance.first().copied().unwrap_or(0.0);
    let env = integral
        .iter()
        .map(|&i| {
            if d0 == 0.0 {
                0.0
            } else {
                let e = (kappa * i).exp();
                if e.is_finite() {
                    d0 * e
                } else {
                    f64::INFINITY
                }
            }
        })
        .collect();
    let mut check = BoundCheck::new(CheckKind::Stability, times.to_vec(), distance.to_vec(), env, tolerance);
    if check.envelope.iter().any(|e| e.is_infinite()) {
        check.warnings.push("envelope exponent overflows; the bound is not informative".into());
    }
    Ok(check)
}

/// Lumped sub-grid mass fraction below `threshold` at every output.
pub fn check_subgrid(series: &MomentSeries, threshold: f64, tolerance: f64) -> Result<BoundCheck, DiagnosticsError> {
    nonempty(series)?;
    let env = vec![threshold; series.len()];
    Ok(BoundCheck::new(
        CheckKind::Subgrid,
        series.times.clone(),
        series.subgrid_fraction.clone(),
        env,
        tolerance,
    ))
}
