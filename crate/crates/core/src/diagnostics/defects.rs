use super::DiagnosticsError;
use crate::kernels::DaughterDist;

/// Test functions with closed-form fragmentation defects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// `x^m`.
    Power(f64),
    /// `x^m0` on `(0, 1]`, `x` beyond.
    PowerThenLinear(f64),
    /// `xi(x) = max(x^m0, x^(1 + delta))`.
    Xi { m0: f64, delta: f64 },
}

/// `N(y) = theta(y) - ∫_0^y theta(x) b(x, y) dx` in closed form.
pub fn frag_moment_defect(d: &DaughterDist, theta: TestFunction, y: f64) -> Result<f64, DiagnosticsError> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(DiagnosticsError::Argument(format!("size must be positive, got {y}")));
    }
    let nu = d.nu();
    let small_exponent = match theta {
        TestFunction::Power(m) => m,
        TestFunction::PowerThenLinear(m0) | TestFunction::Xi { m0, .. } => m0,
    };
    let e = small_exponent + nu + 1.0;
    if e <= 0.0 {
        return Err(DiagnosticsError::Divergent(e));
    }
    // coefficient of the small-size branch: (m - 1) / (m + nu + 1)
    let c = (small_exponent - 1.0) / e;
    Ok(match theta {
        TestFunction::Power(m) => c * y.powf(m),
        TestFunction::PowerThenLinear(m0) => {
            if y <= 1.0 {
                c * y.powf(m0)
            } else {
                c * y.powf(-nu - 1.0)
            }
        }
        TestFunction::Xi { m0, delta } => {
            if y <= 1.0 {
                c * y.powf(m0)
            } else {
                // ∫_0^1 x^m0 b + ∫_1^y x^(1+delta) b
                let ed = 2.0 + delta + nu;
                let below = 1.0 / e + (ed * y.ln()).exp_m1() / ed;
                y.powf(1.0 + delta) - (nu + 2.0) * y.powf(-nu - 1.0) * below
            }
        }
    })
}
