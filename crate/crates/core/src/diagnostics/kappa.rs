use super::DiagnosticsError;
use crate::kernels::KernelSpec;

/// Contraction constant of the weighted distance and the term attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaBreakdown {
    pub kappa: f64,
    pub terms: Vec<(&'static str, f64)>,
    pub attaining: &'static str,
    /// Size `Y` with `Y^(2 + delta + nu) = (nu + 2)(1 + delta - m0) / (delta (nu + 1 + m0))`.
    pub y: f64,
}

/// Hypothesis constants entering the contraction estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaInputs {
    pub k0: f64,
    pub l1: f64,
    pub k1: f64,
    pub a1: f64,
    /// `A_R` at `R = max(1, Y)`.
    pub a_y: f64,
}

/// Threshold `Y` for given exponents.
pub fn kappa_threshold(nu: f64, m0: f64, delta: f64) -> f64 {
    let rhs = (nu + 2.0) * (1.0 + delta - m0) / (delta * (nu + 1.0 + m0));
    rhs.powf(1.0 / (2.0 + delta + nu))
}

/// `kappa = max{2 L1, K1 [1 + (1+d) 2^d], 4 K0 [1 + (1+d) 2^d], 8 (2+d) K0,
/// A1 / (nu + 1 + m0), A_Y Y^(2+d+nu)}`.
pub fn kappa_from_constants(c: &KappaInputs, nu: f64, m0: f64, delta: f64) -> KappaBreakdown {
    let y = kappa_threshold(nu, m0, delta);
    let spread = 1.0 + (1.0 + delta) * 2f64.powf(delta);
    let frag_y = if c.a_y == 0.0 { 0.0 } else { c.a_y * y.powf(2.0 + delta + nu) };
    let terms = vec![
        ("2 L1", 2.0 * c.l1),
        ("K1 [1 + (1 + delta) 2^delta]", c.k1 * spread),
        ("4 K0 [1 + (1 + delta) 2^delta]", 4.0 * c.k0 * spread),
        ("8 (2 + delta) K0", 8.0 * (2.0 + delta) * c.k0),
        ("A1 / (nu + 1 + m0)", c.a1 / (nu + 1.0 + m0)),
        ("A_Y Y^(2 + delta + nu)", frag_y),
    ];
    let (attaining, kappa) = terms
        .iter()
        .copied()
        .fold(("none", 0.0), |best, t| if t.1 > best.1 { t } else { best });
    KappaBreakdown { kappa, terms, attaining, y }
}

/// Certify the constants of `spec` and assemble `kappa` for `delta` in `(0, 1)`.
pub fn compute_kappa(spec: &KernelSpec, delta: f64, budget: usize) -> Result<KappaBreakdown, DiagnosticsError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(DiagnosticsError::Argument(format!("delta must lie in (0, 1), got {delta}")));
    }
    let (m0, nu) = (spec.m0(), spec.nu());
    let e = spec.frag_exponent();
    let y = kappa_threshold(nu, m0, delta);
    let k1 = spec.coag.mixed_constant(m0, budget);
    if !k1.holds {
        return Err(DiagnosticsError::Hypothesis("mixed-regime bound K <= K1 x^m0 y not certified".into()));
    }
    let k0 = spec.coag.linear_growth_constant(budget);
    let l1 = spec.coag.small_size_constant(1.0, m0, budget);
    let a1 = spec.frag.small_size_constant(1.0, e, budget);
    let a_y = spec.frag.small_size_constant(y.max(1.0), e, budget);
    for (name, c) in [("linear growth", k0), ("coagulation small-size", l1), ("fragmentation small-size", a1), ("fragmentation small-size at Y", a_y)] {
        if !c.holds {
            return Err(DiagnosticsError::Hypothesis(format!("{name} bound not certified")));
        }
    }
    let inputs = KappaInputs {
        k0: k0.constant,
        l1: l1.constant,
        k1: k1.constant,
        a1: a1.constant,
        a_y: a_y.constant,
    };
    Ok(kappa_from_constants(&inputs, nu, m0, delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{CoagKernel, DaughterDist, FragRate};

    #[test]
    fn threshold_example() {
        let y = kappa_threshold(-1.2, 0.3, 0.5);
        assert!((y.powf(1.3) - 19.2).abs() < 1e-12);
        assert!((y - 9.71).abs() < 0.01);
    }

    #[test]
    fn canonical_kappa() {
        let spec = KernelSpec::new(
            CoagKernel::PowerLawSum { alpha: 0.3, beta: 0.3 },
            FragRate::PowerLaw { gamma: 1.0 },
            DaughterDist::new(-1.2).unwrap(),
            0.3,
        )
        .unwrap();
        let k = compute_kappa(&spec, 0.5, 200).unwrap();
        assert_eq!(k.attaining, "A_Y Y^(2 + delta + nu)");
        let expected = k.y.powf(0.9) * 19.2;
        assert!((k.kappa - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn null_dynamics_kappa_zero() {
        let c = KappaInputs { k0: 0.0, l1: 0.0, k1: 0.0, a1: 0.0, a_y: 0.0 };
        assert_eq!(kappa_from_constants(&c, -1.2, 0.3, 0.5).kappa, 0.0);
    }

    #[test]
    fn coagulation_terms_scale() {
        let c = KappaInputs { k0: 0.5, l1: 2.0, k1: 2.0, a1: 0.0, a_y: 0.0 };
        let d = KappaInputs { k0: 1.0, l1: 4.0, k1: 4.0, a1: 0.0, a_y: 0.0 };
        let (a, b) = (kappa_from_constants(&c, -1.2, 0.3, 0.5), kappa_from_constants(&d, -1.2, 0.3, 0.5));
        for (x, y) in a.terms.iter().zip(&b.terms).take(4) {
            assert!((2.0 * x.1 - y.1).abs() < 1e-14);
        }
        assert!((2.0 * a.kappa - b.kappa).abs() < 1e-14);
    }

    #[test]
    fn requires_mixed_regime() {
        let spec = KernelSpec::new(
            CoagKernel::PowerLawSum { alpha: 0.3, beta: 0.3 },
            FragRate::PowerLaw { gamma: 1.0 },
            DaughterDist::new(-1.2).unwrap(),
            0.35,
        )
        .unwrap();
        assert!(matches!(compute_kappa(&spec, 0.5, 100), Err(DiagnosticsError::Hypothesis(_))));
    }
}
