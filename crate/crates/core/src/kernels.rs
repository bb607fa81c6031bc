//! Coagulation kernels, overall fragmentation rates and the power-law
//! daughter distribution, with certification of the small-size and
//! growth hypotheses the moment estimates rely on.
//!
//! Built-in power-law forms are certified by exponent arithmetic; tabulated
//! forms are certified by logarithmic sampling and the report says so.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("size must be positive and finite, got {0}")]
    Domain(f64),
    #[error("divergent integral: m + nu + 1 = {0} <= 0 with lower limit 0")]
    Divergent(f64),
    #[error("invalid argument: {0}")]
    Argument(String),
}

type Result<T> = std::result::Result<T, KernelError>;

fn check_size(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(KernelError::Domain(x))
    }
}

/// Power-law daughter distribution `b(x, y) = (nu + 2) x^nu / y^(nu + 1)`
/// on `0 < x < y`.
///
/// For `nu <= -1` the number of fragments `∫ b(x, y) dx` is infinite while
/// the mass `∫ x b(x, y) dx = y` stays finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DaughterDist {
    nu: f64,
}

impl DaughterDist {
    pub fn new(nu: f64) -> Result<Self> {
        if nu > -2.0 && nu <= -1.0 {
            Ok(Self { nu })
        } else {
            Err(KernelError::Argument(format!(
                "daughter exponent nu = {nu} outside (-2, -1]"
            )))
        }
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Pointwise density; zero outside `0 < x < y`.
    pub fn density(&self, x: f64, y: f64) -> f64 {
        if x <= 0.0 || x >= y {
            return 0.0;
        }
        (self.nu + 2.0) * x.powf(self.nu) / y.powf(self.nu + 1.0)
    }

    /// Closed-form `∫_{x_lo}^{x_hi} x^m b(x, y) dx` for `0 <= x_lo <= x_hi <= y`.
    ///
    /// Evaluated in the scaled variable `u = x / y`, which makes the full
    /// mass moment `(m = 1, 0, y)` return `y` exactly.
    pub fn partial_moment(&self, m: f64, x_lo: f64, x_hi: f64, y: f64) -> Result<f64> {
        check_size(y)?;
        if !(x_lo >= 0.0 && x_lo <= x_hi && x_hi <= y) || !m.is_finite() {
            return Err(KernelError::Argument(format!(
                "need 0 <= x_lo <= x_hi <= y, got x_lo = {x_lo}, x_hi = {x_hi}, y = {y}"
            )));
        }
        let e = m + self.nu + 1.0;
        if x_lo == 0.0 && e <= 0.0 {
            return Err(KernelError::Divergent(e));
        }
        if x_lo == x_hi {
            return Ok(0.0);
        }
        let u_hi = x_hi / y;
        let scaled = if x_lo == 0.0 {
            u_hi.powf(e) / e
        } else {
            let u_lo = x_lo / y;
            let d = u_hi.ln() - u_lo.ln();
            if e == 0.0 {
                d
            } else {
                u_lo.powf(e) * (e * d).exp_m1() / e
            }
        };
        Ok((self.nu + 2.0) * y.powf(m) * scaled)
    }

    /// Fraction of a parent's mass carried by fragments smaller than `x`,
    /// i.e. `(x / y)^(nu + 2)` clamped to `[0, 1]`.
    pub fn mass_fraction_below(&self, x: f64, y: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= y {
            1.0
        } else {
            (x / y).powf(self.nu + 2.0)
        }
    }
}

/// Values on a logarithmic size table, interpolated bilinearly in
/// `(ln x, ln y)` (in `ln K` too when the values are positive) and held
/// constant outside the table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table2d {
    sizes: Vec<f64>,
    values: Vec<f64>,
}

impl Table2d {
    /// `values` is row-major, `values[i * n + k] = K(sizes[i], sizes[k])`.
    pub fn new(sizes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_sizes(&sizes)?;
        if values.len() != sizes.len() * sizes.len() {
            return Err(KernelError::Argument(format!(
                "table needs {} values, got {}",
                sizes.len() * sizes.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::Argument("table values must be finite".into()));
        }
        Ok(Self { sizes, values })
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        let n = self.sizes.len();
        let (i, wx) = locate(&self.sizes, x);
        let (k, wy) = locate(&self.sizes, y);
        let at = |a: usize, b: usize| self.values[a * n + b];
        let i1 = (i + 1).min(n - 1);
        let k1 = (k + 1).min(n - 1);
        let corners = [at(i, k), at(i, k1), at(i1, k), at(i1, k1)];
        let weights = [(1.0 - wx) * (1.0 - wy), (1.0 - wx) * wy, wx * (1.0 - wy), wx * wy];
        blend(&corners, &weights)
    }
}

/// Values on a logarithmic size table, interpolated like [`Table2d`] in one
/// variable and held constant outside.
#[derive(Debug, Clone, PartialEq)]
pub struct Table1d {
    sizes: Vec<f64>,
    values: Vec<f64>,
}

impl Table1d {
    pub fn new(sizes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_sizes(&sizes)?;
        if values.len() != sizes.len() {
            return Err(KernelError::Argument(format!(
                "table needs {} values, got {}",
                sizes.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::Argument("table values must be finite".into()));
        }
        Ok(Self { sizes, values })
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn eval(&self, x: f64) -> f64 {
        let (i, w) = locate(&self.sizes, x);
        let i1 = (i + 1).min(self.sizes.len() - 1);
        blend(&[self.values[i], self.values[i1]], &[1.0 - w, w])
    }
}

/// Weighted mean of table values: geometric when all are positive, so
/// power laws are reproduced exactly, arithmetic otherwise.
fn blend(values: &[f64], weights: &[f64]) -> f64 {
    if values.iter().all(|&v| v > 0.0) {
        values.iter().zip(weights).map(|(v, w)| w * v.ln()).sum::<f64>().exp()
    } else {
        values.iter().zip(weights).map(|(v, w)| w * v).sum()
    }
}

fn validate_sizes(sizes: &[f64]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(KernelError::Argument("table needs at least two sizes".into()));
    }
    if sizes.iter().any(|&s| !(s > 0.0 && s.is_finite())) || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(KernelError::Argument(
            "table sizes must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Index of the lower table node and the interpolation weight in `ln x`.
fn locate(sizes: &[f64], x: f64) -> (usize, f64) {
    let n = sizes.len();
    if x <= sizes[0] {
        return (0, 0.0);
    }
    if x >= sizes[n - 1] {
        return (n - 1, 0.0);
    }
    let i = sizes.partition_point(|&s| s <= x) - 1;
    let w = (x.ln() - sizes[i].ln()) / (sizes[i + 1].ln() - sizes[i].ln());
    (i, w)
}

/// Coagulation kernel `K(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub enum CoagKernel {
    /// `x^alpha y^beta + x^beta y^alpha`.
    PowerLawSum { alpha: f64, beta: f64 },
    /// `K = c`.
    Constant(f64),
    /// `K = x + y`.
    Additive,
    Tabulated(Table2d),
}

impl CoagKernel {
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        check_size(x)?;
        check_size(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    fn eval_unchecked(&self, x: f64, y: f64) -> f64 {
        match self {
            CoagKernel::PowerLawSum { alpha, beta } => {
                x.powf(*alpha) * y.powf(*beta) + x.powf(*beta) * y.powf(*alpha)
            }
            CoagKernel::Constant(c) => *c,
            CoagKernel::Additive => x + y,
            CoagKernel::Tabulated(t) => 0.5 * (t.eval(x, y) + t.eval(y, x)),
        }
    }

    /// `(coefficient, alpha, beta)` when the kernel is `c (x^a y^b + x^b y^a)`.
    fn power_terms(&self) -> Option<(f64, f64, f64)> {
        match self {
            CoagKernel::PowerLawSum { alpha, beta } => {
                Some((1.0, alpha.min(*beta), alpha.max(*beta)))
            }
            CoagKernel::Constant(c) => Some((0.5 * c, 0.0, 0.0)),
            CoagKernel::Additive => Some((1.0, 0.0, 1.0)),
            CoagKernel::Tabulated(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, CoagKernel::Constant(c) if *c == 0.0)
    }
}

/// Overall fragmentation rate `a(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum FragRate {
    /// `a = 0`.
    Zero,
    /// `a(x) = x^gamma`.
    PowerLaw { gamma: f64 },
    Tabulated(Table1d),
}

impl FragRate {
    pub fn eval(&self, x: f64) -> Result<f64> {
        check_size(x)?;
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: f64) -> f64 {
        match self {
            FragRate::Zero => 0.0,
            FragRate::PowerLaw { gamma } => x.powf(*gamma),
            FragRate::Tabulated(t) => t.eval(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, FragRate::Zero)
    }
}

/// Full model: kernel, rate, daughter law and the admissibility exponent
/// `m0`, which must lie in `(-1 - nu, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub coag: CoagKernel,
    pub frag: FragRate,
    pub daughter: DaughterDist,
    m0: f64,
}

impl KernelSpec {
    pub fn new(coag: CoagKernel, frag: FragRate, daughter: DaughterDist, m0: f64) -> Result<Self> {
        let lower = -1.0 - daughter.nu();
        if !(m0 > lower && m0 < 1.0) {
            return Err(KernelError::Argument(format!(
                "m0 = {m0} outside ({lower}, 1)"
            )));
        }
        Ok(Self { coag, frag, daughter, m0 })
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    pub fn nu(&self) -> f64 {
        self.daughter.nu()
    }

    /// Exponent `m0 + nu + 1` of the small-size bound on `a`.
    pub fn frag_exponent(&self) -> f64 {
        self.m0 + (self.nu() + 1.0)
    }
}

/// Whether a report was obtained by exponent arithmetic or by sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certification {
    Exact,
    Sampled,
}

/// Verdict for one hypothesis together with the tightest constant found.
/// The constant is `inf` when an exact verdict fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisCheck {
    pub holds: bool,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub certification: Certification,
    pub radius: f64,
    pub symmetric: bool,
    pub nonnegative: bool,
    /// `K(x, y) <= K0 (2 + x + y)` everywhere.
    pub linear_growth: HypothesisCheck,
    /// `L_R = sup_{(0,R)^2} K / min(x, y)^m0` finite.
    pub coag_small_size: HypothesisCheck,
    /// `a(x) <= A_R x^(m0 + nu + 1)` on `(0, R)`.
    pub frag_small_size: HypothesisCheck,
    /// `K(x, y) <= K1 x^m0 y` on `(0, 1) x (1, inf)`; needed for uniqueness only.
    pub mixed_regime: HypothesisCheck,
}

impl HypothesisReport {
    /// Hypotheses required by the existence estimates.
    pub fn existence_ok(&self) -> bool {
        self.symmetric
            && self.nonnegative
            && self.linear_growth.holds
            && self.coag_small_size.holds
            && self.frag_small_size.holds
    }

    pub fn render(&self) -> String {
        let line = |name: &str, c: &HypothesisCheck| {
            format!(
                "{name:<34} {:<5} constant = {:.6e}\n",
                if c.holds { "pass" } else { "FAIL" },
                c.constant
            )
        };
        let mut out = format!(
            "certification: {:?} (R = {})\n",
            self.certification, self.radius
        );
        out += &format!("symmetric                          {}\n", pf(self.symmetric));
        out += &format!("nonnegative                        {}\n", pf(self.nonnegative));
        out += &line("linear growth K0", &self.linear_growth);
        out += &line("coagulation small-size L_R", &self.coag_small_size);
        out += &line("fragmentation small-size A_R", &self.frag_small_size);
        out += &line("mixed regime K1", &self.mixed_regime);
        out
    }
}

fn pf(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "FAIL"
    }
}

/// Logarithmically spaced points from `lo` to `hi` inclusive.
pub(crate) fn log_samples(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Per-decade maxima of a sampled ratio, indexed by the decade of `coord`
/// above `base`.
struct DecadeBands {
    base: f64,
    max: Vec<f64>,
}

impl DecadeBands {
    fn new(base: f64, decades: usize) -> Self {
        Self { base, max: vec![0.0; decades] }
    }

    fn add(&mut self, coord: f64, ratio: f64) {
        let d = ((coord / self.base).log10().floor().max(0.0) as usize).min(self.max.len() - 1);
        if ratio > self.max[d] || ratio.is_nan() {
            self.max[d] = ratio;
        }
    }

    /// True when the ratio grows by more than 1% over six decades toward
    /// the low end of the band range.
    fn grows_toward_low(&self) -> bool {
        !(self.max[0] <= 1.01 * self.max[6])
    }

    fn grows_toward_high(&self) -> bool {
        let n = self.max.len();
        !(self.max[n - 1] <= 1.01 * self.max[n - 7])
    }
}

const SAMPLE_DECADES: usize = 12;

/// Sampled supremum of `K / (2 + x + y)` over `[1e-12, 1e12]^2`, refined
/// around the best sample.
fn sampled_linear_growth(k: &CoagKernel, budget: usize) -> (f64, bool) {
    let lo = 10f64.powi(-(SAMPLE_DECADES as i32));
    let hi = 10f64.powi(SAMPLE_DECADES as i32);
    let xs = log_samples(lo, hi, budget);
    let mut bands = DecadeBands::new(lo, 2 * SAMPLE_DECADES);
    let (mut best, mut arg) = (0.0f64, (1.0, 1.0));
    for &x in &xs {
        for &y in &xs {
            let r = k.eval_unchecked(x, y) / (2.0 + x + y);
            bands.add(x.max(y), r);
            if r > best || r.is_nan() {
                best = r;
                arg = (x, y);
            }
        }
    }
    let step = (hi / lo).powf(1.0 / (xs.len().max(2) - 1) as f64);
    for &x in &log_samples(arg.0 / step, arg.0 * step, 41) {
        for &y in &log_samples(arg.1 / step, arg.1 * step, 41) {
            best = best.max(k.eval_unchecked(x, y) / (2.0 + x + y));
        }
    }
    (best, best.is_finite() && !bands.grows_toward_high())
}

fn sampled_coag_small_size(k: &CoagKernel, r: f64, m0: f64, budget: usize) -> (f64, bool) {
    let lo = r * 10f64.powi(-(SAMPLE_DECADES as i32));
    let xs = log_samples(lo, r, budget);
    let mut bands = DecadeBands::new(lo, SAMPLE_DECADES);
    let mut best = 0.0f64;
    for &x in &xs {
        for &y in &xs {
            let mn = x.min(y);
            let v = k.eval_unchecked(x, y) / mn.powf(m0);
            bands.add(mn, v);
            best = best.max(v);
        }
    }
    (best, best.is_finite() && !bands.grows_toward_low())
}

fn sampled_frag_small_size(a: &FragRate, r: f64, exponent: f64, budget: usize) -> (f64, bool) {
    let lo = r * 10f64.powi(-(SAMPLE_DECADES as i32));
    let mut bands = DecadeBands::new(lo, SAMPLE_DECADES);
    let mut best = 0.0f64;
    for x in log_samples(lo, r, budget) {
        let v = a.eval_unchecked(x) / x.powf(exponent);
        bands.add(x, v);
        best = best.max(v);
    }
    (best, best.is_finite() && !bands.grows_toward_low())
}

fn sampled_mixed(k: &CoagKernel, m0: f64, budget: usize) -> (f64, bool) {
    let d = SAMPLE_DECADES as i32;
    let xs = log_samples(10f64.powi(-d), 1.0, budget);
    let ys = log_samples(1.0, 10f64.powi(d), budget);
    let mut small = DecadeBands::new(10f64.powi(-d), SAMPLE_DECADES);
    let mut large = DecadeBands::new(1.0, SAMPLE_DECADES);
    let mut best = 0.0f64;
    for &x in &xs {
        for &y in &ys {
            let v = k.eval_unchecked(x, y) / (x.powf(m0) * y);
            small.add(x, v);
            large.add(y, v);
            best = best.max(v);
        }
    }
    (
        best,
        best.is_finite() && !small.grows_toward_low() && !large.grows_toward_high(),
    )
}

impl CoagKernel {
    /// Tightest `K0` with `K <= K0 (2 + x + y)` and whether the bound holds.
    pub fn linear_growth_constant(&self, budget: usize) -> HypothesisCheck {
        match self.power_terms() {
            Some((0.0, _, _)) => HypothesisCheck { holds: true, constant: 0.0 },
            Some((c, 0.0, 0.0)) => HypothesisCheck { holds: c >= 0.0, constant: c.abs() },
            Some((c, a, b)) => {
                let holds = c > 0.0 && a >= 0.0 && a + b <= 1.0;
                let constant = if holds {
                    sampled_linear_growth(self, budget).0
                } else {
                    f64::INFINITY
                };
                HypothesisCheck { holds, constant }
            }
            None => {
                let (constant, holds) = sampled_linear_growth(self, budget);
                HypothesisCheck { holds, constant }
            }
        }
    }

    /// `L_R = sup_{(0,R)^2} K(x, y) / min(x, y)^m0`.
    pub fn small_size_constant(&self, r: f64, m0: f64, budget: usize) -> HypothesisCheck {
        match self.power_terms() {
            Some((0.0, _, _)) => HypothesisCheck { holds: true, constant: 0.0 },
            Some((c, a, b)) => {
                // with both exponents >= m0 the ratio increases in x and y
                let holds = c > 0.0 && a >= m0;
                let constant = if holds {
                    2.0 * c * r.powf(a + b - m0)
                } else {
                    f64::INFINITY
                };
                HypothesisCheck { holds, constant }
            }
            None => {
                let (constant, holds) = sampled_coag_small_size(self, r, m0, budget);
                HypothesisCheck { holds, constant }
            }
        }
    }

    /// `K1 = sup K(x, y) / (x^m0 y)` over `(0, 1) x (1, inf)`.
    pub fn mixed_constant(&self, m0: f64, budget: usize) -> HypothesisCheck {
        match self.power_terms() {
            Some((0.0, _, _)) => HypothesisCheck { holds: true, constant: 0.0 },
            Some((c, a, b)) => {
                // each term x^(a - m0) y^(b - 1) is at most 1 on the region
                let holds = c > 0.0 && a >= m0 && b <= 1.0;
                let constant = if holds { 2.0 * c } else { f64::INFINITY };
                HypothesisCheck { holds, constant }
            }
            None => {
                let (constant, holds) = sampled_mixed(self, m0, budget);
                HypothesisCheck { holds, constant }
            }
        }
    }
}

impl FragRate {
    /// `A_R = sup_{(0,R)} a(x) / x^exponent`.
    pub fn small_size_constant(&self, r: f64, exponent: f64, budget: usize) -> HypothesisCheck {
        match self {
            FragRate::Zero => HypothesisCheck { holds: true, constant: 0.0 },
            FragRate::PowerLaw { gamma } => {
                let holds = *gamma >= exponent;
                let constant = if holds { r.powf(gamma - exponent) } else { f64::INFINITY };
                HypothesisCheck { holds, constant }
            }
            FragRate::Tabulated(_) => {
                let (constant, holds) = sampled_frag_small_size(self, r, exponent, budget);
                HypothesisCheck { holds, constant }
            }
        }
    }
}

/// Certify the structural hypotheses of `spec` on `(0, R)`.
pub fn verify_hypotheses(spec: &KernelSpec, r: f64, sample_budget: usize) -> Result<HypothesisReport> {
    if sample_budget == 0 {
        return Err(KernelError::Argument("sample budget must be positive".into()));
    }
    check_size(r)?;
    let budget = sample_budget.max(2);
    let exact = spec.coag.power_terms().is_some() && !matches!(spec.frag, FragRate::Tabulated(_));

    let xs = log_samples(r * 1e-12, r.max(1e6), budget.min(400));
    let (mut symmetric, mut nonnegative) = (true, true);
    for &x in &xs {
        let a = spec.frag.eval_unchecked(x);
        nonnegative &= a >= 0.0;
        for &y in &xs {
            let kxy = spec.coag.eval_unchecked(x, y);
            let kyx = spec.coag.eval_unchecked(y, x);
            nonnegative &= kxy >= 0.0;
            symmetric &= (kxy - kyx).abs() <= 1e-12 * kxy.abs().max(kyx.abs());
        }
    }

    Ok(HypothesisReport {
        certification: if exact { Certification::Exact } else { Certification::Sampled },
        radius: r,
        symmetric,
        nonnegative,
        linear_growth: spec.coag.linear_growth_constant(budget),
        coag_small_size: spec.coag.small_size_constant(r, spec.m0, budget),
        frag_small_size: spec.frag.small_size_constant(r, spec.frag_exponent(), budget),
        mixed_regime: spec.coag.mixed_constant(spec.m0, budget),
    })
}

/// Range of `m0` for which `K = x^a y^b + x^b y^a` and `a = x^gamma` satisfy
/// both small-size hypotheses at once: `(-1 - nu, min(alpha, gamma - 1 - nu)]`.
///
/// Returns `(lower_open, upper_closed)` or `None` when empty.
pub fn admissible_m0_interval(alpha: f64, beta: f64, gamma: f64, nu: f64) -> Result<Option<(f64, f64)>> {
    DaughterDist::new(nu)?;
    if !(alpha <= beta && beta <= 1.0 - alpha) {
        return Err(KernelError::Argument(format!(
            "need alpha <= beta <= 1 - alpha, got alpha = {alpha}, beta = {beta}"
        )));
    }
    if !(gamma > 0.0) {
        return Err(KernelError::Argument(format!("need gamma > 0, got {gamma}")));
    }
    let lower = -1.0 - nu;
    let upper = alpha.min(gamma - (nu + 1.0));
    Ok((upper > lower).then_some((lower, upper)))
}
