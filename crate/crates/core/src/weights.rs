//! Convex superlinear weights: the log-log weight `W`, a property checker
//! for the admissible weight class, and a level-set construction of
//! de la Vallée Poussin weights adapted to a sampled density.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("weight argument must be nonnegative and finite, got {0}")]
    Domain(f64),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("density is not integrable: {0}")]
    NonIntegrable(String),
}

type Result<T> = std::result::Result<T, WeightError>;

/// A weight with two derivatives on `[0, inf)`.
pub trait Weight {
    fn value(&self, r: f64) -> f64;
    fn derivative(&self, r: f64) -> f64;
    fn second_derivative(&self, r: f64) -> f64;
}

/// `W(x) = x ln(ln(x + 5)) - x ln(ln 5)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LogLogWeight;

impl LogLogWeight {
    /// `x W'(x) - W(x) = x^2 / ((x + 5) ln(x + 5))`.
    pub fn gap(&self, x: f64) -> f64 {
        x * x / ((x + 5.0) * (x + 5.0).ln())
    }
}

impl Weight for LogLogWeight {
    fn value(&self, x: f64) -> f64 {
        // ln(ln(x+5)/ln 5) written to keep full precision near 0
        x * ((x / 5.0).ln_1p() / 5f64.ln()).ln_1p()
    }

    fn derivative(&self, x: f64) -> f64 {
        let l = (x + 5.0).ln();
        ((x / 5.0).ln_1p() / 5f64.ln()).ln_1p() + x / ((x + 5.0) * l)
    }

    fn second_derivative(&self, x: f64) -> f64 {
        let l = (x + 5.0).ln();
        let q = (x + 5.0) * l;
        1.0 / q + (5.0 * l - x) / (q * q)
    }
}

fn check_arg(x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(WeightError::Domain(x))
    }
}

pub fn eval_w(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(LogLogWeight.value(x))
}

pub fn eval_w_prime(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(LogLogWeight.derivative(x))
}

pub fn eval_w_second(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(LogLogWeight.second_derivative(x))
}

pub fn eval_gap(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(LogLogWeight.gap(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvpProperty {
    /// At least 100 points spanning at least six decades.
    GridCoverage,
    /// `phi(0) = phi'(0) = 0`.
    Origin,
    Nonnegative,
    Convex,
    ConcaveDerivative,
    /// `phi(r) / r` increasing beyond `r = 10` and unbounded along the grid.
    Superlinear,
    /// `0 <= phi(r) <= r phi'(r) <= 2 phi(r)`.
    MomentChain,
    /// `s phi'(r) <= phi(r) + phi(s)`.
    TangentBound,
    /// `0 <= phi(r + s) - phi(r) - phi(s) <= 2 (s phi(r) + r phi(s)) / (r + s)`.
    Superadditive,
    /// `phi(r + s) - phi(r) - phi(s) <= phi''(0) r s`.
    SecondOrderBound,
    /// Local growth exponent `r phi'(r) / phi(r)` at the end of the grid
    /// stays below `p - 0.05`, so `phi(r) / r^p` is bounded beyond it.
    GrowthBelowP,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub property: CvpProperty,
    pub holds: bool,
    /// Largest normalized violation found; nonpositive when the property holds.
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvpReport {
    pub checks: Vec<PropertyCheck>,
}

impl CvpReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn get(&self, property: CvpProperty) -> &PropertyCheck {
        self.checks
            .iter()
            .find(|c| c.property == property)
            .expect("every property is checked")
    }
}

const REL_TOL: f64 = 1e-10;
const PAIR_TOL: f64 = 1e-12;

/// Accumulates the worst normalized violation of `lhs <= rhs`.
struct Worst(f64);

impl Worst {
    fn new() -> Self {
        Worst(f64::NEG_INFINITY)
    }

    fn le(&mut self, lhs: f64, rhs: f64, scale: f64) {
        let v = if scale > 0.0 { (lhs - rhs) / scale } else { lhs - rhs };
        if v > self.0 || v.is_nan() {
            self.0 = v;
        }
    }

    fn check(self, property: CvpProperty, tol: f64) -> PropertyCheck {
        let worst = if self.0 == f64::NEG_INFINITY { 0.0 } else { self.0 };
        PropertyCheck { property, holds: worst <= tol, worst }
    }
}

/// Test the defining properties of the convex superlinear weight class on
/// `grid` (positive points, any order). Pair inequalities are tested on the
/// full Cartesian square of the grid.
pub fn cvp_check(phi: &dyn Weight, grid: &[f64], p: f64) -> CvpReport {
    let mut r: Vec<f64> = grid.iter().copied().filter(|x| *x > 0.0 && x.is_finite()).collect();
    r.sort_by(|a, b| a.total_cmp(b));
    r.dedup();
    let n = r.len();
    let v: Vec<f64> = r.iter().map(|&x| phi.value(x)).collect();
    let d: Vec<f64> = r.iter().map(|&x| phi.derivative(x)).collect();
    let mut checks = Vec::new();

    let span = if n >= 2 { (r[n - 1] / r[0]).log10() } else { 0.0 };
    checks.push(PropertyCheck {
        property: CvpProperty::GridCoverage,
        holds: n >= 100 && span >= 6.0 - 1e-9,
        worst: 0.0,
    });

    let mut w = Worst::new();
    w.le(phi.value(0.0).abs(), 0.0, 0.0);
    w.le(phi.derivative(0.0).abs(), 0.0, 0.0);
    checks.push(w.check(CvpProperty::Origin, 1e-14));

    let mut w = Worst::new();
    for &val in &v {
        w.le(-val, 0.0, 0.0);
    }
    checks.push(w.check(CvpProperty::Nonnegative, 0.0));

    // slopes of secants must increase (convexity) and those of phi' decrease
    let secant = |y: &[f64]| -> Vec<f64> {
        (0..n.saturating_sub(1))
            .map(|i| (y[i + 1] - y[i]) / (r[i + 1] - r[i]))
            .collect()
    };
    let sv = secant(&v);
    let mut w = Worst::new();
    for s in sv.windows(2) {
        w.le(s[0], s[1], s[0].abs().max(s[1].abs()));
    }
    checks.push(w.check(CvpProperty::Convex, REL_TOL));
    let sd = secant(&d);
    let mut w = Worst::new();
    for s in sd.windows(2) {
        w.le(s[1], s[0], s[0].abs().max(s[1].abs()));
    }
    checks.push(w.check(CvpProperty::ConcaveDerivative, REL_TOL));

    let tail: Vec<usize> = (0..n).filter(|&i| r[i] >= 10.0).collect();
    let superlinear = if tail.len() >= 2 {
        let q: Vec<f64> = tail.iter().map(|&i| v[i] / r[i]).collect();
        let mut w = Worst::new();
        for s in q.windows(2) {
            w.le(s[0], s[1], s[1].abs());
        }
        let mut c = w.check(CvpProperty::Superlinear, REL_TOL);
        c.holds &= q[q.len() - 1] > q[0];
        c
    } else {
        PropertyCheck { property: CvpProperty::Superlinear, holds: false, worst: f64::INFINITY }
    };
    checks.push(superlinear);

    let mut w = Worst::new();
    for i in 0..n {
        let rd = r[i] * d[i];
        let scale = rd.abs().max(v[i].abs());
        w.le(-v[i], 0.0, scale);
        w.le(v[i], rd, scale);
        w.le(rd, 2.0 * v[i], scale);
    }
    checks.push(w.check(CvpProperty::MomentChain, PAIR_TOL));

    let phi0 = phi.second_derivative(0.0);
    let mut w1 = Worst::new();
    let mut w2 = Worst::new();
    let mut w3 = Worst::new();
    for a in 0..n {
        for b in 0..n {
            let (x, y) = (r[a], r[b]);
            let (fx, fy) = (v[a], v[b]);
            w1.le(y * d[a], fx + fy, fx + fy);
            let fxy = phi.value(x + y);
            let scale = fxy.abs() + fx.abs() + fy.abs();
            let defect = fxy - fx - fy;
            w2.le(-defect, 0.0, scale);
            w2.le(defect, 2.0 * (y * fx + x * fy) / (x + y), scale);
            w3.le(defect, phi0 * x * y, scale);
        }
    }
    checks.push(w1.check(CvpProperty::TangentBound, PAIR_TOL));
    checks.push(w2.check(CvpProperty::Superadditive, PAIR_TOL));
    checks.push(w3.check(CvpProperty::SecondOrderBound, PAIR_TOL));

    let growth = if n > 0 && v[n - 1] > 0.0 {
        r[n - 1] * d[n - 1] / v[n - 1]
    } else {
        f64::INFINITY
    };
    checks.push(PropertyCheck {
        property: CvpProperty::GrowthBelowP,
        holds: growth <= p - 0.05,
        worst: growth - (p - 0.05),
    });

    CvpReport { checks }
}

/// Smallest point `x_m > 1` of a geometric grid (100 points per decade)
/// beyond which `x W'(x) - W(x) >= x^m` at every grid point up to `1e300`.
///
/// The comparison is done in logarithms, so thresholds far beyond the
/// floating-point range of `x^m` differences are still resolved.
pub fn superlinearity_gap_growth(m: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&m) {
        return Err(WeightError::Argument(format!("need m in [0, 1), got {m}")));
    }
    const PER_DECADE: usize = 100;
    const DECADES: usize = 300;
    let holds = |t: f64| {
        let lx5 = t + (5.0 * (-t).exp()).ln_1p();
        2.0 * t - lx5 - lx5.ln() >= m * t
    };
    let step = std::f64::consts::LN_10 / PER_DECADE as f64;
    let total = PER_DECADE * DECADES;
    let mut last_fail = 0;
    for k in 0..=total {
        if !holds(k as f64 * step) {
            last_fail = k;
        }
    }
    if last_fail == total {
        return Err(WeightError::Argument(format!(
            "no threshold for m = {m} below 1e{DECADES}"
        )));
    }
    Ok(((last_fail + 1) as f64 * step).exp())
}

/// Convex weight with piecewise-linear concave derivative:
/// `Phi'(r_k) = k` at breakpoints `0 = r_0 < r_1 < ... < r_L`, linear in
/// between, and `Phi'(r) = L + s r_L ln(r / r_L)` beyond `r_L`, where `s` is
/// the last slope.
#[derive(Debug, Clone, PartialEq)]
pub struct VPWeight {
    breakpoints: Vec<f64>,
    /// `Phi(r_k)` for `k = 0..=L`.
    values: Vec<f64>,
}

impl VPWeight {
    /// Breakpoints must be positive, strictly increasing and have
    /// nondecreasing gaps (gap before `r_1` is `r_1`).
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(WeightError::Argument("need at least one breakpoint".into()));
        }
        let mut prev = 0.0;
        let mut prev_gap = 0.0;
        for &b in &breakpoints {
            let gap = b - prev;
            if !(b.is_finite() && gap > 0.0) {
                return Err(WeightError::Argument("breakpoints must increase strictly".into()));
            }
            if gap < prev_gap * (1.0 - 1e-12) {
                return Err(WeightError::Argument(
                    "breakpoint gaps must be nondecreasing (concave derivative)".into(),
                ));
            }
            prev = b;
            prev_gap = gap;
        }
        let mut values = vec![0.0];
        let mut lo = 0.0;
        for (k, &b) in breakpoints.iter().enumerate() {
            let g = b - lo;
            values.push(values[k] + k as f64 * g + 0.5 * g);
            lo = b;
        }
        Ok(Self { breakpoints, values })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn levels(&self) -> usize {
        self.breakpoints.len()
    }

    /// Segment containing `r`: `(k, left edge, gap)` for `r` in `[r_{k-1}, r_k]`,
    /// or `None` in the logarithmic tail.
    fn segment(&self, r: f64) -> Option<(usize, f64, f64)> {
        let k = self.breakpoints.partition_point(|&b| b < r);
        if k == self.breakpoints.len() {
            return None;
        }
        let lo = if k == 0 { 0.0 } else { self.breakpoints[k - 1] };
        Some((k, lo, self.breakpoints[k] - lo))
    }

    fn tail(&self) -> (f64, f64, f64) {
        let l = self.breakpoints.len();
        let rl = self.breakpoints[l - 1];
        let lo = if l == 1 { 0.0 } else { self.breakpoints[l - 2] };
        (l as f64, rl, 1.0 / (rl - lo))
    }
}

impl Weight for VPWeight {
    fn value(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match self.segment(r) {
            Some((k, lo, g)) => {
                let u = r - lo;
                self.values[k] + k as f64 * u + 0.5 * u * u / g
            }
            None => {
                let (l, rl, s) = self.tail();
                let ln = (r / rl).ln();
                self.values[self.values.len() - 1]
                    + l * (r - rl)
                    + s * rl * (r * ln - (r - rl))
            }
        }
    }

    fn derivative(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match self.segment(r) {
            Some((k, lo, g)) => k as f64 + (r - lo) / g,
            None => {
                let (l, rl, s) = self.tail();
                l + s * rl * (r / rl).ln()
            }
        }
    }

    fn second_derivative(&self, r: f64) -> f64 {
        match self.segment(r.max(0.0)) {
            Some((_, _, g)) => 1.0 / g,
            None => {
                let (_, rl, s) = self.tail();
                s * rl / r
            }
        }
    }
}

/// Piecewise-constant density `values[i]` on cells centred at `pivots[i]`
/// with widths `widths[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDensity {
    pub pivots: Vec<f64>,
    pub widths: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampledDensity {
    fn validate(&self) -> Result<()> {
        let n = self.pivots.len();
        if self.widths.len() != n || self.values.len() != n {
            return Err(WeightError::Argument("pivots, widths and values differ in length".into()));
        }
        if self.pivots.iter().chain(&self.widths).any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(WeightError::Argument("pivots and widths must be positive".into()));
        }
        if self.values.iter().any(|&f| f < 0.0 || f.is_nan()) {
            return Err(WeightError::Argument("density must be nonnegative".into()));
        }
        Ok(())
    }

    /// `x_i^m0 f_i w_i` per cell.
    fn weighted_masses(&self, m0: f64) -> Vec<f64> {
        (0..self.pivots.len())
            .map(|i| self.pivots[i].powf(m0) * self.values[i] * self.widths[i])
            .collect()
    }

    /// `sum_i x_i^m0 phi(f_i) w_i`.
    pub fn functional(&self, phi: &dyn Weight, m0: f64) -> f64 {
        (0..self.pivots.len())
            .map(|i| self.pivots[i].powf(m0) * phi.value(self.values[i]) * self.widths[i])
            .sum()
    }
}

/// Level-set construction of a weight `Phi` with
/// `sum x^m0 Phi(f) w <= 4 I0 <= 2 I0 (1 + L)`, where `I0 = sum x^m0 f w`
/// and `L` is the number of levels.
///
/// Level `r_k` is the smallest density value whose super-level tail carries
/// at most `2^-k I0`; levels are then pushed up where needed so the gaps
/// between them never shrink.
pub fn build_dlvp_weight(f: &SampledDensity, m0: f64) -> Result<VPWeight> {
    f.validate()?;
    let mu = f.weighted_masses(m0);
    let i0: f64 = mu.iter().sum();
    if !i0.is_finite() {
        return Err(WeightError::NonIntegrable(format!("weighted mass {i0}")));
    }
    if i0 == 0.0 {
        return VPWeight::new(vec![1.0]);
    }
    // cells sorted by density, with tails[i] = mass of cells strictly above order[i]
    let mut order: Vec<usize> = (0..mu.len()).collect();
    order.sort_by(|&a, &b| f.values[a].total_cmp(&f.values[b]));
    let tail_above = |r: f64| -> f64 {
        order
            .iter()
            .rev()
            .take_while(|&&i| f.values[i] > r)
            .map(|&i| mu[i])
            .sum()
    };

    let mut levels: Vec<f64> = Vec::new();
    let mut budget = i0;
    loop {
        budget *= 0.5;
        let candidate = order
            .iter()
            .map(|&i| f.values[i])
            .find(|&r| tail_above(r) <= budget)
            .expect("the largest value has empty tail");
        let (prev, prev2) = match levels.len() {
            0 => (0.0, 0.0),
            1 => (levels[0], 0.0),
            n => (levels[n - 1], levels[n - 2]),
        };
        let level = if levels.is_empty() {
            candidate
        } else {
            candidate.max(2.0 * prev - prev2)
        };
        let level = if level > prev { level } else { 2.0 * prev - prev2 };
        levels.push(level);
        if tail_above(level) == 0.0 {
            break;
        }
    }
    VPWeight::new(levels)
}
