use std::sync::Arc;

use super::SolverError;
use crate::discretization::{SizeGrid, State};

/// Initial density descriptor, projected onto cell masses by exact
/// integration of `x f(x)` over each cell. Mass below `x_min` goes to the
/// first cell; mass at or above `j` is discarded (the truncated datum).
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// All mass at a single size.
    Monodisperse { size: f64, mass: f64 },
    /// `f(x) = mass / mean^2 exp(-x / mean)`.
    Exponential { mean: f64, mass: f64 },
    /// `f(x) = C x^-p` on `(0, cutoff)`, zero above, with `C` set by `mass`.
    PowerCutoff { p: f64, cutoff: f64, mass: f64 },
    /// Piecewise-constant density on `edges`.
    Tabulated { edges: Vec<f64>, density: Vec<f64> },
}

fn positive(name: &str, v: f64) -> Result<(), SolverError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SolverError::Argument(format!("{name} must be positive and finite, got {v}")))
    }
}

/// `1 - e^-h (1 + h)`, accurate for small `h`.
fn phi2(h: f64) -> f64 {
    if h < 0.1 {
        // alternating series h^2/2 - h^3/3 + h^4/8 - ...; term n is (-1)^n h^n (n-1)/n!
        let mut sum = 0.0;
        let mut pow_over_fact = h; // h^n / n!
        for n in 2..30 {
            pow_over_fact *= h / n as f64;
            let term = pow_over_fact * (n - 1) as f64;
            sum += if n % 2 == 0 { term } else { -term };
            if term < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        1.0 - (-h).exp() * (1.0 + h)
    }
}

impl InitialCondition {
    pub fn validate(&self, m0: f64) -> Result<(), SolverError> {
        match self {
            InitialCondition::Monodisperse { size, mass } => {
                positive("ic_size", *size)?;
                positive("ic_mass", *mass)
            }
            InitialCondition::Exponential { mean, mass } => {
                positive("ic_mean", *mean)?;
                positive("ic_mass", *mass)
            }
            InitialCondition::PowerCutoff { p, cutoff, mass } => {
                positive("ic_cutoff", *cutoff)?;
                positive("ic_mass", *mass)?;
                if !(p.is_finite() && *p < 1.0 + m0) {
                    return Err(SolverError::Argument(format!(
                        "ic_p = {p} must be below 1 + m0 = {} so the m0 moment is finite",
                        1.0 + m0
                    )));
                }
                Ok(())
            }
            InitialCondition::Tabulated { edges, density } => {
                if edges.len() < 2 || density.len() + 1 != edges.len() {
                    return Err(SolverError::Argument(
                        "tabulated initial condition needs n + 1 edges for n densities".into(),
                    ));
                }
                if edges[0] < 0.0 || edges.windows(2).any(|e| !(e[0] < e[1])) || !edges[edges.len() - 1].is_finite() {
                    return Err(SolverError::Argument(
                        "ic_edges must be nonnegative and strictly increasing".into(),
                    ));
                }
                if density.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
                    return Err(SolverError::Argument("ic_density must be nonnegative".into()));
                }
                Ok(())
            }
        }
    }

    /// Mass of the (untruncated) datum between sizes `a < b`.
    fn mass_between(&self, a: f64, b: f64) -> f64 {
        match self {
            InitialCondition::Monodisperse { size, mass } => {
                if *size >= a && *size < b {
                    *mass
                } else {
                    0.0
                }
            }
            InitialCondition::Exponential { mean, mass } => {
                let u = a / mean;
                if b.is_infinite() {
                    return mass * (-u).exp() * (1.0 + u);
                }
                let h = (b - a) / mean;
                mass * (-u).exp() * (u * -(-h).exp_m1() + phi2(h))
            }
            InitialCondition::PowerCutoff { p, cutoff, mass } => {
                let e = 2.0 - p;
                let frac = |x: f64| (x.min(*cutoff) / cutoff).powf(e);
                if a >= *cutoff {
                    0.0
                } else {
                    mass * (frac(b) - frac(a))
                }
            }
            InitialCondition::Tabulated { edges, density } => {
                let mut total = 0.0;
                for (s, &d) in density.iter().enumerate() {
                    let lo = edges[s].max(a);
                    let hi = edges[s + 1].min(b);
                    if hi > lo && d > 0.0 {
                        total += d * 0.5 * (hi - lo) * (hi + lo);
                    }
                }
                total
            }
        }
    }

    /// Cell masses on `grid`, with everything below `x_min` in the first cell.
    pub fn project(&self, grid: &Arc<SizeGrid>) -> Result<State, SolverError> {
        if let InitialCondition::Monodisperse { size, .. } = self {
            if *size >= grid.j() {
                return Err(SolverError::Argument(format!(
                    "monodisperse size {size} lies beyond the truncation j = {}",
                    grid.j()
                )));
            }
        }
        let edges = grid.edges();
        let mut mass: Vec<f64> = edges.windows(2).map(|e| self.mass_between(e[0], e[1])).collect();
        mass[0] += self.mass_between(0.0, grid.x_min());
        Ok(State::new(grid.clone(), mass)?)
    }

    /// Initial datum scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self.clone() {
            InitialCondition::Monodisperse { size, mass } => {
                InitialCondition::Monodisperse { size, mass: mass * factor }
            }
            InitialCondition::Exponential { mean, mass } => {
                InitialCondition::Exponential { mean, mass: mass * factor }
            }
            InitialCondition::PowerCutoff { p, cutoff, mass } => {
                InitialCondition::PowerCutoff { p, cutoff, mass: mass * factor }
            }
            InitialCondition::Tabulated { edges, density } => InitialCondition::Tabulated {
                edges,
                density: density.into_iter().map(|d| d * factor).collect(),
            },
        }
    }
}
