use crate::discretization::State;
use crate::weights::{LogLogWeight, VPWeight, Weight};

/// Moment and flux functionals recorded at every output time.
///
/// All functionals use pivot values: `M_m = sum_i x_i^(m-1) g_i`,
/// `W = sum_i W(x_i) / x_i g_i` and `P_m = sum_{x_i >= 1} x_i^(m-1) a(x_i) g_i`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    pub moment_orders: Vec<f64>,
    /// `moments[o][t]` for order `moment_orders[o]`.
    pub moments: Vec<Vec<f64>>,
    pub flux_orders: Vec<f64>,
    pub flux: Vec<Vec<f64>>,
    pub w_functional: Vec<f64>,
    /// Lumped sub-grid mass divided by total mass.
    pub subgrid_fraction: Vec<f64>,
}

fn find(orders: &[f64], m: f64) -> Option<usize> {
    orders.iter().position(|&o| (o - m).abs() <= 1e-12 * o.abs().max(1.0))
}

impl MomentSeries {
    pub fn new(moment_orders: Vec<f64>, flux_orders: Vec<f64>) -> Self {
        let moments = vec![Vec::new(); moment_orders.len()];
        let flux = vec![Vec::new(); flux_orders.len()];
        Self { moment_orders, moments, flux_orders, flux, ..Self::default() }
    }

    /// Append the functionals of `state`; `rates` are `a(x_i)` at the pivots.
    pub fn record(&mut self, state: &State, rates: &[f64]) {
        let x = state.grid().pivots();
        let g = &state.mass;
        self.times.push(state.t);
        for (o, &m) in self.moment_orders.iter().enumerate() {
            self.moments[o].push(moment(x, g, m));
        }
        for (o, &m) in self.flux_orders.iter().enumerate() {
            let p = (0..x.len())
                .filter(|&i| x[i] >= 1.0)
                .map(|i| x[i].powf(m - 1.0) * rates[i] * g[i])
                .sum();
            self.flux[o].push(p);
        }
        self.w_functional.push(w_functional(state));
        let total = state.total_mass();
        self.subgrid_fraction
            .push(if total > 0.0 { state.lumped_subgrid_mass / total } else { 0.0 });
    }

    pub fn moment(&self, m: f64) -> Option<&[f64]> {
        find(&self.moment_orders, m).map(|o| self.moments[o].as_slice())
    }

    pub fn flux(&self, m: f64) -> Option<&[f64]> {
        find(&self.flux_orders, m).map(|o| self.flux[o].as_slice())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn moment(x: &[f64], g: &[f64], m: f64) -> f64 {
    if m == 1.0 {
        return g.iter().sum();
    }
    x.iter().zip(g).map(|(x, g)| x.powf(m - 1.0) * g).sum()
}

/// `M_m = sum_i x_i^(m-1) g_i`.
pub fn state_moment(state: &State, m: f64) -> f64 {
    moment(state.grid().pivots(), &state.mass, m)
}

/// `sum_i W(x_i) / x_i g_i`.
pub fn w_functional(state: &State) -> f64 {
    let w = LogLogWeight;
    state
        .grid()
        .pivots()
        .iter()
        .zip(&state.mass)
        .map(|(&x, g)| w.value(x) / x * g)
        .sum()
}

/// `xi(x) = max(x^m0, x^(1 + delta))`.
pub fn xi(x: f64, m0: f64, delta: f64) -> f64 {
    if x <= 1.0 {
        x.powf(m0)
    } else {
        x.powf(1.0 + delta)
    }
}

/// Weighted distance `sum_i xi(x_i) |n_a - n_b|_i` between two states on
/// the same grid.
pub fn xi_distance(a: &State, b: &State, m0: f64, delta: f64) -> f64 {
    a.grid()
        .pivots()
        .iter()
        .zip(a.mass.iter().zip(&b.mass))
        .map(|(&x, (ga, gb))| xi(x, m0, delta) / x * (ga - gb).abs())
        .sum()
}

/// `sum_{x_i < R} x_i^m0 Phi(f_i) w_i` with the reconstructed density
/// `f_i = g_i / (x_i w_i)`.
pub fn phi_functional(state: &State, vp: &VPWeight, m0: f64, r: f64) -> f64 {
    let grid = state.grid();
    let f = state.densities();
    grid.pivots()
        .iter()
        .zip(grid.widths())
        .zip(f)
        .filter(|((&x, _), _)| x < r)
        .map(|((&x, &w), f)| x.powf(m0) * vp.value(f) * w)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_grid;
    use std::sync::Arc;

    #[test]
    fn moments_of_single_cell() {
        let grid = Arc::new(build_grid(1e-2, 1e2, 8).unwrap());
        let mut s = State::zeros(grid.clone());
        let k = grid.cell_of(3.0).unwrap();
        s.mass[k] = 2.0;
        let x = grid.pivots()[k];
        let mut series = MomentSeries::new(vec![0.0, 1.0, 2.0], vec![0.65]);
        let rates: Vec<f64> = grid.pivots().to_vec();
        series.record(&s, &rates);
        assert_eq!(series.moment(1.0).unwrap()[0], 2.0);
        assert!((series.moment(0.0).unwrap()[0] - 2.0 / x).abs() < 1e-15);
        assert!((series.moment(2.0).unwrap()[0] - 2.0 * x).abs() < 1e-14);
        assert!((series.flux(0.65).unwrap()[0] - x.powf(-0.35) * x * 2.0).abs() < 1e-13);
        assert!(series.moment(3.0).is_none());
    }

    #[test]
    fn phi_functional_indicator() {
        let grid = Arc::new(build_grid(1e-2, 1e2, 8).unwrap());
        let zero = State::zeros(grid.clone());
        let vp = VPWeight::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(phi_functional(&zero, &vp, 0.3, 10.0), 0.0);
        let mut s = State::zeros(grid.clone());
        // density 1 on the cell containing 1.5
        let k = grid.cell_of(1.5).unwrap();
        let (x, w) = (grid.pivots()[k], grid.widths()[k]);
        s.mass[k] = x * w;
        let expected = x.powf(0.3) * vp.value(1.0) * w;
        assert!((phi_functional(&s, &vp, 0.3, 10.0) - expected).abs() < 1e-15);
        assert_eq!(phi_functional(&s, &vp, 0.3, 1.0), 0.0);
    }

    #[test]
    fn xi_distance_scaling() {
        let grid = Arc::new(build_grid(1e-2, 1e2, 8).unwrap());
        let mut a = State::zeros(grid.clone());
        a.mass.iter_mut().enumerate().for_each(|(i, g)| *g = 1.0 + i as f64);
        let mut b = a.clone();
        b.mass.iter_mut().for_each(|g| *g *= 1.001);
        let d = xi_distance(&a, &b, 0.3, 0.5);
        let norm: f64 = grid
            .pivots()
            .iter()
            .zip(&a.mass)
            .map(|(&x, g)| xi(x, 0.3, 0.5) / x * g)
            .sum();
        assert!((d - 1e-3 * norm).abs() < 1e-12 * norm);
        assert_eq!(xi_distance(&a, &a, 0.3, 0.5), 0.0);
    }
}
