use std::sync::Arc;

use super::{CoagTables, DiscretizationError, FragTables, SizeGrid};
use crate::kernels::KernelSpec;

/// Cell-integrated mass `g_i = ∫_cell x f dx` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    grid: Arc<SizeGrid>,
    pub mass: Vec<f64>,
    pub t: f64,
    /// Cumulative fragment mass born below `x_min` and lumped into cell 0.
    pub lumped_subgrid_mass: f64,
}

impl State {
    pub fn new(grid: Arc<SizeGrid>, mass: Vec<f64>) -> Result<Self, DiscretizationError> {
        if mass.len() != grid.len() {
            return Err(DiscretizationError::Dimension { expected: grid.len(), got: mass.len() });
        }
        if mass.iter().any(|&g| !(g >= 0.0 && g.is_finite())) {
            return Err(DiscretizationError::Argument(
                "cell masses must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { grid, mass, t: 0.0, lumped_subgrid_mass: 0.0 })
    }

    pub fn zeros(grid: Arc<SizeGrid>) -> Self {
        let n = grid.len();
        Self { grid, mass: vec![0.0; n], t: 0.0, lumped_subgrid_mass: 0.0 }
    }

    pub fn grid(&self) -> &Arc<SizeGrid> {
        &self.grid
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Number of particles per cell, `g_i / x_i`.
    pub fn numbers(&self) -> Vec<f64> {
        self.mass.iter().zip(self.grid.pivots()).map(|(g, x)| g / x).collect()
    }

    /// Reconstructed density `f_i = g_i / (x_i w_i)`.
    pub fn densities(&self) -> Vec<f64> {
        self.mass
            .iter()
            .zip(self.grid.pivots().iter().zip(self.grid.widths()))
            .map(|(g, (x, w))| g / (x * w))
            .collect()
    }
}

/// Precomputed discrete coagulation and fragmentation operators.
#[derive(Debug, Clone)]
pub struct Operators {
    grid: Arc<SizeGrid>,
    frag: FragTables,
    coag: CoagTables,
}

impl Operators {
    pub fn new(grid: Arc<SizeGrid>, spec: &KernelSpec) -> Result<Self, DiscretizationError> {
        let frag = FragTables::new(&grid, spec)?;
        let coag = CoagTables::new(&grid, spec)?;
        Ok(Self { grid, frag, coag })
    }

    pub fn grid(&self) -> &Arc<SizeGrid> {
        &self.grid
    }

    pub fn frag_tables(&self) -> &FragTables {
        &self.frag
    }

    pub fn coag_tables(&self) -> &CoagTables {
        &self.coag
    }

    fn check_len(&self, got: usize) -> Result<(), DiscretizationError> {
        let expected = self.grid.len();
        if got == expected {
            Ok(())
        } else {
            Err(DiscretizationError::Dimension { expected, got })
        }
    }

    fn check_state(&self, state: &State) -> Result<(), DiscretizationError> {
        self.check_len(state.mass.len())?;
        if !Arc::ptr_eq(&self.grid, state.grid()) && **state.grid() != *self.grid {
            return Err(DiscretizationError::Argument("state lives on a different grid".into()));
        }
        Ok(())
    }

    /// Per-unit-mass loss rates `c_i`: the loss of cell `i` is `c_i g_i`.
    pub fn loss_coefficients(&self, mass: &[f64], out: &mut [f64]) {
        let x = self.grid.pivots();
        out.copy_from_slice(self.frag.loss_rates());
        for p in self.coag.pairs() {
            let (i, k) = (p.i as usize, p.k as usize);
            out[i] += p.rate * mass[k] / x[k];
            if i != k {
                out[k] += p.rate * mass[i] / x[i];
            }
        }
    }

    /// Coagulation derivative added into `out`. With `throttle`, each pair's
    /// event rate is scaled by the smaller throttle of its two cells.
    pub fn add_coag(&self, mass: &[f64], throttle: Option<&[f64]>, out: &mut [f64]) {
        let x = self.grid.pivots();
        for p in self.coag.pairs() {
            let (i, k) = (p.i as usize, p.k as usize);
            if mass[i] == 0.0 || mass[k] == 0.0 {
                continue;
            }
            let theta = throttle.map_or(1.0, |t| t[i].min(t[k]));
            let mut flux = theta * p.rate * (mass[i] / x[i]) * (mass[k] / x[k]);
            if i == k {
                flux *= 0.5;
            }
            out[i] -= x[i] * flux;
            out[k] -= x[k] * flux;
            let l = p.target as usize;
            out[l] += p.lower_mass * flux;
            if !p.overflow {
                out[l + 1] += p.upper_mass * flux;
            }
        }
    }

    /// Fragmentation derivative added into `out`; returns the rate at which
    /// mass is lumped into cell 0 from below `x_min`.
    pub fn add_frag(&self, mass: &[f64], throttle: Option<&[f64]>, out: &mut [f64]) -> f64 {
        let mut subgrid_rate = 0.0;
        for (k, &g) in mass.iter().enumerate() {
            let theta = throttle.map_or(1.0, |t| t[k]);
            let loss = theta * self.frag.loss_rate(k) * g;
            if loss == 0.0 {
                continue;
            }
            out[k] -= loss;
            for (o, f) in out.iter_mut().zip(self.frag.row(k)) {
                *o += f * loss;
            }
            let lumped = self.frag.subgrid(k) * loss;
            out[0] += lumped;
            subgrid_rate += lumped;
        }
        subgrid_rate
    }

    /// Full derivative written into `out`; returns the sub-grid lumping rate.
    pub fn derivative_into(&self, mass: &[f64], throttle: Option<&[f64]>, out: &mut [f64]) -> f64 {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.add_coag(mass, throttle, out);
        self.add_frag(mass, throttle, out)
    }

    pub fn apply_frag(&self, state: &State) -> Result<Vec<f64>, DiscretizationError> {
        self.check_state(state)?;
        let mut out = vec![0.0; state.mass.len()];
        self.add_frag(&state.mass, None, &mut out);
        Ok(out)
    }

    pub fn apply_coag(&self, state: &State) -> Result<Vec<f64>, DiscretizationError> {
        self.check_state(state)?;
        let mut out = vec![0.0; state.mass.len()];
        self.add_coag(&state.mass, None, &mut out);
        Ok(out)
    }

    pub fn derivative(&self, state: &State) -> Result<Vec<f64>, DiscretizationError> {
        self.check_state(state)?;
        let mut out = vec![0.0; state.mass.len()];
        self.derivative_into(&state.mass, None, &mut out);
        Ok(out)
    }
}
