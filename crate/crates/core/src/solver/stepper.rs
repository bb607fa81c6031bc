use super::SolverError;
use crate::discretization::{Operators, State};

/// Step-size control for the explicit two-stage scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub dt_init: f64,
    pub dt_max: f64,
    /// Shrink factor applied after a rejected step.
    pub safety: f64,
    /// Largest fraction of a cell's mass that may be lost in one stage.
    pub positivity_fraction: f64,
    /// Cells holding at most this fraction of the total mass do not limit
    /// the step; their losses are throttled instead. Zero disables this.
    pub negligible_mass: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            dt_init: 1e-3,
            dt_max: 0.05,
            safety: 0.5,
            positivity_fraction: 0.5,
            negligible_mass: 1e-14,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::Argument(msg));
        if !(self.dt_init > 0.0 && self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return bad(format!("dt_init and dt_max must be positive, got {} and {}", self.dt_init, self.dt_max));
        }
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return bad(format!("safety must lie in (0, 1), got {}", self.safety));
        }
        if !(self.positivity_fraction > 0.0 && self.positivity_fraction < 1.0) {
            return bad(format!("positivity_fraction must lie in (0, 1), got {}", self.positivity_fraction));
        }
        if !(0.0..1.0).contains(&self.negligible_mass) {
            return bad(format!("negligible_mass must lie in [0, 1), got {}", self.negligible_mass));
        }
        Ok(())
    }
}

/// Outcome of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub dt: f64,
    /// The step was shortened below the requested limit.
    pub restricted: bool,
    pub rejected: usize,
}

struct Scratch {
    loss: Vec<f64>,
    active: Vec<bool>,
    throttle: Vec<f64>,
    k: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
}

/// SSP-RK2 (Heun) stepper with loss-proportional step control, advancing
/// any number of states with one common step sequence.
pub struct Stepper<'a> {
    ops: &'a Operators,
    control: StepControl,
    scratch: Vec<Scratch>,
}

const MAX_REJECTIONS: usize = 80;

impl<'a> Stepper<'a> {
    pub fn new(ops: &'a Operators, control: StepControl) -> Result<Self, SolverError> {
        control.validate()?;
        Ok(Self { ops, control, scratch: Vec::new() })
    }

    pub fn control(&self) -> &StepControl {
        &self.control
    }

    fn ensure_scratch(&mut self, count: usize) {
        let n = self.ops.grid().len();
        while self.scratch.len() < count {
            self.scratch.push(Scratch {
                loss: vec![0.0; n],
                active: vec![true; n],
                throttle: vec![1.0; n],
                k: vec![0.0; n],
                u1: vec![0.0; n],
                u2: vec![0.0; n],
            });
        }
    }

    /// Largest step allowed by the positivity constraint on active cells.
    fn classify(&mut self, states: &[State]) -> f64 {
        let p = self.control.positivity_fraction;
        let eps = self.control.negligible_mass;
        let mut cap = f64::INFINITY;
        for (s, sc) in states.iter().zip(self.scratch.iter_mut()) {
            self.ops.loss_coefficients(&s.mass, &mut sc.loss);
            let threshold = eps * s.total_mass();
            for i in 0..s.mass.len() {
                let g = s.mass[i];
                // empty cells never lose mass
                sc.active[i] = g > threshold;
                if sc.active[i] && sc.loss[i] > 0.0 {
                    cap = cap.min(p / sc.loss[i]);
                }
            }
        }
        cap
    }

    fn set_throttle(sc: &mut Scratch, dt: f64, p: f64) {
        for i in 0..sc.throttle.len() {
            sc.throttle[i] = if sc.active[i] || dt * sc.loss[i] <= p {
                1.0
            } else {
                p / (dt * sc.loss[i])
            };
        }
    }

    /// Advance all `states` by one common step no longer than `dt_limit`.
    pub fn step(&mut self, states: &mut [State], dt_limit: f64) -> Result<StepInfo, SolverError> {
        self.ensure_scratch(states.len());
        let cap = self.classify(states);
        let p = self.control.positivity_fraction;
        let mut dt = dt_limit.min(self.control.dt_max);
        let mut restricted = false;
        if cap < dt {
            dt = cap;
            restricted = true;
        }
        let mut rejected = 0;
        'attempt: loop {
            if rejected > MAX_REJECTIONS || !(dt > 0.0) {
                return Err(SolverError::StepFailure(format!(
                    "no admissible step at t = {} after {rejected} rejections",
                    states[0].t
                )));
            }
            let mut lumped = vec![0.0; states.len()];
            for (idx, (s, sc)) in states.iter().zip(self.scratch.iter_mut()).enumerate() {
                Self::set_throttle(sc, dt, p);
                let rate0 = self.ops.derivative_into(&s.mass, Some(&sc.throttle), &mut sc.k);
                for i in 0..sc.u1.len() {
                    sc.u1[i] = s.mass[i] + dt * sc.k[i];
                }
                check_finite(&sc.u1, s.t)?;
                if sc.u1.iter().any(|&v| v < 0.0) {
                    dt *= self.control.safety;
                    rejected += 1;
                    restricted = true;
                    continue 'attempt;
                }
                // second stage: losses at the intermediate state must stay
                // below the full cell mass on active cells
                self.ops.loss_coefficients(&sc.u1, &mut sc.loss);
                if (0..sc.u1.len()).any(|i| sc.active[i] && dt * sc.loss[i] > 1.0 - 1e-12) {
                    // restore stage-start loss rates for the retry
                    self.ops.loss_coefficients(&s.mass, &mut sc.loss);
                    dt *= self.control.safety;
                    rejected += 1;
                    restricted = true;
                    continue 'attempt;
                }
                Self::set_throttle(sc, dt, p);
                let rate1 = self.ops.derivative_into(&sc.u1, Some(&sc.throttle), &mut sc.k);
                for i in 0..sc.u2.len() {
                    sc.u2[i] = 0.5 * s.mass[i] + 0.5 * (sc.u1[i] + dt * sc.k[i]);
                }
                check_finite(&sc.u2, s.t)?;
                self.ops.loss_coefficients(&s.mass, &mut sc.loss);
                if sc.u2.iter().any(|&v| v < 0.0) {
                    dt *= self.control.safety;
                    rejected += 1;
                    restricted = true;
                    continue 'attempt;
                }
                lumped[idx] = 0.5 * dt * (rate0 + rate1);
            }
            for ((s, sc), l) in states.iter_mut().zip(self.scratch.iter()).zip(lumped) {
                s.mass.copy_from_slice(&sc.u2);
                s.t += dt;
                s.lumped_subgrid_mass += l;
            }
            return Ok(StepInfo { dt, restricted, rejected });
        }
    }
}

fn check_finite(v: &[f64], t: f64) -> Result<(), SolverError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(cell) => Err(SolverError::NonFinite { t, cell }),
        None => Ok(()),
    }
}
