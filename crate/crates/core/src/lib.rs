//! Mass-conserving solver for the coagulation and multiple-fragmentation
//! equation with the power-law daughter distribution
//! `b(x, y) = (nu + 2) x^nu / y^(nu + 1)`, `nu` in `(-2, -1]`, together with
//! numerical checks of the a priori estimates that keep such solutions
//! well behaved (mass conservation, weighted moment envelopes, the
//! integrated fragmentation flux and a two-run stability bound).
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`]: coagulation kernels, fragmentation rates, the daughter
//!   distribution and certification of the structural hypotheses.
//! * [`weights`]: the log-log weight `W` and convex superlinear weights
//!   used for tail and uniform-integrability diagnostics.
//! * [`discretization`]: geometric grids, exact fragment tables, the
//!   truncated fixed-pivot coagulation table and the discrete operators.
//! * [`solver`]: positivity-preserving explicit time integration.
//! * [`diagnostics`]: moment functionals and Gronwall envelope checks.
//! * [`config`] and [`cli`]: scenario files, orchestration and output.

// negated comparisons are deliberate: NaN must fail every range check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod discretization;
pub mod kernels;
pub mod solver;
pub mod weights;

pub use discretization::{build_grid, Operators, SizeGrid, State};
pub use kernels::{CoagKernel, DaughterDist, FragRate, KernelSpec};
pub use solver::{run, Scenario, StepControl};
