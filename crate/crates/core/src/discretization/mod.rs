//! Geometric size grids, exact fragment tables, the truncated fixed-pivot
//! coagulation table, and the discrete operators acting on cell masses.
//!
//! The state variable is the mass `g = x f` integrated over each cell, so
//! fragmentation is exactly conservative even though the fragment count of
//! the daughter law is infinite.

mod grid;
mod operators;
mod tables;

pub use grid::{build_grid, SizeGrid};
pub use operators::{Operators, State};
pub use tables::{CoagPair, CoagTables, FragTables};

use crate::kernels::KernelError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizationError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("dimension mismatch: expected {expected} cells, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}
