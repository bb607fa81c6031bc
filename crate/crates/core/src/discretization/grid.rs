use super::DiscretizationError;

/// Geometric partition of `[x_min, j)` with geometric-mean pivots.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeGrid {
    x_min: f64,
    j: f64,
    cells_per_decade: usize,
    edges: Vec<f64>,
    pivots: Vec<f64>,
    widths: Vec<f64>,
}

/// Build a grid with `ceil(cells_per_decade * log10(j / x_min))` cells.
pub fn build_grid(x_min: f64, j: f64, cells_per_decade: usize) -> Result<SizeGrid, DiscretizationError> {
    if !(x_min > 0.0 && j.is_finite() && x_min < j) {
        return Err(DiscretizationError::Argument(format!(
            "need 0 < x_min < j, got x_min = {x_min}, j = {j}"
        )));
    }
    if cells_per_decade < 4 {
        return Err(DiscretizationError::Argument(format!(
            "cells_per_decade must be at least 4, got {cells_per_decade}"
        )));
    }
    let span = (j / x_min).ln();
    // the small offset keeps exact decade counts from rounding up
    let n = ((cells_per_decade as f64 * span / std::f64::consts::LN_10) - 1e-9).ceil().max(1.0) as usize;
    let mut edges: Vec<f64> = (0..=n)
        .map(|k| x_min * (span * k as f64 / n as f64).exp())
        .collect();
    edges[0] = x_min;
    edges[n] = j;
    let pivots = edges.windows(2).map(|e| (e[0] * e[1]).sqrt()).collect();
    let widths = edges.windows(2).map(|e| e[1] - e[0]).collect();
    Ok(SizeGrid { x_min, j, cells_per_decade, edges, pivots, widths })
}

impl SizeGrid {
    pub fn len(&self) -> usize {
        self.pivots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivots.is_empty()
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn j(&self) -> f64 {
        self.j
    }

    pub fn cells_per_decade(&self) -> usize {
        self.cells_per_decade
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn pivots(&self) -> &[f64] {
        &self.pivots
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Constant ratio between consecutive edges.
    pub fn ratio(&self) -> f64 {
        (self.j / self.x_min).powf(1.0 / self.len() as f64)
    }

    /// Cell containing `x`, if `x_min <= x < j`.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.x_min && x < self.j) {
            return None;
        }
        Some((self.edges.partition_point(|&e| e <= x) - 1).min(self.len() - 1))
    }
}
