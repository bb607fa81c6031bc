use super::{DiscretizationError, SizeGrid};
use crate::kernels::KernelSpec;

/// Mass bookkeeping for fragmentation of each parent pivot.
///
/// For parent `k` the fractions of its mass landing in cells `0..k` come from
/// exact partial mass moments of the daughter law; the parent's own cell gets
/// the part between its lower edge and the pivot, and the part below `x_min`
/// is lumped into cell 0 and reported separately.
#[derive(Debug, Clone, PartialEq)]
pub struct FragTables {
    /// Row `k` holds fractions for cells `0..=k`, flattened.
    fractions: Vec<f64>,
    subgrid: Vec<f64>,
    loss_rate: Vec<f64>,
}

fn row_start(k: usize) -> usize {
    k * (k + 1) / 2
}

impl FragTables {
    pub fn new(grid: &SizeGrid, spec: &KernelSpec) -> Result<Self, DiscretizationError> {
        let n = grid.len();
        let edges = grid.edges();
        let d = spec.daughter;
        let mut fractions = Vec::with_capacity(row_start(n));
        let mut subgrid = Vec::with_capacity(n);
        let mut loss_rate = Vec::with_capacity(n);
        let mut below = Vec::with_capacity(n + 1);
        for (k, &y) in grid.pivots().iter().enumerate() {
            // below[i]: fraction of the parent's mass under edge i
            below.clear();
            below.extend(edges[..=k].iter().map(|&e| d.mass_fraction_below(e, y)));
            for i in 0..k {
                fractions.push(below[i + 1] - below[i]);
            }
            fractions.push(1.0 - below[k]);
            subgrid.push(below[0]);
            let a = spec.frag.eval(y)?;
            if !(a >= 0.0 && a.is_finite()) {
                return Err(DiscretizationError::Argument(format!(
                    "fragmentation rate {a} at size {y} is not finite and nonnegative"
                )));
            }
            loss_rate.push(a);
        }
        Ok(Self { fractions, subgrid, loss_rate })
    }

    pub fn len(&self) -> usize {
        self.subgrid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subgrid.is_empty()
    }

    /// Fractions of parent `k`'s mass landing in cells `0..=k`.
    pub fn row(&self, k: usize) -> &[f64] {
        &self.fractions[row_start(k)..row_start(k + 1)]
    }

    /// Fraction of parent `k`'s mass landing in cell `i` (zero above `k`).
    pub fn fraction(&self, i: usize, k: usize) -> f64 {
        if i > k {
            0.0
        } else {
            self.fractions[row_start(k) + i]
        }
    }

    /// Fraction of parent `k`'s mass falling below `x_min`.
    pub fn subgrid(&self, k: usize) -> f64 {
        self.subgrid[k]
    }

    pub fn loss_rate(&self, k: usize) -> f64 {
        self.loss_rate[k]
    }

    pub fn loss_rates(&self) -> &[f64] {
        &self.loss_rate
    }

    pub fn is_zero(&self) -> bool {
        self.loss_rate.iter().all(|&a| a == 0.0)
    }
}

/// One unmasked coagulation pair `i <= k` and where its merged mass goes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoagPair {
    pub i: u32,
    pub k: u32,
    pub rate: f64,
    /// Cell receiving `lower_mass` per merger; `upper_mass` goes to `target + 1`.
    pub target: u32,
    /// `lambda x_l`, with `lambda` the number share of the lower pivot.
    pub lower_mass: f64,
    /// `x_i + x_k - lower_mass`.
    pub upper_mass: f64,
    /// Merged size lies beyond the last pivot; all mass goes to the last cell.
    pub overflow: bool,
}

impl CoagPair {
    /// Number share `lambda` of the lower target pivot.
    pub fn lambda(&self, pivots: &[f64]) -> f64 {
        if self.overflow {
            1.0
        } else {
            self.lower_mass / pivots[self.target as usize]
        }
    }
}

/// Fixed-pivot coagulation table restricted to pairs with `x_i + x_k < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoagTables {
    pairs: Vec<CoagPair>,
    n: usize,
}

impl CoagTables {
    pub fn new(grid: &SizeGrid, spec: &KernelSpec) -> Result<Self, DiscretizationError> {
        let x = grid.pivots();
        let n = x.len();
        let j = grid.j();
        let mut pairs = Vec::new();
        if spec.coag.is_zero() {
            return Ok(Self { pairs, n });
        }
        for i in 0..n {
            for k in i..n {
                let v = x[i] + x[k];
                if v >= j {
                    break;
                }
                let rate = spec.coag.eval(x[i], x[k])?;
                if !(rate >= 0.0 && rate.is_finite()) {
                    return Err(DiscretizationError::Argument(format!(
                        "coagulation rate {rate} at ({}, {}) is not finite and nonnegative",
                        x[i], x[k]
                    )));
                }
                if rate == 0.0 {
                    continue;
                }
                let l = x.partition_point(|&p| p <= v) - 1;
                let pair = if l + 1 >= n {
                    CoagPair {
                        i: i as u32,
                        k: k as u32,
                        rate,
                        target: (n - 1) as u32,
                        lower_mass: v,
                        upper_mass: 0.0,
                        overflow: true,
                    }
                } else {
                    let lambda = (x[l + 1] - v) / (x[l + 1] - x[l]);
                    let lower_mass = lambda * x[l];
                    CoagPair {
                        i: i as u32,
                        k: k as u32,
                        rate,
                        target: l as u32,
                        lower_mass,
                        upper_mass: v - lower_mass,
                        overflow: false,
                    }
                };
                pairs.push(pair);
            }
        }
        Ok(Self { pairs, n })
    }

    pub fn pairs(&self) -> &[CoagPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn overflow_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.overflow).count()
    }

    /// Unmasked pair `(i, k)` with `i <= k`, if any.
    pub fn pair(&self, i: usize, k: usize) -> Option<&CoagPair> {
        let (i, k) = (i.min(k) as u32, i.max(k) as u32);
        self.pairs.iter().find(|p| p.i == i && p.k == k)
    }
}
