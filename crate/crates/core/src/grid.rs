//! Uniform cell-centred grids on rectangles with zero-flux boundaries.
//!
//! Cells are stored x-fastest: index `i + nx * j`. Every divergence operator
//! is assembled from face fluxes with zero flux on boundary faces, so it sums
//! to zero over the domain up to roundoff.

use std::ops::{Deref, DerefMut};

use thiserror::Error;

use crate::kinetics::Kinetics;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("dimension must be 1 or 2, got {0}")]
    Dimension(usize),
    #[error("expected {expected} entries per axis list, got {got}")]
    AxisCount { expected: usize, got: usize },
    #[error("axis {axis}: need at least 4 cells, got {cells}")]
    TooFewCells { axis: usize, cells: usize },
    #[error("axis {axis}: length must be positive and finite, got {length}")]
    Length { axis: usize, length: f64 },
}

pub const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    lengths: [f64; 2],
    cells: [usize; 2],
    h: [f64; 2],
}

impl Grid {
    pub fn build(dim: usize, lengths: &[f64], cells: &[usize]) -> Result<Self, GridError> {
        if !(1..=2).contains(&dim) {
            return Err(GridError::Dimension(dim));
        }
        if lengths.len() != dim {
            return Err(GridError::AxisCount {
                expected: dim,
                got: lengths.len(),
            });
        }
        if cells.len() != dim {
            return Err(GridError::AxisCount {
                expected: dim,
                got: cells.len(),
            });
        }
        let mut g = Grid {
            dim,
            lengths: [1.0; 2],
            cells: [1; 2],
            h: [1.0; 2],
        };
        for axis in 0..dim {
            if !(lengths[axis] > 0.0 && lengths[axis].is_finite()) {
                return Err(GridError::Length {
                    axis,
                    length: lengths[axis],
                });
            }
            if cells[axis] < MIN_CELLS {
                return Err(GridError::TooFewCells {
                    axis,
                    cells: cells[axis],
                });
            }
            g.lengths[axis] = lengths[axis];
            g.cells[axis] = cells[axis];
            g.h[axis] = lengths[axis] / cells[axis] as f64;
        }
        Ok(g)
    }

    pub fn line(length: f64, cells: usize) -> Result<Self, GridError> {
        Self::build(1, &[length], &[cells])
    }

    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self, GridError> {
        Self::build(2, &[lx, ly], &[nx, ny])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn h(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().iter().product()
    }

    /// `|Omega|`.
    pub fn volume(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// Cell-centre coordinates; the second entry is 0 in 1D.
    pub fn center(&self, index: usize) -> [f64; 2] {
        let i = index % self.cells[0];
        let j = index / self.cells[0];
        let x = (i as f64 + 0.5) * self.h[0];
        let y = if self.dim == 2 {
            (j as f64 + 0.5) * self.h[1]
        } else {
            0.0
        };
        [x, y]
    }

    /// Field sampled at cell centres.
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, func: F) -> Field {
        Field(
            (0..self.len())
                .map(|k| {
                    let [x, y] = self.center(k);
                    func(x, y)
                })
                .collect(),
        )
    }

    pub fn constant(&self, value: f64) -> Field {
        Field(vec![value; self.len()])
    }

    /// Midpoint-rule integral; cells are summed in storage order.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        self.cell_volume() * f.iter().sum::<f64>()
    }

    pub fn laplacian_neumann(&self, f: &[f64]) -> Field {
        let mut out = vec![0.0; self.len()];
        self.laplacian_into(f, &mut out);
        Field(out)
    }

    pub(crate) fn laplacian_into(&self, f: &[f64], out: &mut [f64]) {
        debug_assert_eq!(f.len(), self.len());
        out.fill(0.0);
        self.for_each_face(|axis, l, r| {
            (f[r] - f[l]) / self.h[axis]
        }, out);
    }

    /// `div(D(u) grad u)` with arithmetic-mean face diffusivity.
    pub fn diffusive_divergence(&self, u: &[f64], k: &Kinetics) -> Field {
        let mut out = vec![0.0; self.len()];
        let mut d = vec![0.0; self.len()];
        self.diffusive_into(u, k, &mut d, &mut out);
        Field(out)
    }

    pub(crate) fn diffusive_into(&self, u: &[f64], k: &Kinetics, d: &mut [f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.len());
        for (di, &ui) in d.iter_mut().zip(u) {
            *di = k.diffusivity(ui);
        }
        out.fill(0.0);
        self.for_each_face(|axis, l, r| {
            let d_face = 0.5 * (d[l] + d[r]);
            d_face * (u[r] - u[l]) / self.h[axis]
        }, out);
    }

    /// `div(S(u) grad v)` with `S` evaluated in the donor (upwind) cell.
    pub fn chemotactic_divergence(&self, u: &[f64], v: &[f64], k: &Kinetics) -> Field {
        let mut out = vec![0.0; self.len()];
        self.chemotactic_into(u, v, k, &mut out);
        Field(out)
    }

    pub(crate) fn chemotactic_into(&self, u: &[f64], v: &[f64], k: &Kinetics, out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.len());
        debug_assert_eq!(v.len(), self.len());
        out.fill(0.0);
        self.for_each_face(|axis, l, r| {
            let g = (v[r] - v[l]) / self.h[axis];
            let donor = if g > 0.0 { l } else { r };
            k.sensitivity(u[donor]) * g
        }, out);
    }

    /// Visits each interior face `(axis, left, right)` once. The closure returns
    /// the normal component of `F` on that face (pointing from `left` to
    /// `right`) and `div F` is accumulated into `out`. Boundary faces carry
    /// zero, which is the Neumann condition.
    #[inline]
    fn for_each_face<F: FnMut(usize, usize, usize) -> f64>(&self, mut flux: F, out: &mut [f64]) {
        let nx = self.cells[0];
        let ny = self.cells[1];
        for axis in 0..self.dim {
            let h = self.h[axis];
            let stride = if axis == 0 { 1 } else { nx };
            for j in 0..ny {
                for i in 0..nx {
                    let (along, extent) = if axis == 0 { (i, nx) } else { (j, ny) };
                    if along + 1 == extent {
                        continue;
                    }
                    let l = i + nx * j;
                    let r = l + stride;
                    let q = flux(axis, l, r) / h;
                    out[l] += q;
                    out[r] -= q;
                }
            }
        }
    }

    /// Cell-centred `|grad v|^2` with face gradients averaged onto cells
    /// (boundary faces contribute zero).
    pub fn gradient_magnitude_sq(&self, v: &[f64]) -> Vec<f64> {
        let nx = self.cells[0];
        let ny = self.cells[1];
        let mut out = vec![0.0; self.len()];
        for axis in 0..self.dim {
            let h = self.h[axis];
            let stride = if axis == 0 { 1 } else { nx };
            for j in 0..ny {
                for i in 0..nx {
                    let (along, extent) = if axis == 0 { (i, nx) } else { (j, ny) };
                    let c = i + nx * j;
                    let fwd = if along + 1 < extent { (v[c + stride] - v[c]) / h } else { 0.0 };
                    let back = if along > 0 { (v[c] - v[c - stride]) / h } else { 0.0 };
                    let g = 0.5 * (fwd + back);
                    out[c] += g * g;
                }
            }
        }
        out
    }
}

/// Cell averages on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Deref for Field {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}
