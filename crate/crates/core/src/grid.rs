//! Uniform cell-centered grids on axis-aligned boxes, with the exterior-zero
//! convention: a field is defined by one value per node and is identically 0
//! outside the box, so the nonlocal tail acts as absorption.

use crate::error::{Error, Result};

/// Uniform grid on a box in dimension 1 or 2.
///
/// Nodes are cell centers, `x_i = lo + (i + 1/2) h` per axis, so every node is
/// strictly inside the box and the cells tile it exactly. Spacing is the same
/// on both axes in 2-D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dimension: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    shape: [usize; 2],
    h: f64,
    far_cutoff: f64,
}

impl Grid {
    /// 1-D grid with `n` cells on `(lo, hi)`.
    pub fn line(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::param("grid", format!("need finite lo < hi, got ({lo}, {hi})")));
        }
        if n == 0 {
            return Err(Error::param("grid.n", "at least one cell required"));
        }
        let h = (hi - lo) / n as f64;
        Ok(Self {
            dimension: 1,
            lo: [lo, 0.0],
            hi: [hi, 0.0],
            shape: [n, 1],
            h,
            far_cutoff: (hi - lo) + 2.0,
        })
    }

    /// 2-D grid with `nx` by `ny` cells; spacing must be uniform across axes.
    pub fn rect(lo: (f64, f64), hi: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        if !(lo.0 < hi.0 && lo.1 < hi.1) {
            return Err(Error::param("grid", format!("need lo < hi per axis, got {lo:?}, {hi:?}")));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::param("grid.n", "at least one cell per axis required"));
        }
        let hx = (hi.0 - lo.0) / nx as f64;
        let hy = (hi.1 - lo.1) / ny as f64;
        if (hx - hy).abs() > 1e-12 * hx.max(hy) {
            return Err(Error::param(
                "grid",
                format!("spacing must match across axes, got hx = {hx}, hy = {hy}"),
            ));
        }
        let diam = ((hi.0 - lo.0).powi(2) + (hi.1 - lo.1).powi(2)).sqrt();
        Ok(Self {
            dimension: 2,
            lo: [lo.0, lo.1],
            hi: [hi.0, hi.1],
            shape: [nx, ny],
            h: hx,
            far_cutoff: diam + 2.0,
        })
    }

    /// Overrides the far-field cutoff radius used by numeric tail quadrature;
    /// clamped from below to diam(Ω) + 2 so the cutoff never undercuts the
    /// domain itself.
    pub fn with_far_cutoff(mut self, r_far: f64) -> Self {
        self.far_cutoff = r_far.max(self.diameter() + 2.0);
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Cell measure h^n.
    pub fn cell_measure(&self) -> f64 {
        self.h.powi(self.dimension as i32)
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.shape[0], self.shape[1])
    }

    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        (self.lo, self.hi)
    }

    pub fn diameter(&self) -> f64 {
        match self.dimension {
            1 => self.hi[0] - self.lo[0],
            _ => {
                ((self.hi[0] - self.lo[0]).powi(2) + (self.hi[1] - self.lo[1]).powi(2)).sqrt()
            }
        }
    }

    pub fn far_cutoff(&self) -> f64 {
        self.far_cutoff
    }

    /// Axis indices of node `i` (row-major, x fastest).
    pub fn axis_indices(&self, i: usize) -> (usize, usize) {
        (i % self.shape[0], i / self.shape[0])
    }

    pub fn flat_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.shape[0] + ix
    }

    /// Coordinates of node `i`; the second entry is 0 in 1-D.
    pub fn node(&self, i: usize) -> [f64; 2] {
        let (ix, iy) = self.axis_indices(i);
        [
            self.lo[0] + (ix as f64 + 0.5) * self.h,
            if self.dimension == 2 { self.lo[1] + (iy as f64 + 0.5) * self.h } else { 0.0 },
        ]
    }

    /// Number of whole cells between node `i` and the nearest box face,
    /// minimized over axes: the largest symmetric cell-aligned window around
    /// `i` that stays inside the box.
    pub fn cells_to_boundary(&self, i: usize) -> usize {
        let (ix, iy) = self.axis_indices(i);
        let mut m = ix.min(self.shape[0] - 1 - ix);
        if self.dimension == 2 {
            m = m.min(iy.min(self.shape[1] - 1 - iy));
        }
        m
    }

    /// Euclidean distance between nodes `i` and `j`.
    pub fn node_distance(&self, i: usize, j: usize) -> f64 {
        let a = self.node(i);
        let b = self.node(j);
        if self.dimension == 1 {
            (a[0] - b[0]).abs()
        } else {
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
        }
    }

    /// Stable parameter string used in run metadata and hashes.
    pub fn descriptor(&self) -> String {
        match self.dimension {
            1 => format!("line(lo={:?},hi={:?},n={})", self.lo[0], self.hi[0], self.shape[0]),
            _ => format!(
                "rect(lo=({:?},{:?}),hi=({:?},{:?}),n=({},{}))",
                self.lo[0], self.lo[1], self.hi[0], self.hi[1], self.shape[0], self.shape[1]
            ),
        }
    }
}

/// Nodal values on a [`Grid`], implicitly zero outside the box.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "field of length {} on grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::param("field", format!("non-finite value {bad}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    /// Builds a field by evaluating `f` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values: Vec<f64> = (0..grid.len())
            .map(|i| {
                let p = grid.node(i);
                f(&p[..grid.dimension()])
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// ∞-distance to another field on the same grid.
    pub fn inf_distance(&self, other: &Field) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch("fields live on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs())))
    }

    /// Applies `f` to every value in place.
    pub fn map_in_place(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.values {
            *v = f(*v);
        }
    }
}
