//! Truncated periodic grids and functions sampled on them.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported grid dimension.
pub const MAX_DIM: usize = 2;

/// A tensor-product grid on the box [-L, L)^d with `n` points per axis.
///
/// Nodes are `x_j = -L + j h` with `h = 2L / n`; the dual lattice is
/// `eta_k = (pi / L) k` for `k` in `[-n/2, n/2)`. Multi-indices are flattened
/// row-major, so the last axis is contiguous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_length: f64,
    points: usize,
}

impl Grid {
    pub fn new(dim: usize, half_length: f64, points: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Parameter(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::Parameter(format!(
                "half-length must be positive, got {half_length}"
            )));
        }
        if points < 2 || points % 2 != 0 {
            return Err(Error::Parameter(format!(
                "points per axis must be even and >= 2, got {points}"
            )));
        }
        Ok(Self {
            dim,
            half_length,
            points,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Node spacing `h`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.points as f64
    }

    /// Total number of nodes, `n^d`.
    pub fn size(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    /// Quadrature weight of one cell, `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn node(&self, j: usize) -> f64 {
        -self.half_length + j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.node(j)).collect()
    }

    /// Dual frequency for storage index `q` in `0..n`, with `q` ordered from
    /// `k = -n/2` upwards.
    pub fn frequency(&self, q: usize) -> f64 {
        PI / self.half_length * (q as f64 - (self.points / 2) as f64)
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.points).map(|q| self.frequency(q)).collect()
    }

    /// Largest resolved frequency `pi n / (2L)`.
    pub fn nyquist(&self) -> f64 {
        PI * self.points as f64 / (2.0 * self.half_length)
    }

    /// Per-axis indices of a flat node index.
    pub fn unflatten(&self, flat: usize) -> [usize; MAX_DIM] {
        let n = self.points;
        match self.dim {
            1 => [flat, 0],
            _ => [flat / n, flat % n],
        }
    }

    pub fn flatten(&self, idx: [usize; MAX_DIM]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] * self.points + idx[1],
        }
    }

    /// Coordinates of a flat node index; only the first `dim` entries are used.
    pub fn position(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.unflatten(flat);
        let mut p = [0.0; MAX_DIM];
        for a in 0..self.dim {
            p[a] = self.node(idx[a]);
        }
        p
    }

    /// Frequency vector of a flat dual index.
    pub fn frequency_vector(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.unflatten(flat);
        let mut p = [0.0; MAX_DIM];
        for a in 0..self.dim {
            p[a] = self.frequency(idx[a]);
        }
        p
    }

    /// Same box, different resolution.
    pub fn with_points(&self, points: usize) -> Result<Self> {
        Self::new(self.dim, self.half_length, points)
    }

    /// Minimum-image displacement on the torus of period 2L.
    pub fn wrap(&self, z: f64) -> f64 {
        let period = 2.0 * self.half_length;
        z - period * (z / period).round()
    }
}

/// Complex samples of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: DVector<Complex64>,
    grid: Grid,
}

impl GridFunction {
    pub fn new(grid: Grid, values: DVector<Complex64>) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(Error::DimensionMismatch {
                expected: grid.size(),
                found: values.len(),
            });
        }
        Ok(Self { values, grid })
    }

    pub fn from_fn<F: FnMut(&[f64]) -> Complex64>(grid: Grid, mut f: F) -> Self {
        let d = grid.dim();
        let values = DVector::from_fn(grid.size(), |j, _| f(&grid.position(j)[..d]));
        Self { values, grid }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            values: DVector::zeros(grid.size()),
            grid,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &DVector<Complex64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<Complex64> {
        self.values
    }

    /// Discrete L^2 norm, `h^{d/2}` times the Euclidean norm.
    pub fn l2_norm(&self) -> f64 {
        self.grid.cell_volume().sqrt() * self.values.norm()
    }

    /// Rescaled to unit discrete L^2 norm. Zero stays zero.
    pub fn normalized(&self) -> Self {
        let norm = self.l2_norm();
        if norm == 0.0 {
            return self.clone();
        }
        Self {
            values: self.values.unscale(norm),
            grid: self.grid,
        }
    }
}
