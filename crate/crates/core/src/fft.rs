//! Unnormalized 1-d and 2-d DFTs on the grid's storage order.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

/// Forward and inverse transforms of size `n` along each axis.
///
/// Storage index `q` corresponds to the integer frequency `q` for `q < n/2`
/// and `q - n` otherwise, the usual FFT layout.
#[derive(Clone)]
pub(crate) struct SpectralPlan {
    n: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl SpectralPlan {
    pub(crate) fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.points();
        Self {
            n,
            dim: grid.dim(),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// `sum_q buf[q] e^{-2 pi i j q / n}` along every axis.
    pub(crate) fn forward(&self, buf: &mut [Complex64]) {
        self.apply(&self.forward, buf);
    }

    /// `sum_q buf[q] e^{+2 pi i j q / n}` along every axis.
    pub(crate) fn inverse(&self, buf: &mut [Complex64]) {
        self.apply(&self.inverse, buf);
    }

    /// Forward transform along one axis only.
    pub(crate) fn forward_axis(&self, buf: &mut [Complex64], axis: usize) {
        self.apply_axis(&self.forward, buf, axis);
    }

    /// Inverse transform along one axis only.
    pub(crate) fn inverse_axis(&self, buf: &mut [Complex64], axis: usize) {
        self.apply_axis(&self.inverse, buf, axis);
    }

    fn apply(&self, plan: &Arc<dyn Fft<f64>>, buf: &mut [Complex64]) {
        for axis in 0..self.dim {
            self.apply_axis(plan, buf, axis);
        }
    }

    fn apply_axis(&self, plan: &Arc<dyn Fft<f64>>, buf: &mut [Complex64], axis: usize) {
        let n = self.n;
        debug_assert_eq!(buf.len(), n.pow(self.dim as u32));
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        if axis + 1 == self.dim {
            // The last axis is contiguous.
            for row in buf.chunks_exact_mut(n) {
                plan.process_with_scratch(row, &mut scratch);
            }
        } else {
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for c in 0..n {
                for r in 0..n {
                    col[r] = buf[r * n + c];
                }
                plan.process_with_scratch(&mut col, &mut scratch);
                for r in 0..n {
                    buf[r * n + c] = col[r];
                }
            }
        }
    }

    /// Integer frequency of FFT storage index `q`.
    pub(crate) fn wavenumber(&self, q: usize) -> i64 {
        if q < self.n / 2 {
            q as i64
        } else {
            q as i64 - self.n as i64
        }
    }
}
