//! The heat kernel of `sqrt(1 - Delta)` and its semigroup diagnostics.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bessel::{bessel_k, BesselOrder};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::symbol::japanese;

/// `p_t(x) = (2 pi)^{-(d+1)/2} 2t (|x|^2 + t^2)^{-(d+1)/4} K_{(d+1)/2}(sqrt(|x|^2 + t^2))`,
/// the kernel of `exp(-t sqrt(1 - Delta))`; `int p_t = e^{-t}`.
pub fn kernel_pt(t: f64, x: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("kernel time must be positive, got {t}")));
    }
    let d = x.len();
    let rho2 = x.iter().map(|v| v * v).sum::<f64>() + t * t;
    let rho = rho2.sqrt();
    let a = (d as f64 + 1.0) / 2.0;
    let k = bessel_k(BesselOrder::for_dimension(d), rho)?;
    Ok((2.0 * PI).powf(-a) * 2.0 * t * rho2.powf(-a / 2.0) * k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupReport {
    /// `max |(p_t * p_s - p_{t+s})(x_j)| / p_{t+s}(x_j)` over `|x_j| <= L/2`.
    pub convolution_residual: f64,
    /// `max |h^d sum_j p_t(x_j) e^{-i x_j eta} - e^{-t <eta>}|` over `|eta| <= eta_N / 4`.
    pub fourier_residual: f64,
    /// The same difference at `eta = 0`.
    pub fourier_residual_at_zero: f64,
    /// `|h^d sum_j p_t(x_j) - e^{-t}|`.
    pub normalization_residual: f64,
}

fn sampled_kernel(t: f64, grid: &Grid) -> Result<Vec<f64>> {
    let d = grid.dim();
    (0..grid.size())
        .into_par_iter()
        .map(|j| kernel_pt(t, &grid.position(j)[..d]))
        .collect()
}

/// Convolution, Fourier and normalization residuals of the sampled kernel.
pub fn semigroup_checks(t: f64, s: f64, grid: &Grid) -> Result<SemigroupReport> {
    if !(t > 0.0 && s > 0.0) {
        return Err(Error::Domain(format!(
            "semigroup times must be positive, got {t} and {s}"
        )));
    }
    let d = grid.dim();
    let n = grid.size();
    let cell = grid.cell_volume();
    let pt = sampled_kernel(t, grid)?;
    let ps = sampled_kernel(s, grid)?;
    let l = grid.half_length();

    let convolution_residual = (0..n)
        .into_par_iter()
        .filter(|&j| {
            let x = grid.position(j);
            x[..d].iter().map(|v| v * v).sum::<f64>().sqrt() <= 0.5 * l
        })
        .map(|j| -> Result<f64> {
            let x = grid.position(j);
            let mut acc = 0.0;
            let mut diff = [0.0; 2];
            for (k, &psk) in ps.iter().enumerate() {
                let y = grid.position(k);
                for a in 0..d {
                    diff[a] = x[a] - y[a];
                }
                acc += kernel_pt(t, &diff[..d])? * psk;
            }
            let exact = kernel_pt(t + s, &x[..d])?;
            Ok((acc * cell - exact).abs() / exact)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;

    let total: f64 = pt.iter().sum::<f64>() * cell;
    let normalization_residual = (total - (-t).exp()).abs();

    let cutoff = 0.25 * grid.nyquist();
    let fourier: Vec<(bool, f64)> = (0..n)
        .into_par_iter()
        .filter(|&q| {
            let eta = grid.frequency_vector(q);
            eta[..d].iter().map(|v| v * v).sum::<f64>().sqrt() <= cutoff
        })
        .map(|q| {
            let eta = grid.frequency_vector(q);
            let mut acc = num_complex::Complex64::new(0.0, 0.0);
            for (j, &p) in pt.iter().enumerate() {
                let x = grid.position(j);
                let phase: f64 = (0..d).map(|a| x[a] * eta[a]).sum();
                acc += num_complex::Complex64::from_polar(p, -phase);
            }
            let is_zero = eta[..d].iter().all(|&e| e == 0.0);
            (is_zero, (acc * cell - (-t * japanese(&eta[..d])).exp()).norm())
        })
        .collect();
    let fourier_residual = fourier.iter().map(|f| f.1).fold(0.0, f64::max);
    let fourier_residual_at_zero = fourier.iter().find(|f| f.0).map_or(f64::NAN, |f| f.1);

    Ok(SemigroupReport {
        convolution_residual,
        fourier_residual,
        fourier_residual_at_zero,
        normalization_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_value_at_the_origin() {
        // The kernel display carries an extra factor e^t; without it the
        // value at t = 1, x = 0 is K_1(1) / pi.
        let p = kernel_pt(1.0, &[0.0]).unwrap();
        assert!((p - 0.601_907_230_197_234_6 / PI).abs() < 1e-12);
        assert!((p * 1.0f64.exp() - 0.52081).abs() < 1e-5);
    }

    #[test]
    fn symmetric_and_nonnegative() {
        for x in [0.3, 1.7, 12.0] {
            assert_eq!(kernel_pt(0.5, &[x]).unwrap(), kernel_pt(0.5, &[-x]).unwrap());
            assert_eq!(kernel_pt(0.5, &[x, -x]).unwrap(), kernel_pt(0.5, &[-x, x]).unwrap());
            assert!(kernel_pt(0.5, &[x, 1.0]).unwrap() > 0.0);
        }
        assert!(kernel_pt(0.0, &[1.0]).is_err());
    }

    #[test]
    fn two_dimensional_kernel_is_the_poisson_type_closed_form() {
        // K_{3/2}(r) = sqrt(pi / 2r) e^{-r} (1 + 1/r) gives
        // p_t(x) = t e^{-r} (1 + r) / (2 pi r^3).
        let (t, x): (f64, [f64; 2]) = (0.7, [0.4, -1.1]);
        let r = (x[0] * x[0] + x[1] * x[1] + t * t).sqrt();
        let expected = t * (-r).exp() * (1.0 + r) / (2.0 * PI * r.powi(3));
        assert!((kernel_pt(t, &x).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn normalization_and_fourier_at_zero() {
        let grid = Grid::new(1, 40.0, 2048).unwrap();
        let rep = semigroup_checks(1.0, 1.0, &grid).unwrap();
        assert!(rep.normalization_residual < 1e-5);
        assert!((rep.fourier_residual_at_zero - rep.normalization_residual).abs() < 1e-15);
        assert!(rep.fourier_residual < 1e-5);
    }

    #[test]
    fn convolution_residual_decreases_under_refinement() {
        let coarse = semigroup_checks(1.0, 1.0, &Grid::new(1, 40.0, 128).unwrap()).unwrap();
        let fine = semigroup_checks(1.0, 1.0, &Grid::new(1, 40.0, 256).unwrap()).unwrap();
        assert!(fine.convolution_residual < coarse.convolution_residual);
        assert!(fine.convolution_residual < 1e-6);
    }
}
