//! Measurements behind the suite checks. Each returns the raw quantity;
//! thresholds live with the suites.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decay::{
    amplitude_c_eps, amplitude_d_eps, conjugate_operator, weight_taylor_identity_check, BField, WeightFamily,
};
use crate::error::{Error, Result};
use crate::gauge::{gauge_transform, GaugeData};
use crate::grid::{Grid, GridFunction, MAX_DIM};
use crate::potential::PotentialSpec;
use crate::quantize::{mag_derivative, op_amplitude, op_ps, op_weyl, sobolev_norm, OperatorMatrix};
use crate::relativistic::{bessel_k, comparison_operator, BesselOrder};
use crate::spectral::{
    eig_hermitian, eigenvalues_general, idempotency_defect, projector_rank, riesz_projector, spectrum_mismatch,
    EigenDecomposition, DEFAULT_CONTOUR_NODES,
};
use crate::symbol::{HormanderSymbol, SymbolCatalog};
use crate::{CMatrix, CVector};

/// Relative tolerance grouping eigenvalues into one degenerate cluster.
pub const CLUSTER_TOLERANCE: f64 = 1e-6;

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |op_weyl(1) - I|`.
pub fn identity_reproduction(g: &GaugeData, grid: &Grid) -> Result<f64> {
    let op = op_weyl(&SymbolCatalog::p_s(grid.dim(), 0.0), g, grid)?;
    let n = grid.size();
    Ok(max_abs(&(op.entries() - CMatrix::identity(n, n))))
}

/// `max |op_weyl(1 + v) - diag(1 + v)|` for a bounded potential.
pub fn multiplication_exactness(v: &PotentialSpec, g: &GaugeData, grid: &Grid) -> Result<f64> {
    let d = grid.dim();
    let sym = SymbolCatalog::p_s(d, 0.0).with_potential(v.clone())?;
    let op = op_weyl(&sym, g, grid)?;
    let diag = CVector::from_fn(grid.size(), |j, _| {
        Complex64::new(1.0 + v.value(&grid.position(j)[..d]), 0.0)
    });
    Ok(max_abs(&(op.entries() - CMatrix::from_diagonal(&diag))))
}

/// `||op_weyl(a) - F* diag(a) F||_F / ||F* diag(a) F||_F` at zero field,
/// with the oracle summed directly from the DFT definition.
pub fn fft_oracle_residual(sym: &HormanderSymbol, grid: &Grid) -> Result<f64> {
    if !sym.is_core_x_independent() || sym.potential().is_some() {
        return Err(Error::NotApplicable(format!(
            "the DFT oracle needs an x-independent symbol, got `{}`",
            sym.id()
        )));
    }
    let d = grid.dim();
    let n1 = grid.points();
    let size = grid.size();
    let x0 = [0.0; MAX_DIM];
    let values: Vec<Complex64> = (0..size)
        .map(|q| sym.eval(&x0[..d], &grid.frequency_vector(q)[..d]))
        .collect();
    // H_{jk} = N^{-1} sum_q a(eta_q) e^{i eta_q (x_j - x_k)} depends on (j - k) mod n only.
    let column: Vec<Complex64> = (0..size)
        .into_par_iter()
        .map(|r| {
            let ri = grid.unflatten(r);
            let mut acc = Complex64::new(0.0, 0.0);
            for (q, a) in values.iter().enumerate() {
                let qi = grid.unflatten(q);
                let mut turns = 0.0;
                for ax in 0..d {
                    let k = qi[ax] as f64 - (n1 / 2) as f64;
                    turns += k * ri[ax] as f64 / n1 as f64;
                }
                acc += a * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * turns);
            }
            acc / size as f64
        })
        .collect();
    let oracle = CMatrix::from_fn(size, size, |j, k| {
        let (jj, kk) = (grid.unflatten(j), grid.unflatten(k));
        let mut r = [0usize; MAX_DIM];
        for ax in 0..d {
            r[ax] = (jj[ax] + n1 - kk[ax]) % n1;
        }
        column[grid.flatten(r)]
    });
    let op = op_weyl(sym, &GaugeData::free(d), grid)?;
    Ok((op.entries() - &oracle).norm() / oracle.norm())
}

/// `||P_1 P_{-1} - I||_F / sqrt(N)` at zero field.
pub fn ps_product_residual(grid: &Grid) -> Result<f64> {
    let g = GaugeData::free(grid.dim());
    let p = op_ps(1.0, &g, grid)?;
    let q = op_ps(-1.0, &g, grid)?;
    let n = grid.size();
    Ok((p.entries() * q.entries() - CMatrix::identity(n, n)).norm() / (n as f64).sqrt())
}

/// `max |E(a(mid)) - op_weyl(a)| / max |op_weyl(a)|`.
pub fn amplitude_consistency(sym: &HormanderSymbol, g: &GaugeData, grid: &Grid) -> Result<f64> {
    let weyl = op_weyl(sym, g, grid)?;
    let s = sym.clone();
    let amp = op_amplitude(
        move |x: &[f64], y: &[f64], eta: &[f64]| {
            let mut mid = [0.0; MAX_DIM];
            for a in 0..x.len() {
                mid[a] = 0.5 * (x[a] + y[a]);
            }
            s.eval(&mid[..x.len()], eta)
        },
        g,
        grid,
        false,
    )?;
    Ok(max_abs(&(amp.entries() - weyl.entries())) / max_abs(weyl.entries()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeCovariance {
    /// Relative mismatch of the sorted spectra of the two gauges.
    pub spectrum_mismatch: f64,
    /// `max_k ||U v_k - P'_k U v_k||` with `U = diag(e^{i chi})` and `P'_k`
    /// the projector onto the eigenvalue cluster of `v_k` in the new gauge.
    pub alignment_residual: f64,
}

/// `chi = x_1 x_2` in two dimensions and `x^2 / 2` in one.
pub fn test_gauge_function(x: &[f64]) -> f64 {
    if x.len() == 2 {
        x[0] * x[1]
    } else {
        0.5 * x[0] * x[0]
    }
}

/// Spectra and eigenvectors of `op_weyl(a, A)` against `op_weyl(a, A + grad chi)`.
pub fn gauge_covariance(sym: &HormanderSymbol, g: &GaugeData, grid: &Grid) -> Result<GaugeCovariance> {
    if !sym.is_real() {
        return Err(Error::NotApplicable(
            "gauge covariance is checked on real symbols".into(),
        ));
    }
    let d = grid.dim();
    let grad: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync> = Arc::new(|x: &[f64], out: &mut [f64]| {
        if x.len() == 2 {
            out[0] = x[1];
            out[1] = x[0];
        } else {
            out[0] = x[0];
        }
    });
    let moved = gauge_transform(g, test_gauge_function, Some(grad));
    let a = eig_hermitian(&op_weyl(sym, g, grid)?.hermitize())?;
    let b = eig_hermitian(&op_weyl(sym, &moved, grid)?.hermitize())?;
    let to_c = |v: &[f64]| v.iter().map(|&l| Complex64::new(l, 0.0)).collect::<Vec<_>>();
    let spectrum_mismatch = spectrum_mismatch(&to_c(&a.eigenvalues), &to_c(&b.eigenvalues));
    let u: Vec<Complex64> = (0..grid.size())
        .map(|j| Complex64::from_polar(1.0, test_gauge_function(&grid.position(j)[..d])))
        .collect();
    let n = grid.size();
    let alignment_residual = (0..n)
        .into_par_iter()
        .map(|k| {
            let lam = a.eigenvalues[k];
            let tol = CLUSTER_TOLERANCE * lam.abs().max(1.0);
            let w = CVector::from_fn(n, |j, _| u[j] * a.eigenvectors[(j, k)]);
            let mut rest = w.clone();
            for (i, &mu) in b.eigenvalues.iter().enumerate() {
                if (mu - lam).abs() <= tol {
                    let col = b.eigenvectors.column(i);
                    let c = col.dotc(&w);
                    rest -= col * c;
                }
            }
            rest.norm()
        })
        .reduce(|| 0.0, f64::max);
    Ok(GaugeCovariance {
        spectrum_mismatch,
        alignment_residual,
    })
}

/// `[min, max]` of `sobolev_norm(u, 1) / (||u|| + ||H u||)` over the node
/// basis.
pub fn graph_norm_interval(h: &OperatorMatrix, g: &GaugeData) -> Result<(f64, f64)> {
    let grid = *h.grid();
    let n = grid.size();
    let ratios: Result<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let u = GridFunction::new(
                grid,
                DVector::from_fn(n, |i, _| Complex64::new((i == j) as u8 as f64, 0.0)),
            )?;
            let hu = h.apply(&u)?;
            Ok(sobolev_norm(&u, 1.0, g)? / (u.l2_norm() + hu.l2_norm()))
        })
        .collect();
    Ok(interval(&ratios?))
}

/// `[min, max]` of `sobolev_norm(u, 1)^2 / (||u||^2 + ||(D - A) u||^2)` over
/// the node basis, in one dimension.
pub fn sobolev_characterization_interval(g: &GaugeData, grid: &Grid) -> Result<(f64, f64)> {
    if grid.dim() != 1 {
        return Err(Error::NotApplicable(
            "the first-order characterization is checked in d = 1".into(),
        ));
    }
    let n = grid.size();
    let ratios: Result<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let u = GridFunction::new(
                *grid,
                DVector::from_fn(n, |i, _| Complex64::new((i == j) as u8 as f64, 0.0)),
            )?;
            let du = mag_derivative(&[1], &u, g)?;
            let s = sobolev_norm(&u, 1.0, g)?;
            Ok(s * s / (u.l2_norm().powi(2) + du.l2_norm().powi(2)))
        })
        .collect();
    Ok(interval(&ratios?))
}

fn interval(v: &[f64]) -> (f64, f64) {
    (
        v.iter().copied().fold(f64::INFINITY, f64::min),
        v.iter().copied().fold(0.0, f64::max),
    )
}

/// `|kappa' / kappa - 1|` for the spreads `kappa = c2 / c1` of two intervals.
pub fn spread_drift(coarse: (f64, f64), fine: (f64, f64)) -> f64 {
    ((fine.1 / fine.0) / (coarse.1 / coarse.0) - 1.0).abs()
}

/// Seeded pairs `(x, y)` uniform in `[-radius, radius]^d`.
pub fn random_pairs(seed: u64, count: usize, d: usize, radius: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut ChaCha8Rng| {
        (0..d)
            .map(|_| radius * (2.0 * rng.random::<f64>() - 1.0))
            .collect::<Vec<_>>()
    };
    (0..count)
        .map(|_| {
            let x = point(&mut rng);
            let y = point(&mut rng);
            (x, y)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightIdentityReport {
    /// Worst scaled residual of the weight-ratio identity over pairs and eps.
    pub taylor_residual: f64,
    /// `max |b_eps(x, y)|`.
    pub b_max: f64,
    /// Pairs with `|b_eps| > 1`.
    pub b_violations: usize,
}

pub fn weight_identity_check(
    w: &WeightFamily,
    eps_list: &[f64],
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> WeightIdentityReport {
    let mut taylor_residual = 0.0f64;
    let mut b_max = 0.0f64;
    let mut b_violations = 0;
    for &eps in eps_list {
        taylor_residual = taylor_residual.max(weight_taylor_identity_check(w, eps, pairs));
        let b = BField::new(eps);
        for (x, y) in pairs {
            let v = b.eval(x, y);
            let norm = v[..x.len()].iter().map(|c| c * c).sum::<f64>().sqrt();
            b_max = b_max.max(norm);
            if norm > 1.0 {
                b_violations += 1;
            }
        }
    }
    WeightIdentityReport {
        taylor_residual,
        b_max,
        b_violations,
    }
}

/// `||F op_weyl(a) F^{-1} - E(c_eps)||_F / ||op_weyl(a)||_F` for the
/// exponential weight.
pub fn conjugation_match(sym: &HormanderSymbol, g: &GaugeData, grid: &Grid, eps: f64) -> Result<f64> {
    let op = op_weyl(sym, g, grid)?;
    let conj = conjugate_operator(&op, &WeightFamily::exponential(), eps)?;
    let c = op_amplitude(amplitude_c_eps(sym, eps)?, g, grid, false)?;
    Ok((conj.entries() - c.entries()).norm() / op.entries().norm())
}

/// `||E(c_eps) - op_weyl(a) - eps E(d_eps)||_F / ||op_weyl(a)||_F`.
pub fn taylor_operator_identity(sym: &HormanderSymbol, g: &GaugeData, grid: &Grid, eps: f64) -> Result<f64> {
    let op = op_weyl(sym, g, grid)?;
    let c = op_amplitude(amplitude_c_eps(sym, eps)?, g, grid, false)?;
    let d = op_amplitude(amplitude_d_eps(sym, eps)?, g, grid, false)?;
    let diff = c.entries() - op.entries() - d.entries() * Complex64::new(eps, 0.0);
    Ok(diff.norm() / op.entries().norm())
}

/// Relative mismatch between the spectrum of `H` and the general
/// eigenvalues of `F H F^{-1}`.
pub fn similarity_mismatch(h: &OperatorMatrix, dec: &EigenDecomposition, w: &WeightFamily, eps: f64) -> Result<f64> {
    let conj = conjugate_operator(h, w, eps)?;
    let general = eigenvalues_general(conj.entries())?;
    let reference: Vec<Complex64> = dec.eigenvalues.iter().map(|&l| Complex64::new(l, 0.0)).collect();
    Ok(spectrum_mismatch(&reference, &general))
}

/// Eigenvalues within [`CLUSTER_TOLERANCE`] of `ev[k]`, and the distance
/// from the cluster to the rest of the spectrum.
pub fn cluster(ev: &[f64], k: usize) -> (Vec<usize>, f64) {
    let lam = ev[k];
    let tol = CLUSTER_TOLERANCE * lam.abs().max(1.0);
    let members: Vec<usize> = (0..ev.len()).filter(|&i| (ev[i] - lam).abs() <= tol).collect();
    let gap = ev
        .iter()
        .enumerate()
        .filter(|(i, _)| !members.contains(i))
        .map(|(_, &mu)| (mu - lam).abs())
        .fold(f64::INFINITY, f64::min);
    (members, gap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectorReport {
    pub eigenvalue: f64,
    pub radius: f64,
    pub idempotency_defect: f64,
    pub rank: usize,
    pub multiplicity: usize,
}

/// Riesz projector of `F H F^{-1}` around the cluster of eigenvalue `k` of `H`.
pub fn conjugated_projector(
    h: &OperatorMatrix,
    dec: &EigenDecomposition,
    k: usize,
    w: &WeightFamily,
    eps: f64,
) -> Result<ProjectorReport> {
    let (members, gap) = cluster(&dec.eigenvalues, k);
    if !gap.is_finite() {
        return Err(Error::NotApplicable("the spectrum is a single cluster".into()));
    }
    let centre = members.iter().map(|&i| dec.eigenvalues[i]).sum::<f64>() / members.len() as f64;
    let radius = 0.5 * gap;
    let conj = conjugate_operator(h, w, eps)?;
    let p = riesz_projector(conj.entries(), centre, radius, DEFAULT_CONTOUR_NODES)?;
    Ok(ProjectorReport {
        eigenvalue: centre,
        radius,
        idempotency_defect: idempotency_defect(&p),
        rank: projector_rank(&p),
        multiplicity: members.len(),
    })
}

/// `max |K_{nu+1} - K_{nu-1} - (2 nu / z) K_nu| / K_{nu+1}` on `z` in
/// `[0.1, 20]`.
pub fn bessel_recurrence_residual(nu: BesselOrder, samples: usize) -> Result<f64> {
    let v = nu.value();
    let below = BesselOrder::new((v - 1.0).abs())?;
    let above = BesselOrder::new(v + 1.0)?;
    let mut worst = 0.0f64;
    for i in 0..samples {
        let z = 0.1 + 19.9 * i as f64 / (samples - 1).max(1) as f64;
        let kp = bessel_k(above, z)?;
        let r = kp - bessel_k(below, z)? - 2.0 * v / z * bessel_k(nu, z)?;
        worst = worst.max(r.abs() / kp);
    }
    Ok(worst)
}

/// `max(0, -min entry) / max entry` of `exp(-t H(0, -V_-))`.
pub fn comparison_negativity(v: &PotentialSpec, grid: &Grid, t: f64) -> Result<f64> {
    let e = eig_hermitian(&comparison_operator(v, grid)?)?.exp_neg(t);
    let max = e.iter().map(|z| z.re).fold(0.0, f64::max);
    let min = e.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    Ok((-min).max(0.0) / max)
}
