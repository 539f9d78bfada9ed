//! The relativistic Schrödinger operator `sqrt(1 + (D - A)^2) + V`: form
//! sums, the diamagnetic comparison and pointwise eigenfunction bounds.

mod bessel;
mod kato;
mod kernel;

pub use bessel::{bessel_k, BesselOrder};
pub use kato::{kato_estimate, kato_limit_scan, KatoScan, KATO_CELL_ORDER, KATO_TIME_ORDER};
pub use kernel::{kernel_pt, semigroup_checks, SemigroupReport};

use log::warn;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decay::WeightFamily;
use crate::error::{Error, Result};
use crate::gauge::GaugeData;
use crate::grid::{Grid, GridFunction};
use crate::potential::PotentialSpec;
use crate::quantize::{op_weyl, OperatorMatrix};
use crate::spectral::eig_hermitian;
use crate::symbol::SymbolCatalog;
use crate::{CMatrix, CVector};

/// Form bound of `V_-` against the free operator above which a warning is
/// attached to a form sum.
pub const FORM_BOUND_WARNING: f64 = 0.9;

/// Entrywise tolerance for positivity of the comparison semigroup.
pub const POSITIVITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct FormSum {
    pub operator: OperatorMatrix,
    /// `max <u, V_- u> / <u, H_A u>` over the grid space.
    pub form_bound: f64,
    pub warning: Option<String>,
}

/// `op_weyl(<eta>, A) + diag(V_+ - V_-)`, hermitized.
pub fn build_form_sum(g: &GaugeData, v: &PotentialSpec, grid: &Grid) -> Result<FormSum> {
    let free = op_weyl(&SymbolCatalog::relativistic(grid.dim()), g, grid)?.hermitize();
    let (plus, minus) = v.node_values(grid)?;
    let diag: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| p - m).collect();
    let operator = free.add_diagonal(&diag, &format!("+{}", v.id()))?;
    let form_bound = if minus.iter().all(|&m| m == 0.0) {
        0.0
    } else {
        relative_form_bound(&free, &minus)?
    };
    let warning = (form_bound > FORM_BOUND_WARNING).then(|| {
        let msg = format!(
            "attractive part `{}` has form bound {form_bound:.3} > {FORM_BOUND_WARNING} against the free operator",
            v.id()
        );
        warn!("{msg}");
        msg
    });
    Ok(FormSum {
        operator,
        form_bound,
        warning,
    })
}

/// Largest eigenvalue of `H^{-1/2} diag(w) H^{-1/2}` for positive definite `H`.
fn relative_form_bound(h: &OperatorMatrix, w: &[f64]) -> Result<f64> {
    let dec = eig_hermitian(h)?;
    if dec.eigenvalues[0] <= 0.0 {
        return Err(Error::Domain("free operator is not positive definite".into()));
    }
    let inv_sqrt = dec.function_of(|l| Complex64::new(l.powf(-0.5), 0.0));
    let mut m = &inv_sqrt
        * CMatrix::from_diagonal(&CVector::from_iterator(
            w.len(),
            w.iter().map(|&x| Complex64::new(x, 0.0)),
        ))
        * &inv_sqrt;
    m = (&m + m.adjoint()).unscale(2.0);
    Ok(nalgebra::SymmetricEigen::new(m).eigenvalues.max())
}

/// `H(0, -V_-)`: zero field, attractive part only, same discretization.
pub fn comparison_operator(v: &PotentialSpec, grid: &Grid) -> Result<OperatorMatrix> {
    let free = op_weyl(
        &SymbolCatalog::relativistic(grid.dim()),
        &GaugeData::free(grid.dim()),
        grid,
    )?
    .hermitize();
    let (_, minus) = v.node_values(grid)?;
    let diag: Vec<f64> = minus.iter().map(|m| -m).collect();
    free.add_diagonal(&diag, &format!("-({})", v.negative_part().id()))
}

/// `max |exp(-tH)_{jk} - h^d p_t(x_j - x_k)| / (h^d p_t(0))` over pairs with
/// `|x_j - x_k| <= L/2`, for the free operator at zero field.
pub fn free_kernel_consistency(t: f64, grid: &Grid) -> Result<f64> {
    let d = grid.dim();
    let h = op_weyl(&SymbolCatalog::relativistic(d), &GaugeData::free(d), grid)?.hermitize();
    let e = eig_hermitian(&h)?.exp_neg(t);
    let cell = grid.cell_volume();
    let scale = cell * kernel_pt(t, &[0.0; 2][..d])?;
    let limit = 0.5 * grid.half_length();
    let n = grid.size();
    (0..n)
        .into_par_iter()
        .map(|j| -> Result<f64> {
            let x = grid.position(j);
            let mut worst = 0.0f64;
            for k in 0..n {
                let y = grid.position(k);
                let mut z = [0.0; 2];
                for a in 0..d {
                    z[a] = x[a] - y[a];
                }
                if z[..d].iter().map(|v| v * v).sum::<f64>().sqrt() <= limit {
                    let exact = cell * kernel_pt(t, &z[..d])?;
                    worst = worst.max((e[(j, k)] - Complex64::new(exact, 0.0)).norm() / scale);
                }
            }
            Ok(worst)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiamagneticReport {
    /// `max_j (|e^{-tH} u|_j - (e^{-tH(0,-V_-)} |u|)_j)^+` over all trials,
    /// for trial vectors with `max |u_j| = 1`.
    pub max_violation: f64,
    pub trials: usize,
}

/// Pointwise comparison `|e^{-tH} u| <= e^{-tH(0,-V_-)} |u|` on random
/// trial vectors. The first trial is the nonnegative vector `|u_0|`.
pub fn diamagnetic_check(
    g: &GaugeData,
    v: &PotentialSpec,
    grid: &Grid,
    t: f64,
    trials: usize,
    seed: u64,
) -> Result<DiamagneticReport> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("semigroup time must be positive, got {t}")));
    }
    let h = build_form_sum(g, v, grid)?.operator;
    let cmp = comparison_operator(v, grid)?;
    let eh = eig_hermitian(&h)?.exp_neg(t);
    let ec = eig_hermitian(&cmp)?.exp_neg(t);
    let n = grid.size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vectors: Vec<CVector> = (0..trials)
        .map(|k| {
            let mut u = CVector::from_fn(n, |_, _| {
                Complex64::from_polar(rng.random::<f64>(), 2.0 * std::f64::consts::PI * rng.random::<f64>())
            });
            if k == 0 {
                u.iter_mut().for_each(|z| *z = Complex64::new(z.norm(), 0.0));
            }
            let m = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
            u.unscale(m)
        })
        .collect();
    let max_violation = vectors
        .par_iter()
        .map(|u| {
            let lhs = &eh * u;
            let abs_u = u.map(|z| Complex64::new(z.norm(), 0.0));
            let rhs = &ec * abs_u;
            lhs.iter()
                .zip(rhs.iter())
                .map(|(l, r)| l.norm() - r.re)
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(DiamagneticReport { max_violation, trials })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    /// Fitted `C_p = max density(x, y) e^{<x - y>/p}` of `e^{-H(0,-V_-)}`.
    pub c_p: f64,
    /// `min density + tolerance`; nonnegative when the kernel is positive.
    pub positivity_margin: f64,
    /// `sup_x f_eps(x) |u(x)|`.
    pub chain_lhs: f64,
    /// `C_p e^lambda (int e^{-2|z|(1/p - eps)} dz)^{1/2} ||f_eps u||`.
    pub chain_rhs: f64,
    /// `(rhs - lhs) / rhs`.
    pub chain_margin: f64,
}

/// The inequality chain bounding `sup f_eps |u|` for an eigenvector `u` of
/// the form sum with eigenvalue `lambda`, with `f_eps` the exponential weight.
pub fn pointwise_bound_check(
    v: &PotentialSpec,
    grid: &Grid,
    lambda: f64,
    u: &GridFunction,
    eps: f64,
    p: f64,
) -> Result<PointwiseReport> {
    if !(p > 1.0) {
        return Err(Error::Parameter(format!("p must exceed 1, got {p}")));
    }
    if !(eps >= 0.0 && eps < 1.0 / p) {
        return Err(Error::Parameter(format!(
            "eps must lie in [0, 1/p) = [0, {}), got {eps}",
            1.0 / p
        )));
    }
    if u.grid() != grid {
        return Err(Error::Parameter("eigenvector lives on a different grid".into()));
    }
    let d = grid.dim();
    let n = grid.size();
    let cell = grid.cell_volume();
    let kernel = eig_hermitian(&comparison_operator(v, grid)?)?.exp_neg(1.0);
    let wrapped = |j: usize, k: usize| -> [f64; 2] {
        let x = grid.position(j);
        let y = grid.position(k);
        let mut z = [0.0; 2];
        for a in 0..d {
            z[a] = grid.wrap(x[a] - y[a]);
        }
        z
    };
    let (c_p, min_density) = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut c = 0.0f64;
            let mut lo = f64::INFINITY;
            for k in 0..n {
                let density = kernel[(j, k)].re / cell;
                let z = wrapped(j, k);
                let jz = (1.0 + z[..d].iter().map(|v| v * v).sum::<f64>()).sqrt();
                c = c.max(density * (jz / p).exp());
                lo = lo.min(density);
            }
            (c, lo)
        })
        .reduce(|| (0.0, f64::INFINITY), |a, b| (a.0.max(b.0), a.1.min(b.1)));

    let weight = WeightFamily::exponential();
    let fu: Vec<f64> = (0..n)
        .map(|j| weight.eval(eps, &grid.position(j)[..d]) * u.values()[j].norm())
        .collect();
    let chain_lhs = fu.iter().copied().fold(0.0, f64::max);
    let fu_norm = (fu.iter().map(|v| v * v).sum::<f64>() * cell).sqrt();
    let a = 1.0 / p - eps;
    let decay_integral: f64 = (0..n)
        .map(|k| {
            let z = wrapped(0, k);
            let r = z[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
            (-2.0 * a * r).exp()
        })
        .sum::<f64>()
        * cell;
    let chain_rhs = c_p * lambda.exp() * decay_integral.sqrt() * fu_norm;
    Ok(PointwiseReport {
        c_p,
        positivity_margin: min_density + POSITIVITY_TOLERANCE,
        chain_lhs,
        chain_rhs,
        chain_margin: (chain_rhs - chain_lhs) / chain_rhs,
    })
}
