//! Dense Hermitian eigensolves, resolvents, semigroups, relative bounds and
//! Riesz projectors.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{csv_string, Error, Result};
use crate::grid::GridFunction;
use crate::quantize::OperatorMatrix;
use crate::{CMatrix, CVector};

/// Largest relative Hermiticity defect accepted by the Hermitian solvers.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Distance to the spectrum below which a shift counts as singular.
pub const SINGULAR_SHIFT_TOLERANCE: f64 = 1e-10;

/// Convergence tolerance and iteration cap of the relative-bound iteration.
pub const RELATIVE_BOUND_TOLERANCE: f64 = 1e-8;
pub const RELATIVE_BOUND_MAX_ITERATIONS: usize = 500;

/// Default number of contour nodes for [`riesz_projector`].
pub const DEFAULT_CONTOUR_NODES: usize = 32;

fn relative_defect(m: &CMatrix) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.adjoint()).norm() / norm
}

/// Eigenvalues in ascending order with unit eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
    /// `max_k ||H v_k - lambda_k v_k|| / ||H||_2`.
    pub residual: f64,
    /// `||H v_k - lambda_k v_k|| / ||H||_2` for each pair.
    pub pair_residuals: Vec<f64>,
}

impl EigenDecomposition {
    /// `V f(Lambda) V*`.
    pub fn function_of(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            scaled.column_mut(k).scale_mut_complex(w);
        }
        scaled * self.eigenvectors.adjoint()
    }

    /// `exp(-t H)`.
    pub fn exp_neg(&self, t: f64) -> CMatrix {
        self.function_of(|lam| Complex64::new((-t * lam).exp(), 0.0))
    }

    /// `max_{j,k} |(V* V - I)_{jk}|`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.eigenvectors.ncols();
        let g = self.eigenvectors.adjoint() * &self.eigenvectors - CMatrix::identity(n, n);
        g.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvector(&self, k: usize) -> CVector {
        self.eigenvectors.column(k).into_owned()
    }

    /// Columns `index, eigenvalue, gap, residual`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["index", "eigenvalue", "gap", "residual"])?;
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            w.write_record([
                k.to_string(),
                format!("{lam:.16e}"),
                format!("{:.16e}", spectral_gap(&self.eigenvalues, k)),
                format!("{:.6e}", self.pair_residuals[k]),
            ])?;
        }
        csv_string(w)
    }
}

trait ScaleComplex {
    fn scale_mut_complex(&mut self, w: Complex64);
}

impl<S> ScaleComplex for nalgebra::Matrix<Complex64, nalgebra::Dyn, nalgebra::U1, S>
where
    S: nalgebra::StorageMut<Complex64, nalgebra::Dyn, nalgebra::U1>,
{
    fn scale_mut_complex(&mut self, w: Complex64) {
        for v in self.iter_mut() {
            *v *= w;
        }
    }
}

/// Full Hermitian eigendecomposition of an operator.
pub fn eig_hermitian(h: &OperatorMatrix) -> Result<EigenDecomposition> {
    eig_hermitian_matrix(h.entries())
}

/// Full Hermitian eigendecomposition via Householder tridiagonalization and
/// implicit-shift QR. Eigenvectors are phase-normalized so their largest
/// component is real and positive.
pub fn eig_hermitian_matrix(m: &CMatrix) -> Result<EigenDecomposition> {
    let defect = relative_defect(m);
    if defect > HERMITIAN_TOLERANCE {
        return Err(Error::NonHermitian { defect });
    }
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let pivot = col
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or(Complex64::new(1.0, 0.0));
        if pivot.norm() > 0.0 {
            let phase = pivot.conj() / pivot.norm();
            for v in col.iter_mut() {
                *v *= phase;
            }
        }
        col.unscale_mut(col.norm());
        eigenvectors.set_column(dst, &col);
    }
    let scale = eigenvalues
        .iter()
        .fold(0.0f64, |a, &l| a.max(l.abs()))
        .max(f64::MIN_POSITIVE);
    let hv = m * &eigenvectors;
    let pair_residuals: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let r = hv.column(k) - eigenvectors.column(k) * Complex64::new(eigenvalues[k], 0.0);
            r.norm() / scale
        })
        .collect();
    let residual = pair_residuals.iter().copied().fold(0.0, f64::max);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
        residual,
        pair_residuals,
    })
}

/// Eigenvalues of a general complex matrix from its Schur form, sorted by
/// real part then imaginary part.
pub fn eigenvalues_general(m: &CMatrix) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let schur = nalgebra::Schur::try_new(m.clone(), f64::EPSILON, 1000 * n.max(1)).ok_or(Error::NotConverged {
        iterations: 1000 * n.max(1),
        gap: f64::NAN,
    })?;
    let (_, t) = schur.unpack();
    let sub = (1..n).map(|i| t[(i, i - 1)].norm()).fold(0.0, f64::max);
    if sub > 1e-10 * scale {
        return Err(Error::NotConverged {
            iterations: 1000 * n,
            gap: sub,
        });
    }
    let mut vals: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    vals.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(vals)
}

/// Threshold below which eigenvalues count as discrete spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub essential_threshold: f64,
    pub margin: f64,
}

impl SpectralWindow {
    pub fn new(essential_threshold: f64, margin: f64) -> Result<Self> {
        if !(margin > 0.0) {
            return Err(Error::Parameter(format!(
                "window margin must be positive, got {margin}"
            )));
        }
        Ok(Self {
            essential_threshold,
            margin,
        })
    }
}

/// An eigenpair below the essential threshold, with its distance to the
/// nearest other eigenvalue.
#[derive(Debug, Clone)]
pub struct DiscreteEigenpair {
    pub index: usize,
    pub eigenvalue: f64,
    pub eigenvector: CVector,
    pub gap: f64,
}

/// Eigenpairs with `lambda < threshold - margin`.
pub fn discrete_spectrum_select(dec: &EigenDecomposition, win: &SpectralWindow) -> Vec<DiscreteEigenpair> {
    let ev = &dec.eigenvalues;
    let cutoff = win.essential_threshold - win.margin;
    (0..ev.len())
        .take_while(|&k| ev[k] < cutoff)
        .map(|k| DiscreteEigenpair {
            index: k,
            eigenvalue: ev[k],
            eigenvector: dec.eigenvector(k),
            gap: spectral_gap(ev, k),
        })
        .collect()
}

/// Distance from `ev[k]` to its nearest neighbour in a sorted list.
pub fn spectral_gap(ev: &[f64], k: usize) -> f64 {
    let below = if k > 0 { ev[k] - ev[k - 1] } else { f64::INFINITY };
    let above = if k + 1 < ev.len() {
        ev[k + 1] - ev[k]
    } else {
        f64::INFINITY
    };
    below.min(above)
}

fn shifted(m: &CMatrix, z: Complex64) -> CMatrix {
    let mut s = m.clone();
    for i in 0..s.nrows() {
        s[(i, i)] -= z;
    }
    s
}

/// LU factorization of `H - z` with a near-singularity check.
pub struct ShiftedSolver {
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    shifted: CMatrix,
}

impl ShiftedSolver {
    /// Factors `H - z`. Refuses shifts within [`SINGULAR_SHIFT_TOLERANCE`]
    /// (relative to `max(1, ||H||_F)`) of the spectrum, estimated by inverse
    /// iteration on the factors.
    pub fn new(h: &CMatrix, z: Complex64) -> Result<Self> {
        let shifted_m = shifted(h, z);
        let lu = shifted_m.clone().lu();
        // Error path only: locate the eigenvalue responsible.
        let singular = |distance: f64, _: &CVector| -> Error {
            let nearest = spectrum_for_contour(h)
                .unwrap_or_default()
                .into_iter()
                .min_by(|a, b| (a - z).norm().total_cmp(&(b - z).norm()))
                .map_or(f64::NAN, |mu| mu.re);
            Error::SingularShift { z, nearest, distance }
        };
        let n = h.nrows();
        let mut v = CVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.1 * (i as f64).sin(), 0.0));
        v.unscale_mut(v.norm());
        let mut sigma = f64::INFINITY;
        for _ in 0..3 {
            let mut x = v.clone();
            if !lu.solve_mut(&mut x) {
                return Err(singular(0.0, &v));
            }
            let norm = x.norm();
            if !norm.is_finite() || norm == 0.0 {
                return Err(singular(0.0, &v));
            }
            sigma = 1.0 / norm;
            v = x.unscale(norm);
        }
        let tol = SINGULAR_SHIFT_TOLERANCE * h.norm().max(1.0);
        if sigma < tol {
            return Err(singular(sigma, &v));
        }
        Ok(Self { lu, shifted: shifted_m })
    }

    /// Solves `(H - z) u = w`, with one step of iterative refinement.
    pub fn solve(&self, w: &CVector) -> Result<CVector> {
        let mut u = w.clone();
        if !self.lu.solve_mut(&mut u) {
            return Err(Error::Domain("singular factorization".into()));
        }
        let r = w - &self.shifted * &u;
        let mut du = r;
        if self.lu.solve_mut(&mut du) {
            u += du;
        }
        Ok(u)
    }

    /// `(H - z)^{-1}` as a dense matrix.
    pub fn inverse(&self) -> Result<CMatrix> {
        self.lu
            .try_inverse()
            .ok_or_else(|| Error::Domain("singular factorization".into()))
    }

    pub fn shifted_matrix(&self) -> &CMatrix {
        &self.shifted
    }
}

/// Solves `(H - z) u = w`.
pub fn resolvent_apply(h: &OperatorMatrix, z: Complex64, w: &GridFunction) -> Result<GridFunction> {
    let solver = ShiftedSolver::new(h.entries(), z)?;
    let u = solver.solve(w.values())?;
    GridFunction::new(*w.grid(), u)
}

/// `exp(-t H)` through the eigendecomposition.
pub fn matrix_exp_neg(h: &OperatorMatrix, t: f64) -> Result<CMatrix> {
    if !(t >= 0.0) {
        return Err(Error::Parameter(format!("t must be nonnegative, got {t}")));
    }
    Ok(eig_hermitian(h)?.exp_neg(t))
}

/// `||R (H - z)^{-1}||_2`, by Lanczos iteration with full
/// reorthogonalization on `M* M` for `M = R (H - z)^{-1}`.
pub fn relative_bound(r: &CMatrix, h: &OperatorMatrix, z: Complex64) -> Result<f64> {
    relative_bound_matrix(r, h.entries(), z)
}

pub fn relative_bound_matrix(r: &CMatrix, h: &CMatrix, z: Complex64) -> Result<f64> {
    if r.nrows() != h.nrows() || r.ncols() != h.ncols() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            found: r.nrows(),
        });
    }
    if r.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
        return Ok(0.0);
    }
    // M^T = (H - z)^{-T} R^T, solved with one factorization of (H - z)^T.
    let solver = ShiftedSolver::new(&h.transpose(), z)?;
    let mut mt = r.transpose();
    if !solver.lu.solve_mut(&mut mt) {
        return Err(Error::Domain("singular factorization".into()));
    }
    let m = mt.transpose();
    spectral_norm(&m)
}

/// Largest singular value by Lanczos on `A* A`.
pub fn spectral_norm(a: &CMatrix) -> Result<f64> {
    let n = a.ncols();
    if n == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q = CVector::from_fn(n, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    q.unscale_mut(q.norm());
    let cap = RELATIVE_BOUND_MAX_ITERATIONS.min(n);
    let mut basis: Vec<CVector> = Vec::with_capacity(cap + 1);
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut prev_theta = f64::NAN;
    let mut gap = f64::INFINITY;
    basis.push(q);
    for it in 0..cap {
        let qk = &basis[it];
        let aq = a * qk;
        let mut w = a.adjoint() * aq;
        let alpha = qk.dotc(&w).re;
        // Full reorthogonalization, twice for stability.
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&w);
                w -= b * c;
            }
        }
        alphas.push(alpha);
        let beta = w.norm();
        let theta = largest_tridiagonal_eigenvalue(&alphas, &betas);
        let scale = theta.abs().max(f64::MIN_POSITIVE);
        if !prev_theta.is_nan() {
            gap = (theta - prev_theta).abs() / scale;
        }
        let exhausted = beta <= 1e-14 * scale || it + 1 == n;
        if exhausted || gap < RELATIVE_BOUND_TOLERANCE * RELATIVE_BOUND_TOLERANCE {
            return Ok(theta.max(0.0).sqrt());
        }
        prev_theta = theta;
        betas.push(beta);
        basis.push(w.unscale(beta));
    }
    Err(Error::NotConverged { iterations: cap, gap })
}

fn largest_tridiagonal_eigenvalue(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len();
    let t = DMatrix::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    SymmetricEigen::new(t)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Eigenvalues used to validate a contour: Hermitian solve when possible,
/// Schur form otherwise.
fn spectrum_for_contour(h: &CMatrix) -> Result<Vec<Complex64>> {
    if relative_defect(h) <= HERMITIAN_TOLERANCE {
        let vals = SymmetricEigen::new(h.clone()).eigenvalues;
        Ok(vals.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    } else {
        eigenvalues_general(h)
    }
}

/// `(2 pi i)^{-1} oint (mu - H)^{-1} dmu` over the circle of the given radius
/// around `lambda`, by the `nodes`-point trapezoidal rule.
pub fn riesz_projector(h: &CMatrix, lambda: f64, radius: f64, nodes: usize) -> Result<CMatrix> {
    if !(radius > 0.0) || nodes < 2 {
        return Err(Error::Parameter(format!(
            "contour needs radius > 0 and at least 2 nodes, got {radius} and {nodes}"
        )));
    }
    let centre = Complex64::new(lambda, 0.0);
    for mu in spectrum_for_contour(h)? {
        let distance = ((mu - centre).norm() - radius).abs();
        if distance < 0.1 * radius {
            return Err(Error::ContourThroughSpectrum {
                eigenvalue: mu,
                distance,
            });
        }
    }
    let n = h.nrows();
    let terms: Result<Vec<CMatrix>> = (0..nodes)
        .into_par_iter()
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / nodes as f64;
            let e = Complex64::from_polar(1.0, theta);
            let mu = centre + e * radius;
            // (mu - H)^{-1} = -(H - mu)^{-1}
            let inv = ShiftedSolver::new(h, mu)?.inverse()?;
            Ok(inv * (-e * radius / nodes as f64))
        })
        .collect();
    Ok(terms?.into_iter().fold(CMatrix::zeros(n, n), |acc, t| acc + t))
}

/// `||P^2 - P||_F`.
pub fn idempotency_defect(p: &CMatrix) -> f64 {
    (p * p - p).norm()
}

/// Number of singular values above 1/2.
pub fn projector_rank(p: &CMatrix) -> usize {
    p.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .filter(|&&s| s > 0.5)
        .count()
}

/// Largest relative deviation between two sorted spectra,
/// `max_k |a_k - b_k| / max(1, max_k |a_k|)`.
pub fn spectrum_mismatch(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let scale = a.iter().map(|v| v.norm()).fold(1.0, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}
