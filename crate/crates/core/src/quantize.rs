//! Magnetic Weyl quantization on the periodic grid, amplitude operators,
//! amplitude reduction, and magnetic Sobolev norms.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::SpectralPlan;
use crate::gauge::GaugeData;
use crate::grid::{Grid, GridFunction, MAX_DIM};
use crate::symbol::{japanese, HormanderSymbol, SymbolCatalog};
use crate::CMatrix;

/// Largest direct-summation cost accepted without an explicit override.
pub const DIRECT_SUM_BUDGET: f64 = 1e10;

/// Largest multi-index order accepted by [`mag_derivative`].
pub const MAG_DERIVATIVE_BUDGET: usize = 4;

/// Midpoints processed per parallel batch during assembly.
const MIDPOINT_BATCH: usize = 256;

/// A dense operator on a grid, with its Hermiticity diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: CMatrix,
    grid: Grid,
    symbol_id: String,
    hermiticity_defect: f64,
    symmetrized: bool,
}

impl OperatorMatrix {
    pub fn new(grid: Grid, symbol_id: impl Into<String>, entries: CMatrix) -> Result<Self> {
        let n = grid.size();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: entries.nrows().max(entries.ncols()),
            });
        }
        let defect = relative_defect(&entries);
        Ok(Self {
            entries,
            grid,
            symbol_id: symbol_id.into(),
            hermiticity_defect: defect,
            symmetrized: false,
        })
    }

    /// Rebuilds a matrix with stored metadata, as read back from disk.
    pub fn from_parts(grid: Grid, symbol_id: impl Into<String>, entries: CMatrix, symmetrized: bool) -> Result<Self> {
        let mut op = Self::new(grid, symbol_id, entries)?;
        op.symmetrized = symmetrized;
        Ok(op)
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn symbol_id(&self) -> &str {
        &self.symbol_id
    }

    /// `||H - H*||_F / ||H||_F` of the matrix before symmetrization.
    pub fn hermiticity_defect(&self) -> f64 {
        self.hermiticity_defect
    }

    pub fn is_symmetrized(&self) -> bool {
        self.symmetrized
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        if u.grid() != &self.grid {
            return Err(Error::DimensionMismatch {
                expected: self.grid.size(),
                found: u.grid().size(),
            });
        }
        GridFunction::new(self.grid, &self.entries * u.values())
    }

    /// `(H + H*) / 2`. A matrix that is already symmetrized is returned as is,
    /// keeping the defect measured before the first symmetrization.
    pub fn hermitize(&self) -> Self {
        if self.symmetrized {
            return self.clone();
        }
        let sym = (&self.entries + self.entries.adjoint()).unscale(2.0);
        Self {
            entries: sym,
            grid: self.grid,
            symbol_id: self.symbol_id.clone(),
            hermiticity_defect: self.hermiticity_defect,
            symmetrized: true,
        }
    }

    /// Sum with a real diagonal, keeping the metadata.
    pub fn add_diagonal(&self, diag: &[f64], label: &str) -> Result<Self> {
        if diag.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: diag.len(),
            });
        }
        let mut entries = self.entries.clone();
        for (i, &v) in diag.iter().enumerate() {
            entries[(i, i)] += v;
        }
        Ok(Self {
            entries,
            grid: self.grid,
            symbol_id: format!("{}{label}", self.symbol_id),
            hermiticity_defect: self.hermiticity_defect,
            symmetrized: self.symmetrized,
        })
    }
}

fn relative_defect(m: &CMatrix) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.adjoint()).norm() / norm
}

/// `(H + H*) / 2` with the pre-symmetrization defect recorded.
pub fn hermitize(h: &OperatorMatrix) -> OperatorMatrix {
    h.hermitize()
}

/// Number of half-step midpoints per axis, `2n - 1`.
fn midpoints_per_axis(grid: &Grid) -> usize {
    2 * grid.points() - 1
}

fn midpoint_position(grid: &Grid, s: [usize; MAX_DIM]) -> [f64; MAX_DIM] {
    let half = 0.5 * grid.spacing();
    let mut m = [0.0; MAX_DIM];
    for a in 0..grid.dim() {
        m[a] = -grid.half_length() + s[a] as f64 * half;
    }
    m
}

fn midpoint_index(grid: &Grid, flat: usize) -> [usize; MAX_DIM] {
    let mp = midpoints_per_axis(grid);
    match grid.dim() {
        1 => [flat, 0],
        _ => [flat / mp, flat % mp],
    }
}

/// Frequencies in FFT storage order for every flat dual index.
fn fft_frequencies(grid: &Grid, plan: &SpectralPlan) -> Vec<[f64; MAX_DIM]> {
    let scale = PI / grid.half_length();
    (0..grid.size())
        .map(|flat| {
            let idx = grid.unflatten(flat);
            let mut eta = [0.0; MAX_DIM];
            for a in 0..grid.dim() {
                eta[a] = scale * plan.wavenumber(idx[a]) as f64;
            }
            eta
        })
        .collect()
}

/// `K(m, z_r) = (2L)^{-d} sum_eta e^{i <z_r, eta>} core(m, eta)` for every
/// wrapped displacement index `r`, by one inverse DFT.
fn core_kernel(
    sym: &HormanderSymbol,
    grid: &Grid,
    plan: &SpectralPlan,
    freqs: &[[f64; MAX_DIM]],
    m: &[f64],
) -> Result<Vec<Complex64>> {
    let d = grid.dim();
    let mut buf = Vec::with_capacity(freqs.len());
    for eta in freqs {
        let v = sym.core_eval(m, &eta[..d]);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("symbol `{}` at x = {:?}, eta = {:?}", sym.id(), m, &eta[..d]),
                value: v,
            });
        }
        buf.push(v);
    }
    plan.inverse(&mut buf);
    let norm = (2.0 * grid.half_length()).powi(d as i32);
    for v in &mut buf {
        *v /= norm;
    }
    Ok(buf)
}

/// Tabulated kernel `K(m, z)` on half-step midpoints and wrapped
/// displacements.
#[derive(Debug, Clone)]
pub struct KernelTable {
    grid: Grid,
    /// One kernel when the core ignores `x`, else one per midpoint.
    kernels: Vec<Vec<Complex64>>,
    /// `v(m) / h^d`, added at zero displacement.
    potential: Vec<f64>,
}

impl KernelTable {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `K(m_s, z_r)` for per-axis midpoint index `s` in `0..2n-1` and wrapped
    /// displacement index `r` in `0..n`.
    pub fn value(&self, s: [usize; MAX_DIM], r: [usize; MAX_DIM]) -> Complex64 {
        let mp = midpoints_per_axis(&self.grid);
        let s_flat = match self.grid.dim() {
            1 => s[0],
            _ => s[0] * mp + s[1],
        };
        let kernel = if self.kernels.len() == 1 {
            &self.kernels[0]
        } else {
            &self.kernels[s_flat]
        };
        let r_flat = self.grid.flatten(r);
        let mut v = kernel[r_flat];
        if r_flat == 0 {
            v += self.potential[s_flat];
        }
        v
    }
}

/// Kernel table of a symbol on a grid.
pub fn kernel_table(sym: &HormanderSymbol, grid: &Grid) -> Result<KernelTable> {
    check_dims(sym.dim(), grid.dim())?;
    let plan = SpectralPlan::new(grid);
    let freqs = fft_frequencies(grid, &plan);
    let d = grid.dim();
    let count = midpoints_per_axis(grid).pow(d as u32);
    let kernels = if sym.is_core_x_independent() {
        vec![core_kernel(sym, grid, &plan, &freqs, &[0.0; MAX_DIM][..d])?]
    } else {
        (0..count)
            .into_par_iter()
            .map(|s| {
                let m = midpoint_position(grid, midpoint_index(grid, s));
                core_kernel(sym, grid, &plan, &freqs, &m[..d])
            })
            .collect::<Result<Vec<_>>>()?
    };
    let inv_cell = 1.0 / grid.cell_volume();
    let potential = (0..count)
        .map(|s| {
            let m = midpoint_position(grid, midpoint_index(grid, s));
            sym.potential_value(&m[..d]) * inv_cell
        })
        .collect();
    Ok(KernelTable {
        grid: *grid,
        kernels,
        potential,
    })
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Column-major table of `omega^A(x_j, x_k)`, or `None` for a trivial gauge.
fn phase_table(g: &GaugeData, grid: &Grid) -> Option<Vec<Complex64>> {
    if g.is_trivial() {
        return None;
    }
    let n = grid.size();
    let d = grid.dim();
    let mut table = vec![Complex64::new(1.0, 0.0); n * n];
    table.par_chunks_mut(n).enumerate().for_each(|(k, col)| {
        let y = grid.position(k);
        for (j, slot) in col.iter_mut().enumerate() {
            let x = grid.position(j);
            *slot = g.phase(&x[..d], &y[..d]);
        }
    });
    Some(table)
}

/// Per-axis wrapped displacement index `(j - k) mod n`.
fn wrapped(grid: &Grid, j: [usize; MAX_DIM], k: [usize; MAX_DIM]) -> [usize; MAX_DIM] {
    let n = grid.points();
    let mut r = [0; MAX_DIM];
    for a in 0..grid.dim() {
        r[a] = (j[a] + n - k[a]) % n;
    }
    r
}

/// `H[j,k] = h^d omega^A(x_j, x_k) K((x_j + x_k)/2, x_j - x_k)`, symmetrized
/// when the symbol is real.
pub fn op_weyl(sym: &HormanderSymbol, g: &GaugeData, grid: &Grid) -> Result<OperatorMatrix> {
    check_dims(sym.dim(), grid.dim())?;
    check_dims(g.dim(), grid.dim())?;
    let n = grid.size();
    let d = grid.dim();
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    let cell = grid.cell_volume();
    if sym.is_eta_independent() {
        for j in 0..n {
            let x = grid.position(j);
            data[j * n + j] = sym.eval(&x[..d], &[0.0; MAX_DIM][..d]);
        }
    } else {
        let plan = SpectralPlan::new(grid);
        let freqs = fft_frequencies(grid, &plan);
        if sym.is_core_x_independent() {
            let kernel = core_kernel(sym, grid, &plan, &freqs, &[0.0; MAX_DIM][..d])?;
            data.par_chunks_mut(n).enumerate().for_each(|(k, col)| {
                let kk = grid.unflatten(k);
                for (j, slot) in col.iter_mut().enumerate() {
                    let r = grid.flatten(wrapped(grid, grid.unflatten(j), kk));
                    *slot = kernel[r] * cell;
                }
            });
        } else {
            assemble_by_midpoint(sym, grid, &plan, &freqs, &mut data)?;
        }
        if let Some(phases) = phase_table(g, grid) {
            data.par_iter_mut().zip(phases.par_iter()).for_each(|(h, w)| *h *= w);
        }
        if sym.potential().is_some() {
            for j in 0..n {
                let x = grid.position(j);
                data[j * n + j] += sym.potential_value(&x[..d]);
            }
        }
    }
    let entries = CMatrix::from_vec(n, n, data);
    let op = OperatorMatrix::new(*grid, sym.id(), entries)?;
    Ok(if sym.is_real() { op.hermitize() } else { op })
}

/// Fills the column-major `data` with `h^d K(m, z)` for an x-dependent core,
/// one batch of midpoints at a time.
fn assemble_by_midpoint(
    sym: &HormanderSymbol,
    grid: &Grid,
    plan: &SpectralPlan,
    freqs: &[[f64; MAX_DIM]],
    data: &mut [Complex64],
) -> Result<()> {
    let d = grid.dim();
    let n1 = grid.points();
    let n = grid.size();
    let cell = grid.cell_volume();
    let count = midpoints_per_axis(grid).pow(d as u32);
    let axis_pairs = |s: usize| -> Vec<(usize, usize)> {
        let lo = s.saturating_sub(n1 - 1);
        let hi = s.min(n1 - 1);
        (lo..=hi).map(|j| (j, s - j)).collect()
    };
    let mut start = 0;
    while start < count {
        let end = (start + MIDPOINT_BATCH).min(count);
        let kernels = (start..end)
            .into_par_iter()
            .map(|s| {
                let m = midpoint_position(grid, midpoint_index(grid, s));
                core_kernel(sym, grid, plan, freqs, &m[..d])
            })
            .collect::<Result<Vec<_>>>()?;
        for (offset, kernel) in kernels.iter().enumerate() {
            let s = midpoint_index(grid, start + offset);
            let first = axis_pairs(s[0]);
            let second = if d == 2 { axis_pairs(s[1]) } else { vec![(0, 0)] };
            for &(j0, k0) in &first {
                for &(j1, k1) in &second {
                    let j = grid.flatten([j0, j1]);
                    let k = grid.flatten([k0, k1]);
                    let r = grid.flatten(wrapped(grid, [j0, j1], [k0, k1]));
                    data[k * n + j] = kernel[r] * cell;
                }
            }
        }
        start = end;
    }
    Ok(())
}

/// `H[j,k] = n^{-d} sum_eta e^{i <x_j - x_k, eta>} omega^A(x_j, x_k) amp(x_j, x_k, eta)`
/// by direct summation, cost `n^{3d}`.
pub fn op_amplitude<F>(amp: F, g: &GaugeData, grid: &Grid, override_budget: bool) -> Result<OperatorMatrix>
where
    F: Fn(&[f64], &[f64], &[f64]) -> Complex64 + Sync,
{
    check_dims(g.dim(), grid.dim())?;
    let n = grid.size();
    let d = grid.dim();
    let cost = (n as f64).powi(3);
    if cost > DIRECT_SUM_BUDGET && !override_budget {
        return Err(Error::BudgetExceeded {
            cost,
            limit: DIRECT_SUM_BUDGET,
        });
    }
    let n1 = grid.points();
    let roots: Vec<Complex64> = (0..n1)
        .map(|m| Complex64::from_polar(1.0, 2.0 * PI * m as f64 / n1 as f64))
        .collect();
    let freqs: Vec<[f64; MAX_DIM]> = (0..n).map(|q| grid.frequency_vector(q)).collect();
    let wavenumbers: Vec<[i64; MAX_DIM]> = (0..n)
        .map(|q| {
            let idx = grid.unflatten(q);
            let mut k = [0i64; MAX_DIM];
            for a in 0..d {
                k[a] = idx[a] as i64 - (n1 / 2) as i64;
            }
            k
        })
        .collect();
    let phases = phase_table(g, grid);
    let inv = 1.0 / n as f64;
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    data.par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(k, col)| -> Result<()> {
            let kk = grid.unflatten(k);
            let y = grid.position(k);
            for (j, slot) in col.iter_mut().enumerate() {
                let jj = grid.unflatten(j);
                let x = grid.position(j);
                let mut acc = Complex64::new(0.0, 0.0);
                for (q, eta) in freqs.iter().enumerate() {
                    let a = amp(&x[..d], &y[..d], &eta[..d]);
                    if !(a.re.is_finite() && a.im.is_finite()) {
                        return Err(Error::NonFinite {
                            context: format!(
                                "amplitude at x = {:?}, y = {:?}, eta = {:?}",
                                &x[..d],
                                &y[..d],
                                &eta[..d]
                            ),
                            value: a,
                        });
                    }
                    let mut e: i64 = 0;
                    for b in 0..d {
                        e += (jj[b] as i64 - kk[b] as i64) * wavenumbers[q][b];
                    }
                    acc += roots[e.rem_euclid(n1 as i64) as usize] * a;
                }
                let w = phases.as_ref().map_or(Complex64::new(1.0, 0.0), |p| p[k * n + j]);
                *slot = acc * w * inv;
            }
            Ok(())
        })?;
    OperatorMatrix::new(*grid, "amplitude", CMatrix::from_vec(n, n, data))
}

/// Values of a reduced symbol on the `(x_j, eta_k)` product lattice.
#[derive(Debug, Clone)]
pub struct SymbolTable {
    grid: Grid,
    t: f64,
    values: Vec<Complex64>,
}

impl SymbolTable {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Value at node `x_flat` and dual index `eta_flat` (ascending frequencies).
    pub fn value(&self, x_flat: usize, eta_flat: usize) -> Complex64 {
        self.values[x_flat * self.grid.size() + eta_flat]
    }
}

/// `(2 pi)^{-d} int int e^{i <z, zeta>} amp(x + (1-t) z, x - t z, eta + zeta) dz dzeta`
/// at one point, by lattice quadrature over the grid's displacements and
/// frequencies.
pub fn reduced_symbol_at<F>(amp: &F, t: f64, grid: &Grid, x: &[f64], eta: &[f64]) -> Complex64
where
    F: Fn(&[f64], &[f64], &[f64]) -> Complex64 + Sync,
{
    let d = grid.dim();
    let n1 = grid.points();
    let n = grid.size();
    let h = grid.spacing();
    let half = (n1 / 2) as i64;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut xa = [0.0; MAX_DIM];
    let mut ya = [0.0; MAX_DIM];
    let mut ea = [0.0; MAX_DIM];
    for r in 0..n {
        let ri = grid.unflatten(r);
        let mut z = [0.0; MAX_DIM];
        let mut rr = [0i64; MAX_DIM];
        for a in 0..d {
            rr[a] = ri[a] as i64 - half;
            z[a] = rr[a] as f64 * h;
            xa[a] = x[a] + (1.0 - t) * z[a];
            ya[a] = x[a] - t * z[a];
        }
        for q in 0..n {
            let qi = grid.unflatten(q);
            let mut e: i64 = 0;
            for a in 0..d {
                let kq = qi[a] as i64 - half;
                e += rr[a] * kq;
                ea[a] = eta[a] + PI / grid.half_length() * kq as f64;
            }
            let phase = 2.0 * PI * e.rem_euclid(n1 as i64) as f64 / n1 as f64;
            acc += Complex64::from_polar(1.0, phase) * amp(&xa[..d], &ya[..d], &ea[..d]);
        }
    }
    acc / n as f64
}

/// The reduced symbol `a_t(x, eta)` of an amplitude `a(x, y, eta)` on the whole
/// `(x, eta)` lattice; cost `n^{4d}`.
pub fn reduce_amplitude<F>(amp: F, t: f64, grid: &Grid, override_budget: bool) -> Result<SymbolTable>
where
    F: Fn(&[f64], &[f64], &[f64]) -> Complex64 + Sync,
{
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Parameter(format!("t must lie in [0, 1], got {t}")));
    }
    let n = grid.size();
    let d = grid.dim();
    let cost = (n as f64).powi(4);
    if cost > DIRECT_SUM_BUDGET && !override_budget {
        return Err(Error::BudgetExceeded {
            cost,
            limit: DIRECT_SUM_BUDGET,
        });
    }
    let values: Vec<Complex64> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let x = grid.position(idx / n);
            let eta = grid.frequency_vector(idx % n);
            reduced_symbol_at(&amp, t, grid, &x[..d], &eta[..d])
        })
        .collect();
    Ok(SymbolTable { grid: *grid, t, values })
}

/// `P_s = Op^A(p_s)`.
pub fn op_ps(s: f64, g: &GaugeData, grid: &Grid) -> Result<OperatorMatrix> {
    op_weyl(&SymbolCatalog::p_s(grid.dim(), s), g, grid)
}

/// Applies the Fourier multiplier `m(eta)` to a grid function.
fn fourier_multiplier<M: Fn(&[f64]) -> f64>(u: &GridFunction, m: M) -> GridFunction {
    let grid = *u.grid();
    let plan = SpectralPlan::new(&grid);
    let freqs = fft_frequencies(&grid, &plan);
    let mut buf: Vec<Complex64> = u.values().iter().copied().collect();
    plan.forward(&mut buf);
    let d = grid.dim();
    for (v, eta) in buf.iter_mut().zip(&freqs) {
        *v *= m(&eta[..d]);
    }
    plan.inverse(&mut buf);
    let inv = 1.0 / grid.size() as f64;
    GridFunction::new(
        grid,
        DVector::from_iterator(buf.len(), buf.into_iter().map(|v| v * inv)),
    )
    .expect("length preserved")
}

/// `sqrt(||u||^2 + ||P_s u||^2)` in the discrete L^2 norm.
pub fn sobolev_norm(u: &GridFunction, s: f64, g: &GaugeData) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::NotApplicable(format!(
            "Sobolev norms are implemented for s >= 0, got {s}"
        )));
    }
    check_dims(g.dim(), u.grid().dim())?;
    let psu = if g.is_trivial() {
        fourier_multiplier(u, |eta| japanese(eta).powf(s))
    } else {
        op_ps(s, g, u.grid())?.apply(u)?
    };
    let a = u.l2_norm();
    let b = psu.l2_norm();
    Ok((a * a + b * b).sqrt())
}

/// `(D_1 - A_1)^{alpha_1} ... (D_d - A_d)^{alpha_d} u` with `D = -i d/dx`
/// by spectral differentiation; the rightmost factor acts first.
pub fn mag_derivative(alpha: &[usize], u: &GridFunction, g: &GaugeData) -> Result<GridFunction> {
    let grid = *u.grid();
    let d = grid.dim();
    check_dims(d, alpha.len())?;
    check_dims(g.dim(), d)?;
    let total: usize = alpha.iter().sum();
    if total > MAG_DERIVATIVE_BUDGET {
        return Err(Error::UnsupportedOrder {
            order: total,
            budget: MAG_DERIVATIVE_BUDGET,
        });
    }
    let plan = SpectralPlan::new(&grid);
    let n1 = grid.points();
    let scale = PI / grid.half_length();
    let potential: Vec<[f64; MAX_DIM]> = (0..grid.size())
        .map(|j| g.vector_potential(&grid.position(j)[..d]))
        .collect();
    let mut buf: Vec<Complex64> = u.values().iter().copied().collect();
    for axis in (0..d).rev() {
        for _ in 0..alpha[axis] {
            let before = buf.clone();
            plan.forward_axis(&mut buf, axis);
            for (flat, v) in buf.iter_mut().enumerate() {
                let q = grid.unflatten(flat)[axis];
                *v *= scale * plan.wavenumber(q) as f64 / n1 as f64;
            }
            plan.inverse_axis(&mut buf, axis);
            for ((v, b), a) in buf.iter_mut().zip(&before).zip(&potential) {
                *v -= b * a[axis];
            }
        }
    }
    GridFunction::new(grid, DVector::from_vec(buf))
}

/// Summary of an assembled operator, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSummary {
    pub symbol_id: String,
    pub dim: usize,
    pub points: usize,
    pub half_length: f64,
    pub hermiticity_defect: f64,
    pub symmetrized: bool,
}

impl From<&OperatorMatrix> for OperatorSummary {
    fn from(op: &OperatorMatrix) -> Self {
        Self {
            symbol_id: op.symbol_id.clone(),
            dim: op.grid.dim(),
            points: op.grid.points(),
            half_length: op.grid.half_length(),
            hermiticity_defect: op.hermiticity_defect,
            symmetrized: op.symmetrized,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::{transversal_gauge, MagneticField};
    use crate::potential::PotentialSpec;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Explicit `F* diag(m(eta)) F` from the DFT matrix, no FFT involved.
    fn dft_multiplier_matrix(grid: &Grid, m: impl Fn(f64) -> f64) -> CMatrix {
        let n = grid.points();
        let x = grid.nodes();
        let eta = grid.frequencies();
        CMatrix::from_fn(n, n, |j, k| {
            eta.iter()
                .map(|&e| Complex64::from_polar(m(e) / n as f64, e * (x[j] - x[k])))
                .sum()
        })
    }

    #[test]
    fn constant_symbol_gives_identity_exactly() {
        let grid = Grid::new(2, 3.0, 8).unwrap();
        let g = transversal_gauge(&MagneticField::constant_2d(0.5));
        let op = op_weyl(&SymbolCatalog::p_s(2, 0.0), &g, &grid).unwrap();
        assert_eq!(op.entries(), &CMatrix::identity(64, 64));
    }

    #[test]
    fn kinetic_matches_dft_laplacian() {
        let grid = Grid::new(1, PI, 8).unwrap();
        let op = op_weyl(&SymbolCatalog::kinetic(1), &GaugeData::free(1), &grid).unwrap();
        let oracle = dft_multiplier_matrix(&grid, |e| e * e);
        assert!((op.entries() - &oracle).norm() < 1e-12 * oracle.norm());
    }

    #[test]
    fn eta_independent_symbol_is_diagonal() {
        let grid = Grid::new(1, 4.0, 16).unwrap();
        let g = GaugeData::free(1);
        let sym = SymbolCatalog::p_s(1, 0.0)
            .with_potential(PotentialSpec::gauss_well(2.0, 1.0))
            .unwrap();
        let op = op_weyl(&sym, &g, &grid).unwrap();
        for j in 0..16 {
            for k in 0..16 {
                let x = grid.node(j);
                let expected = if j == k { 1.0 - 2.0 * (-x * x).exp() } else { 0.0 };
                assert_eq!(op.entries()[(j, k)], c(expected));
            }
        }
    }

    #[test]
    fn potential_is_added_on_the_diagonal_only() {
        let grid = Grid::new(2, 3.0, 8).unwrap();
        let g = transversal_gauge(&MagneticField::constant_2d(1.0));
        let base = op_weyl(&SymbolCatalog::relativistic(2), &g, &grid).unwrap();
        let sym = SymbolCatalog::relativistic(2)
            .with_potential(PotentialSpec::gauss_well(2.0, 1.0))
            .unwrap();
        let op = op_weyl(&sym, &g, &grid).unwrap();
        let diff = op.entries() - base.entries();
        for j in 0..64 {
            for k in 0..64 {
                let x = grid.position(j);
                let expected = if j == k {
                    -2.0 * (-(x[0] * x[0] + x[1] * x[1])).exp()
                } else {
                    0.0
                };
                assert!((diff[(j, k)] - c(expected)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn kernel_table_of_constant_symbol_is_a_delta() {
        let grid = Grid::new(1, 2.0, 8).unwrap();
        let table = kernel_table(&SymbolCatalog::p_s(1, 0.0), &grid).unwrap();
        let h = grid.spacing();
        for s in 0..15 {
            assert!((table.value([s, 0], [0, 0]) - c(1.0 / h)).norm() < 1e-13);
            for r in 1..8 {
                assert!(table.value([s, 0], [r, 0]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn kernel_table_of_kinetic_symbol_is_the_inverse_dft() {
        let grid = Grid::new(1, 3.0, 16).unwrap();
        let table = kernel_table(&SymbolCatalog::kinetic(1), &grid).unwrap();
        let eta = grid.frequencies();
        for r in 0..16 {
            let z = r as f64 * grid.spacing();
            let direct: Complex64 = eta.iter().map(|&e| Complex64::from_polar(e * e / 6.0, z * e)).sum();
            for s in [0, 7, 30] {
                assert!((table.value([s, 0], [r, 0]) - direct).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_table_of_multiplication_symbol() {
        let grid = Grid::new(1, 2.0, 8).unwrap();
        let sym = HormanderSymbol::new("v", 1, 0.0, |x, _| c(x[0].cos()));
        let table = kernel_table(&sym, &grid).unwrap();
        let h = grid.spacing();
        for s in 0..15 {
            let m = -2.0 + s as f64 * h / 2.0;
            assert!((table.value([s, 0], [0, 0]) - c(m.cos() / h)).norm() < 1e-13);
            assert!(table.value([s, 0], [3, 0]).norm() < 1e-13);
        }
    }

    #[test]
    fn x_dependent_assembly_matches_direct_summation() {
        let grid = Grid::new(1, 3.0, 12).unwrap();
        let g = GaugeData::free(1);
        let sym = HormanderSymbol::new("mod", 1, 1.0, |x, eta| c((1.0 + 0.3 * x[0].sin()) * japanese(eta)));
        let weyl = op_weyl(&sym, &g, &grid).unwrap();
        let amp = op_amplitude(
            |x: &[f64], y: &[f64], eta: &[f64]| sym.eval(&[(x[0] + y[0]) / 2.0], eta),
            &g,
            &grid,
            false,
        )
        .unwrap();
        assert!((weyl.entries() - amp.entries()).norm() < 1e-12 * weyl.entries().norm());
    }

    #[test]
    fn magnetic_assembly_matches_direct_summation_in_two_dimensions() {
        let grid = Grid::new(2, 3.0, 6).unwrap();
        let g = transversal_gauge(&MagneticField::cos_2d(1.0));
        let sym = SymbolCatalog::relativistic(2);
        let weyl = op_weyl(&sym, &g, &grid).unwrap();
        let amp = op_amplitude(
            |x: &[f64], y: &[f64], eta: &[f64]| sym.eval(&[(x[0] + y[0]) / 2.0, (x[1] + y[1]) / 2.0], eta),
            &g,
            &grid,
            false,
        )
        .unwrap();
        assert!((weyl.entries() - amp.entries()).norm() < 1e-12 * weyl.entries().norm());
    }

    #[test]
    fn amplitude_of_one_is_identity() {
        let grid = Grid::new(1, 2.0, 8).unwrap();
        let op = op_amplitude(
            |_: &[f64], _: &[f64], _: &[f64]| c(1.0),
            &GaugeData::free(1),
            &grid,
            false,
        )
        .unwrap();
        assert!((op.entries() - CMatrix::identity(8, 8)).norm() < 1e-14);
    }

    #[test]
    fn direct_summation_budget_is_enforced() {
        let grid = Grid::new(2, 2.0, 48).unwrap();
        let err = op_amplitude(
            |_: &[f64], _: &[f64], _: &[f64]| c(1.0),
            &GaugeData::free(2),
            &grid,
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn non_finite_symbol_values_are_reported() {
        let grid = Grid::new(1, 2.0, 8).unwrap();
        let sym = HormanderSymbol::new("bad", 1, 0.0, |_, eta| c(1.0 / eta[0]));
        let err = op_weyl(&sym, &GaugeData::free(1), &grid).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }), "{err}");
    }

    #[test]
    fn ps_products_are_identity_at_zero_field() {
        let grid = Grid::new(1, 5.0, 32).unwrap();
        let g = GaugeData::free(1);
        let p0 = op_ps(0.0, &g, &grid).unwrap();
        assert_eq!(p0.entries(), &CMatrix::identity(32, 32));
        let p1 = op_ps(1.0, &g, &grid).unwrap();
        let pm1 = op_ps(-1.0, &g, &grid).unwrap();
        let prod = p1.entries() * pm1.entries();
        assert!((prod - CMatrix::identity(32, 32)).norm() < 1e-10);
        let p2 = op_ps(2.0, &g, &grid).unwrap();
        let oracle = dft_multiplier_matrix(&grid, |e| 1.0 + e * e);
        assert!((p2.entries() - &oracle).norm() < 1e-12 * oracle.norm());
    }

    #[test]
    fn hermitize_examples() {
        let grid = Grid::new(1, 1.0, 4).unwrap();
        let herm = CMatrix::from_fn(4, 4, |j, k| Complex64::new((j + k) as f64, j as f64 - k as f64));
        let op = OperatorMatrix::new(grid, "h", herm.clone()).unwrap();
        let hz = op.hermitize();
        assert_eq!(hz.hermiticity_defect(), 0.0);
        assert_eq!(hz.entries(), &herm);
        // i S with S real antisymmetric is Hermitian; i S with S real
        // symmetric is anti-Hermitian and symmetrizes to zero.
        let anti = CMatrix::from_fn(4, 4, |j, k| Complex64::new(0.0, (j * k) as f64 + 1.0));
        let z = OperatorMatrix::new(grid, "a", anti).unwrap().hermitize();
        assert_eq!(z.entries(), &CMatrix::zeros(4, 4));
        let again = z.hermitize();
        assert_eq!(again, z);
    }

    #[test]
    fn real_symbol_defect_is_small() {
        let grid = Grid::new(1, 10.0, 64).unwrap();
        let sym = SymbolCatalog::relativistic(1)
            .with_potential(PotentialSpec::gauss_well(2.0, 1.0))
            .unwrap();
        let op = op_weyl(&sym, &GaugeData::free(1), &grid).unwrap();
        assert!(op.hermiticity_defect() < 1e-8);
        assert!(op.is_symmetrized());
        assert_eq!(op.entries(), &op.entries().adjoint());
    }

    #[test]
    fn sobolev_norm_examples() {
        let grid = Grid::new(1, PI, 16).unwrap();
        let g = GaugeData::free(1);
        assert_eq!(sobolev_norm(&GridFunction::zeros(grid), 1.0, &g).unwrap(), 0.0);
        let u = GridFunction::from_fn(grid, |x| Complex64::new((-x[0] * x[0]).exp(), 0.0));
        let n0 = sobolev_norm(&u, 0.0, &g).unwrap();
        assert!((n0 - 2f64.sqrt() * u.l2_norm()).abs() < 1e-13);
        let eta0 = 3.0;
        let mode = GridFunction::from_fn(grid, |x| Complex64::from_polar(1.0, eta0 * x[0]));
        for s in [0.5, 1.0, 2.0] {
            let v = sobolev_norm(&mode, s, &g).unwrap();
            let expected = (1.0 + (1.0 + eta0 * eta0).powf(s)).sqrt() * mode.l2_norm();
            assert!((v - expected).abs() < 1e-12 * expected);
        }
        assert!(sobolev_norm(&u, -1.0, &g).is_err());
    }

    #[test]
    fn sobolev_norm_with_field_uses_the_magnetic_operator() {
        let grid = Grid::new(2, 3.0, 8).unwrap();
        let g = transversal_gauge(&MagneticField::constant_2d(0.5));
        let u = GridFunction::from_fn(grid, |x| Complex64::new((-(x[0] * x[0] + x[1] * x[1])).exp(), 0.0));
        let p1 = op_ps(1.0, &g, &grid).unwrap();
        let direct = p1.apply(&u).unwrap().l2_norm();
        let v = sobolev_norm(&u, 1.0, &g).unwrap();
        assert!((v - (u.l2_norm().powi(2) + direct * direct).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn mag_derivative_examples() {
        let grid = Grid::new(1, PI, 32).unwrap();
        let g = GaugeData::free(1);
        let eta0 = 2.0;
        let mode = GridFunction::from_fn(grid, |x| Complex64::from_polar(1.0, eta0 * x[0]));
        assert_eq!(mag_derivative(&[0], &mode, &g).unwrap(), mode);
        for k in 1..=4 {
            let v = mag_derivative(&[k], &mode, &g).unwrap();
            let expected = mode.values() * Complex64::new(eta0.powi(k as i32), 0.0);
            let err = (v.values() - &expected).norm();
            assert!(err < 1e-11 * expected.norm(), "order {k}: {err}");
        }
        assert!(mag_derivative(&[5], &mode, &g).is_err());
    }

    #[test]
    fn mag_derivative_matches_finite_differences_with_potential() {
        let a = |x: f64| 0.3 * x.sin();
        let fd_error = |n: usize| -> f64 {
            let grid = Grid::new(1, 8.0, n).unwrap();
            let g = GaugeData::with_potential(MagneticField::zero(1), "sin", false, move |x, out| out[0] = a(x[0]));
            let u = GridFunction::from_fn(grid, |x| Complex64::new((-x[0] * x[0]).exp(), 0.0));
            let v = mag_derivative(&[1], &u, &g).unwrap();
            let h = grid.spacing();
            (1..n - 1)
                .map(|j| {
                    let x = grid.node(j);
                    let du = (u.values()[j + 1] - u.values()[j - 1]) / (2.0 * h);
                    let fd = -Complex64::i() * du - u.values()[j] * a(x);
                    (fd - v.values()[j]).norm()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (fd_error(64), fd_error(128));
        assert!(e1 < 0.05);
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn mag_derivative_factor_order() {
        // (D_1 - A_1)(D_2 - A_2) against (D_2 - A_2)(D_1 - A_1) differ by i B.
        let grid = Grid::new(2, 6.0, 48).unwrap();
        let b = 0.5;
        let g = transversal_gauge(&MagneticField::constant_2d(b));
        let u = GridFunction::from_fn(grid, |x| Complex64::new((-(x[0] * x[0] + x[1] * x[1])).exp(), 0.0));
        let both = mag_derivative(&[1, 1], &u, &g).unwrap();
        let d1 = mag_derivative(&[1, 0], &u, &g).unwrap();
        let d21 = mag_derivative(&[0, 1], &d1, &g).unwrap();
        // [D_1 - A_1, D_2 - A_2] = i (d_1 A_2 - d_2 A_1) = i B
        let commutator = both.values() - d21.values();
        let expected = u.values() * Complex64::new(0.0, b);
        assert!((commutator - expected).norm() < 1e-8 * u.values().norm());
    }
}
