//! Weight conjugation, remainder bounds, the weight-ratio amplitude
//! identities and decay-rate fits for eigenfunctions.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{csv_string, Error, Result};
use crate::grid::{GridFunction, MAX_DIM};
use crate::quadrature::GaussLegendre;
use crate::quantize::OperatorMatrix;
use crate::spectral::relative_bound;
use crate::symbol::{japanese, HormanderSymbol};
use crate::CMatrix;

/// Largest weight value accepted by [`conjugate_operator`].
pub const WEIGHT_CEILING: f64 = 1e300;

/// Gauss–Legendre order of the t-integral in [`amplitude_d_eps`].
pub const D_EPS_QUADRATURE_ORDER: usize = 8;

/// Gauss–Legendre order per panel in [`weight_taylor_identity_check`].
pub const TAYLOR_QUADRATURE_ORDER: usize = 16;

/// Minimum number of usable samples for [`decay_fit`].
pub const MIN_FIT_SAMPLES: usize = 8;

/// Samples with `|u| <= FIT_FLOOR` are discarded by [`decay_fit`].
pub const FIT_FLOOR: f64 = 1e-13;

/// Threshold on `||eps R_eps (H - i)^{-1}||` defining the empirical eps_0.
pub const EMPIRICAL_EPS0_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    /// `<eps x>^p`
    Polynomial(u32),
    /// `exp(<eps x> - 1)`
    Exponential,
}

/// The weights `f_eps(x) = f(eps x)` used to conjugate operators. Both kinds
/// satisfy `f_eps(0) = 1` and `f_eps >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightFamily {
    kind: WeightKind,
}

impl WeightFamily {
    pub fn polynomial(p: u32) -> Result<Self> {
        if p == 0 {
            return Err(Error::Parameter("polynomial weight order must be positive".into()));
        }
        Ok(Self {
            kind: WeightKind::Polynomial(p),
        })
    }

    pub fn exponential() -> Self {
        Self {
            kind: WeightKind::Exponential,
        }
    }

    /// `poly:<p>` or `exp`.
    pub fn parse(id: &str) -> Result<Self> {
        let id = id.trim();
        if id == "exp" || id == "exponential" {
            return Ok(Self::exponential());
        }
        if let Some(p) = id.strip_prefix("poly:").or_else(|| id.strip_prefix("polynomial:")) {
            let p: u32 = p
                .trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("bad polynomial weight order in `{id}`")))?;
            return Self::polynomial(p);
        }
        Err(Error::Parameter(format!("unknown weight `{id}`")))
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn is_exponential(&self) -> bool {
        self.kind == WeightKind::Exponential
    }

    pub fn description(&self) -> String {
        match self.kind {
            WeightKind::Polynomial(p) => format!("<eps x>^{p}"),
            WeightKind::Exponential => "exp(<eps x> - 1)".to_string(),
        }
    }

    pub fn eval(&self, eps: f64, x: &[f64]) -> f64 {
        let s = scaled_japanese(eps, x);
        match self.kind {
            WeightKind::Polynomial(p) => s.powi(p as i32),
            WeightKind::Exponential => (s - 1.0).exp(),
        }
    }

    /// `log f_eps(x)`, finite even where `f_eps` itself overflows.
    pub fn log_eval(&self, eps: f64, x: &[f64]) -> f64 {
        let s = scaled_japanese(eps, x);
        match self.kind {
            WeightKind::Polynomial(p) => p as f64 * s.ln(),
            WeightKind::Exponential => s - 1.0,
        }
    }

    /// `grad f_eps(x) = f'(<eps x>) eps^2 x / <eps x>`.
    pub fn grad(&self, eps: f64, x: &[f64], out: &mut [f64]) {
        let s = scaled_japanese(eps, x);
        let radial = match self.kind {
            WeightKind::Polynomial(p) => p as f64 * s.powi(p as i32 - 2),
            WeightKind::Exponential => (s - 1.0).exp() / s,
        };
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = radial * eps * eps * xi;
        }
    }

    /// Largest eps for which `f_eps` stays below [`WEIGHT_CEILING`] on
    /// `|x| <= radius`.
    pub fn max_safe_eps(&self, radius: f64) -> f64 {
        // Largest admissible <eps x>.
        let s_max = match self.kind {
            WeightKind::Polynomial(p) => WEIGHT_CEILING.powf(1.0 / p as f64),
            WeightKind::Exponential => 1.0 + WEIGHT_CEILING.ln(),
        };
        (s_max * s_max - 1.0).sqrt() / radius.max(f64::MIN_POSITIVE)
    }
}

impl fmt::Display for WeightFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            WeightKind::Polynomial(p) => write!(f, "poly:{p}"),
            WeightKind::Exponential => write!(f, "exp"),
        }
    }
}

fn scaled_japanese(eps: f64, x: &[f64]) -> f64 {
    (1.0 + eps * eps * x.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// `b_eps(x, y) = eps (x + y) / (<eps x> + <eps y>)`, with `|b_eps| <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BField {
    eps: f64,
}

impl BField {
    pub fn new(eps: f64) -> Self {
        Self { eps }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> [f64; MAX_DIM] {
        let denom = scaled_japanese(self.eps, x) + scaled_japanese(self.eps, y);
        let mut out = [0.0; MAX_DIM];
        for (j, o) in out.iter_mut().enumerate().take(x.len()) {
            *o = self.eps * (x[j] + y[j]) / denom;
        }
        out
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Parameter(format!("eps must lie in (0, 1], got {eps}")));
    }
    Ok(())
}

fn weight_ratio_table(h: &OperatorMatrix, w: &WeightFamily, eps: f64) -> Result<Vec<f64>> {
    check_eps(eps)?;
    let grid = h.grid();
    let d = grid.dim();
    let values: Vec<f64> = (0..grid.size()).map(|j| w.eval(eps, &grid.position(j)[..d])).collect();
    if values.iter().any(|v| !(v.is_finite() && *v <= WEIGHT_CEILING)) {
        let radius = grid.half_length() * (d as f64).sqrt();
        return Err(Error::Overflow {
            eps,
            max_safe_eps: w.max_safe_eps(radius),
        });
    }
    Ok(values)
}

/// `F_eps H F_eps^{-1}` with `F_eps = diag(f_eps(x_j))`.
pub fn conjugate_operator(h: &OperatorMatrix, w: &WeightFamily, eps: f64) -> Result<OperatorMatrix> {
    let f = weight_ratio_table(h, w, eps)?;
    let n = f.len();
    let src = h.entries();
    // Forming the ratio first makes the diagonal exactly invariant.
    let entries = CMatrix::from_fn(n, n, |j, k| src[(j, k)] * (f[j] / f[k]));
    OperatorMatrix::new(
        *h.grid(),
        format!("{} conjugated by {w} at eps={eps}", h.symbol_id()),
        entries,
    )
}

/// `R_eps = (F_eps H F_eps^{-1} - H) / eps`.
pub fn remainder_operator(h: &OperatorMatrix, w: &WeightFamily, eps: f64) -> Result<CMatrix> {
    let conj = conjugate_operator(h, w, eps)?;
    Ok((conj.entries() - h.entries()).unscale(eps))
}

/// One row of a remainder sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "epsilon")]
    pub eps: f64,
    /// `||R_eps (H - i)^{-1}||_2`
    pub rel_bound: f64,
    /// `||eps R_eps (H - i)^{-1}||_2`
    pub eps_rel_bound: f64,
    /// `eps_rel_bound < 1/2`
    #[serde(rename = "flag")]
    pub below_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSweep {
    pub weight: String,
    pub rows: Vec<SweepRow>,
    /// Largest swept eps with `||eps R_eps (H - i)^{-1}|| < 1/2`.
    pub empirical_eps0: Option<f64>,
}

impl BoundSweep {
    /// `max / min` of the `rel_bound` column, 1 when all entries vanish.
    pub fn variation(&self) -> f64 {
        let max = self.rows.iter().map(|r| r.rel_bound).fold(0.0, f64::max);
        let min = self.rows.iter().map(|r| r.rel_bound).fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            1.0
        } else {
            max / min
        }
    }

    /// Columns `epsilon, rel_bound, eps_rel_bound, flag`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        csv_string(w)
    }
}

/// Relative bounds of `R_eps` against `H` at `z = i` over a sorted eps list.
pub fn uniform_bound_sweep(h: &OperatorMatrix, w: &WeightFamily, eps_list: &[f64]) -> Result<BoundSweep> {
    if eps_list.is_empty() {
        return Err(Error::Parameter("empty eps list".into()));
    }
    if eps_list.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::Parameter("eps list must be strictly increasing".into()));
    }
    for &eps in eps_list {
        check_eps(eps)?;
    }
    let z = Complex64::i();
    let rows: Result<Vec<SweepRow>> = eps_list
        .par_iter()
        .map(|&eps| {
            let r = remainder_operator(h, w, eps)?;
            let rel_bound = relative_bound(&r, h, z)?;
            let eps_rel_bound = eps * rel_bound;
            Ok(SweepRow {
                eps,
                rel_bound,
                eps_rel_bound,
                below_threshold: eps_rel_bound < EMPIRICAL_EPS0_THRESHOLD,
            })
        })
        .collect();
    let rows = rows?;
    let empirical_eps0 = rows.iter().filter(|r| r.below_threshold).map(|r| r.eps).next_back();
    Ok(BoundSweep {
        weight: w.to_string(),
        rows,
        empirical_eps0,
    })
}

/// Residual of the first-order Taylor identity for the weight ratio.
///
/// Polynomial kind: `f(x) = f(y) + <x - y, int_0^1 grad f(y + t(x - y)) dt>`
/// with composite Gauss–Legendre quadrature. Exponential kind:
/// `f(x) / f(y) = exp(eps <x - y, b_eps(x, y)>)`. Residuals are scaled by
/// `max(1, |lhs|)`.
pub fn weight_taylor_identity_check(w: &WeightFamily, eps: f64, pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let rule = GaussLegendre::new(TAYLOR_QUADRATURE_ORDER);
    let b = BField::new(eps);
    pairs
        .par_iter()
        .map(|(x, y)| {
            let d = x.len();
            match w.kind() {
                WeightKind::Exponential => {
                    let lhs = w.eval(eps, x) / w.eval(eps, y);
                    let bv = b.eval(x, y);
                    let dot: f64 = (0..d).map(|j| (x[j] - y[j]) * bv[j]).sum();
                    let rhs = (eps * dot).exp();
                    (lhs - rhs).abs() / lhs.abs().max(1.0)
                }
                WeightKind::Polynomial(_) => {
                    let lhs = w.eval(eps, x);
                    let dist = (0..d).map(|j| (x[j] - y[j]).powi(2)).sum::<f64>().sqrt();
                    // The integrand's complex singularities sit at distance
                    // ~1/(eps |x - y|) from the real t-axis.
                    let panels = (eps * dist).ceil().max(1.0) as usize;
                    let mut p = [0.0; MAX_DIM];
                    let mut g = [0.0; MAX_DIM];
                    let mut integral = 0.0;
                    for panel in 0..panels {
                        let a = panel as f64 / panels as f64;
                        let bnd = (panel + 1) as f64 / panels as f64;
                        for (t, wt) in rule.on_interval(a, bnd) {
                            for j in 0..d {
                                p[j] = y[j] + t * (x[j] - y[j]);
                            }
                            w.grad(eps, &p[..d], &mut g[..d]);
                            integral += wt * (0..d).map(|j| (x[j] - y[j]) * g[j]).sum::<f64>();
                        }
                    }
                    let rhs = w.eval(eps, y) + integral;
                    (lhs - rhs).abs() / lhs.abs().max(1.0)
                }
            }
        })
        .reduce(|| 0.0, f64::max)
}

/// Amplitude on `(x, y, eta)`.
pub type Amplitude = Box<dyn Fn(&[f64], &[f64], &[f64]) -> Complex64 + Send + Sync>;

/// `min(1, delta / 4)` for a symbol with a holomorphic extension.
pub fn analytic_eps0(sym: &HormanderSymbol) -> Option<f64> {
    sym.strip_delta().map(|delta| (delta / 4.0).min(1.0))
}

fn strip_safe(sym: &HormanderSymbol, eps: f64) -> Result<()> {
    let eps0 =
        analytic_eps0(sym).ok_or_else(|| Error::NotApplicable(format!("`{}` has no analytic extension", sym.id())))?;
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
    }
    if eps > eps0 {
        return Err(Error::StripSafety { eps, eps0 });
    }
    Ok(())
}

fn midpoint(x: &[f64], y: &[f64]) -> [f64; MAX_DIM] {
    let mut m = [0.0; MAX_DIM];
    for j in 0..x.len() {
        m[j] = 0.5 * (x[j] + y[j]);
    }
    m
}

/// `c_eps(x, y, eta) = a~((x + y)/2, eta + i eps b_eps(x, y))`.
pub fn amplitude_c_eps(sym: &HormanderSymbol, eps: f64) -> Result<Amplitude> {
    strip_safe(sym, eps)?;
    let sym = sym.clone();
    let b = BField::new(eps);
    Ok(Box::new(move |x, y, eta| {
        let d = x.len();
        let bv = b.eval(x, y);
        let mid = midpoint(x, y);
        let mut zeta = [Complex64::new(0.0, 0.0); MAX_DIM];
        for j in 0..d {
            zeta[j] = Complex64::new(eta[j], eps * bv[j]);
        }
        sym.analytic_value(&mid[..d], &zeta[..d])
            .expect("strip presence checked on construction")
    }))
}

/// `d_eps(x, y, eta) = i int_0^1 <b_eps, grad_eta a~(mid, eta + i t eps b_eps)> dt`,
/// so that `c_eps = a(mid, eta) + eps d_eps`.
pub fn amplitude_d_eps(sym: &HormanderSymbol, eps: f64) -> Result<Amplitude> {
    strip_safe(sym, eps)?;
    let sym = sym.clone();
    let b = BField::new(eps);
    let rule: Vec<(f64, f64)> = GaussLegendre::new(D_EPS_QUADRATURE_ORDER)
        .on_interval(0.0, 1.0)
        .collect();
    Ok(Box::new(move |x, y, eta| {
        let d = x.len();
        let bv = b.eval(x, y);
        if bv[..d].iter().all(|&v| v == 0.0) {
            return Complex64::new(0.0, 0.0);
        }
        let mid = midpoint(x, y);
        let mut zeta = [Complex64::new(0.0, 0.0); MAX_DIM];
        let mut acc = Complex64::new(0.0, 0.0);
        for &(t, wt) in &rule {
            for j in 0..d {
                zeta[j] = Complex64::new(eta[j], t * eps * bv[j]);
            }
            let g = sym
                .analytic_gradient(&mid[..d], &zeta[..d])
                .expect("strip presence checked on construction");
            let dot: Complex64 = (0..d).map(|j| g[j] * bv[j]).sum();
            acc += dot * wt;
        }
        Complex64::i() * acc
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    /// Slope of `-log|u|` against `<x>`.
    Exponential,
    /// Slope of `-log|u|` against `log <x>`.
    Polynomial,
}

/// Radial window `r1 <= |x| <= r2` for a decay fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub r1: f64,
    pub r2: f64,
}

impl FitWindow {
    /// `[0.35 L, 0.8 L]`.
    pub fn default_for(half_length: f64) -> Self {
        Self {
            r1: 0.35 * half_length,
            r2: 0.8 * half_length,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub mode: FitMode,
    /// Exponential rate or polynomial order.
    pub rate: f64,
    pub r_squared: f64,
    pub window: FitWindow,
    pub samples: usize,
}

/// Least-squares decay fit of `|u|` over a radial window.
pub fn decay_fit(u: &GridFunction, mode: FitMode, window: Option<FitWindow>) -> Result<DecayFit> {
    let grid = u.grid();
    let l = grid.half_length();
    let window = window.unwrap_or_else(|| FitWindow::default_for(l));
    if !(window.r1 < window.r2 && window.r2 <= 0.8 * l + 1e-12) {
        return Err(Error::Parameter(format!(
            "fit window [{}, {}] must satisfy r1 < r2 <= 0.8 L = {}",
            window.r1,
            window.r2,
            0.8 * l
        )));
    }
    let d = grid.dim();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (j, v) in u.values().iter().enumerate() {
        let pos = grid.position(j);
        let r = pos[..d].iter().map(|p| p * p).sum::<f64>().sqrt();
        let mag = v.norm();
        if r < window.r1 || r > window.r2 || mag <= FIT_FLOOR {
            continue;
        }
        let jp = japanese(&pos[..d]);
        xs.push(match mode {
            FitMode::Exponential => jp,
            FitMode::Polynomial => jp.ln(),
        });
        ys.push(-mag.ln());
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientWindow {
            usable: xs.len(),
            required: MIN_FIT_SAMPLES,
        });
    }
    let (slope, r_squared) = linear_fit(&xs, &ys);
    Ok(DecayFit {
        mode,
        rate: slope,
        r_squared,
        window,
        samples: xs.len(),
    })
}

/// Slope and coefficient of determination of an ordinary least-squares line.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, r2)
}

/// `max_j e^{eps <x_j>} |u(x_j)|`.
pub fn decay_certificate(u: &GridFunction, eps: f64) -> f64 {
    let grid = u.grid();
    let d = grid.dim();
    u.values()
        .iter()
        .enumerate()
        .map(|(j, v)| (eps * japanese(&grid.position(j)[..d])).exp() * v.norm())
        .fold(0.0, f64::max)
}

/// `||H_eps (F u) - lambda F u|| / ||F u||` for the conjugated operator.
pub fn eigenvector_correspondence_residual(
    h: &OperatorMatrix,
    w: &WeightFamily,
    eps: f64,
    lambda: f64,
    u: &GridFunction,
) -> Result<f64> {
    let f = weight_ratio_table(h, w, eps)?;
    let conj = conjugate_operator(h, w, eps)?;
    let mut fu = u.values().clone();
    for (v, fj) in fu.iter_mut().zip(&f) {
        *v *= *fj;
    }
    let norm = fu.norm();
    if norm == 0.0 {
        return Err(Error::Parameter("zero eigenvector".into()));
    }
    fu.unscale_mut(norm);
    let r = conj.entries() * &fu - &fu * Complex64::new(lambda, 0.0);
    Ok(r.norm())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eps0Estimate {
    /// `min(1, delta/4)`, only for the exponential weight on symbols with a
    /// holomorphic extension.
    pub analytic_eps0: Option<f64>,
    pub empirical_eps0: Option<f64>,
    pub sweep: BoundSweep,
}

pub fn epsilon0_estimate(
    sym: &HormanderSymbol,
    h: &OperatorMatrix,
    w: &WeightFamily,
    eps_list: &[f64],
) -> Result<Eps0Estimate> {
    let sweep = uniform_bound_sweep(h, w, eps_list)?;
    let analytic_eps0 = if w.is_exponential() { analytic_eps0(sym) } else { None };
    Ok(Eps0Estimate {
        analytic_eps0,
        empirical_eps0: sweep.empirical_eps0,
        sweep,
    })
}
