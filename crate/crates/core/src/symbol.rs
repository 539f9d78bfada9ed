//! Hörmander-class symbols, their derivatives and analytic extensions, and
//! sampled checks of the symbol estimates.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::MAX_DIM;
use crate::potential::{parse_params, PotentialSpec};

/// Largest total derivative order the sampled estimates accept.
pub const DERIVATIVE_BUDGET: usize = 6;

/// Base finite-difference step, scaled by `max(1, |point|)`.
pub const FD_BASE_STEP: f64 = 1e-4;

/// Slack applied to the order-zero seminorm in the Cauchy derivative bound.
pub const CAUCHY_SLACK: f64 = 1.5;

type CoreFn = Arc<dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync>;
type CoreDerivFn = Arc<dyn Fn(&[usize], &[f64], &[f64]) -> Complex64 + Send + Sync>;
type ExtFn = Arc<dyn Fn(&[f64], &[Complex64]) -> Complex64 + Send + Sync>;
type ExtGradFn = Arc<dyn Fn(&[f64], &[Complex64], &mut [Complex64]) + Send + Sync>;

/// `<v> = sqrt(1 + |v|^2)`.
pub fn japanese(v: &[f64]) -> f64 {
    (1.0 + v.iter().map(|t| t * t).sum::<f64>()).sqrt()
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

#[derive(Clone)]
struct AnalyticExtension {
    eval: ExtFn,
    gradient: Option<ExtGradFn>,
    strip_delta: f64,
}

/// A symbol `a(x, eta) = core(x, eta) + v(x)` of order `m` on `R^d x R^d`.
///
/// The core is a callback with optional closed-form eta-derivatives and an
/// optional holomorphic extension in eta to the strip `|Im zeta_j| < delta`.
/// The optional additive potential `v` is kept separate so quantization can
/// place it on the diagonal exactly.
#[derive(Clone)]
pub struct HormanderSymbol {
    id: String,
    dim: usize,
    order: f64,
    core: CoreFn,
    core_deriv: Option<CoreDerivFn>,
    analytic: Option<AnalyticExtension>,
    potential: Option<PotentialSpec>,
    ellipticity: Option<(f64, f64)>,
    real: bool,
    core_x_independent: bool,
    eta_independent: bool,
}

impl fmt::Debug for HormanderSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HormanderSymbol")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("order", &self.order)
            .field("strip_delta", &self.strip_delta())
            .field("real", &self.real)
            .finish()
    }
}

impl HormanderSymbol {
    /// A symbol given by a bare evaluator. Derivatives fall back to finite
    /// differences until a closed form is attached.
    pub fn new<F>(id: impl Into<String>, dim: usize, order: f64, eval: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Complex64 + Send + Sync + 'static,
    {
        assert!((1..=MAX_DIM).contains(&dim), "symbol dimension must be 1 or 2");
        Self {
            id: id.into(),
            dim,
            order,
            core: Arc::new(eval),
            core_deriv: None,
            analytic: None,
            potential: None,
            ellipticity: None,
            real: false,
            core_x_independent: false,
            eta_independent: false,
        }
    }

    pub fn with_eta_derivative<F>(mut self, f: F) -> Self
    where
        F: Fn(&[usize], &[f64], &[f64]) -> Complex64 + Send + Sync + 'static,
    {
        self.core_deriv = Some(Arc::new(f));
        self
    }

    pub fn with_analytic_extension<F>(mut self, strip_delta: f64, f: F) -> Self
    where
        F: Fn(&[f64], &[Complex64]) -> Complex64 + Send + Sync + 'static,
    {
        assert!(strip_delta > 0.0, "strip half-width must be positive");
        self.analytic = Some(AnalyticExtension {
            eval: Arc::new(f),
            gradient: None,
            strip_delta,
        });
        self
    }

    /// Closed-form eta-gradient of the analytic extension, written into the
    /// output slice.
    pub fn with_analytic_gradient<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &[Complex64], &mut [Complex64]) + Send + Sync + 'static,
    {
        let ext = self
            .analytic
            .as_mut()
            .expect("attach the analytic extension before its gradient");
        ext.gradient = Some(Arc::new(f));
        self
    }

    /// Replaces the strip half-width of the analytic extension.
    pub fn with_strip_delta(mut self, strip_delta: f64) -> Self {
        assert!(strip_delta > 0.0, "strip half-width must be positive");
        if let Some(ext) = self.analytic.as_mut() {
            ext.strip_delta = strip_delta;
        }
        self
    }

    pub fn with_ellipticity(mut self, c: f64, r: f64) -> Self {
        self.ellipticity = Some((c, r));
        self
    }

    /// Flags the symbol as real on real frequencies.
    pub fn real(mut self) -> Self {
        self.real = true;
        self
    }

    /// Declares that the core does not depend on `x`.
    pub fn x_independent(mut self) -> Self {
        self.core_x_independent = true;
        self
    }

    /// Declares that the core does not depend on `eta`.
    pub fn eta_independent(mut self) -> Self {
        self.eta_independent = true;
        self
    }

    /// Adds `v(x)` to the symbol. The potential must be regular.
    pub fn with_potential(mut self, potential: PotentialSpec) -> Result<Self> {
        if potential.is_singular() {
            return Err(Error::NotApplicable(
                "singular potentials enter through the form-sum builder, not a symbol".into(),
            ));
        }
        if potential.is_zero() {
            return Ok(self);
        }
        self.id = format!("{}+{}", self.id, potential.id());
        self.potential = Some(potential);
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn is_core_x_independent(&self) -> bool {
        self.core_x_independent
    }

    pub fn is_eta_independent(&self) -> bool {
        self.eta_independent
    }

    pub fn potential(&self) -> Option<&PotentialSpec> {
        self.potential.as_ref()
    }

    pub fn ellipticity(&self) -> Option<(f64, f64)> {
        self.ellipticity
    }

    pub fn strip_delta(&self) -> Option<f64> {
        self.analytic.as_ref().map(|e| e.strip_delta)
    }

    pub fn has_analytic_extension(&self) -> bool {
        self.analytic.is_some()
    }

    fn potential_at(&self, x: &[f64]) -> f64 {
        self.potential.as_ref().map_or(0.0, |p| p.value(x))
    }

    /// The core alone, without the additive potential.
    pub fn core_eval(&self, x: &[f64], eta: &[f64]) -> Complex64 {
        (self.core)(x, eta)
    }

    /// `v(x)`, zero when no potential is attached.
    pub fn potential_value(&self, x: &[f64]) -> f64 {
        self.potential_at(x)
    }

    pub fn eval(&self, x: &[f64], eta: &[f64]) -> Complex64 {
        (self.core)(x, eta) + self.potential_at(x)
    }

    fn check_multi_index(&self, alpha: &[usize]) -> Result<usize> {
        if alpha.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: alpha.len(),
            });
        }
        let total: usize = alpha.iter().sum();
        if total > DERIVATIVE_BUDGET {
            return Err(Error::UnsupportedOrder {
                order: total,
                budget: DERIVATIVE_BUDGET,
            });
        }
        Ok(total)
    }

    /// `d^alpha_eta a(x, eta)`, closed form when attached, otherwise central
    /// finite differences.
    pub fn eta_deriv(&self, alpha: &[usize], x: &[f64], eta: &[f64]) -> Result<Complex64> {
        let total = self.check_multi_index(alpha)?;
        if total == 0 {
            return Ok(self.eval(x, eta));
        }
        if self.eta_independent {
            return Ok(Complex64::new(0.0, 0.0));
        }
        Ok(match &self.core_deriv {
            Some(f) => f(alpha, x, eta),
            None => central_difference(|e| (self.core)(x, e), eta, alpha, None),
        })
    }

    /// Finite-difference eta-derivative with an explicit base step, used to
    /// study the convergence of the default rule.
    pub fn eta_deriv_fd(&self, alpha: &[usize], x: &[f64], eta: &[f64], step: f64) -> Result<Complex64> {
        let total = self.check_multi_index(alpha)?;
        if total == 0 {
            return Ok(self.eval(x, eta));
        }
        Ok(central_difference(|e| (self.core)(x, e), eta, alpha, Some(step)))
    }

    /// Mixed derivative `d^alpha_x d^beta_eta a(x, eta)`; x-derivatives by
    /// finite differences.
    pub fn mixed_deriv(&self, alpha: &[usize], beta: &[usize], x: &[f64], eta: &[f64]) -> Result<Complex64> {
        let ax = self.check_multi_index(alpha)?;
        let bx = self.check_multi_index(beta)?;
        if ax + bx > DERIVATIVE_BUDGET {
            return Err(Error::UnsupportedOrder {
                order: ax + bx,
                budget: DERIVATIVE_BUDGET,
            });
        }
        if ax == 0 {
            return self.eta_deriv(beta, x, eta);
        }
        let zero = Complex64::new(0.0, 0.0);
        if self.core_x_independent {
            if bx > 0 {
                return Ok(zero);
            }
            return Ok(match &self.potential {
                Some(p) => central_difference(|y| Complex64::new(p.value(y), 0.0), x, alpha, None),
                None => zero,
            });
        }
        Ok(central_difference(
            |y| self.eta_deriv(beta, y, eta).unwrap_or(zero),
            x,
            alpha,
            None,
        ))
    }

    /// `a~(x, zeta)` without the strip check.
    pub fn analytic_value(&self, x: &[f64], zeta: &[Complex64]) -> Option<Complex64> {
        self.analytic
            .as_ref()
            .map(|ext| (ext.eval)(x, zeta) + self.potential_at(x))
    }

    /// eta-gradient of `a~(x, zeta)`; closed form when attached, otherwise
    /// central differences along real directions (valid by holomorphy).
    pub fn analytic_gradient(&self, x: &[f64], zeta: &[Complex64]) -> Option<[Complex64; MAX_DIM]> {
        let ext = self.analytic.as_ref()?;
        let mut out = [Complex64::new(0.0, 0.0); MAX_DIM];
        match &ext.gradient {
            Some(g) => g(x, zeta, &mut out[..self.dim]),
            None => {
                let scale = zeta.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1.0);
                let h = FD_BASE_STEP * scale;
                let mut shifted = zeta.to_vec();
                for (j, slot) in out.iter_mut().enumerate().take(self.dim) {
                    shifted[j] = zeta[j] + h;
                    let fp = (ext.eval)(x, &shifted);
                    shifted[j] = zeta[j] - h;
                    let fm = (ext.eval)(x, &shifted);
                    shifted[j] = zeta[j];
                    *slot = (fp - fm) / (2.0 * h);
                }
            }
        }
        Some(out)
    }
}

/// Step for a `k`-th order central difference before scaling.
pub fn fd_step(k: usize) -> f64 {
    FD_BASE_STEP.max(f64::EPSILON.powf(1.0 / (k as f64 + 2.0)))
}

/// Tensor-product central difference of order `alpha` at `point`.
fn central_difference<F>(f: F, point: &[f64], alpha: &[usize], base: Option<f64>) -> Complex64
where
    F: Fn(&[f64]) -> Complex64,
{
    let total: usize = alpha.iter().sum();
    let scale = point.iter().map(|p| p * p).sum::<f64>().sqrt().max(1.0);
    let h = base.unwrap_or_else(|| fd_step(total)) * scale;
    let d = point.len();
    let a0 = alpha[0];
    let a1 = if d > 1 { alpha[1] } else { 0 };
    let mut acc = Complex64::new(0.0, 0.0);
    let mut p = point.to_vec();
    for i0 in 0..=a0 {
        let c0 = stencil_weight(a0, i0);
        p[0] = point[0] + (a0 as f64 / 2.0 - i0 as f64) * h;
        for i1 in 0..=a1 {
            let c1 = stencil_weight(a1, i1);
            if d > 1 {
                p[1] = point[1] + (a1 as f64 / 2.0 - i1 as f64) * h;
            }
            acc += f(&p) * (c0 * c1);
        }
    }
    acc / h.powi(total as i32)
}

/// `(-1)^i binom(k, i)`.
fn stencil_weight(k: usize, i: usize) -> f64 {
    let binom = factorial(k) / (factorial(i) * factorial(k - i));
    if i % 2 == 0 {
        binom
    } else {
        -binom
    }
}

/// `d^alpha_eta g(1 + |eta|^2)` for `g(q) = q^{s/2}`.
fn japanese_power_deriv(s: f64, alpha: &[usize], eta: &[f64]) -> f64 {
    let q = 1.0 + eta.iter().map(|e| e * e).sum::<f64>();
    let total: usize = alpha.iter().sum();
    let g_deriv = |k: usize| -> f64 {
        let coeff: f64 = (0..k).map(|i| s / 2.0 - i as f64).product();
        coeff * q.powf(s / 2.0 - k as f64)
    };
    let a0 = alpha[0];
    let a1 = alpha.get(1).copied().unwrap_or(0);
    let axis = |a: usize, m: usize, e: f64| -> f64 {
        factorial(a) / (factorial(m) * factorial(a - 2 * m)) * (2.0 * e).powi((a - 2 * m) as i32)
    };
    let mut acc = 0.0;
    for m0 in 0..=a0 / 2 {
        let f0 = axis(a0, m0, eta[0]);
        for m1 in 0..=a1 / 2 {
            let f1 = if alpha.len() > 1 { axis(a1, m1, eta[1]) } else { 1.0 };
            acc += f0 * f1 * g_deriv(total - m0 - m1);
        }
    }
    acc
}

fn complex_dot(zeta: &[Complex64]) -> Complex64 {
    zeta.iter().map(|z| z * z).sum()
}

/// Named constructors for the symbols used throughout the toolkit.
pub struct SymbolCatalog;

impl SymbolCatalog {
    /// `p_s(eta) = <eta>^s`, order `s`.
    pub fn p_s(dim: usize, s: f64) -> HormanderSymbol {
        let entire = s >= 0.0 && (s / 2.0).fract() == 0.0;
        let delta = if entire { 1.0 } else { relativistic_strip(dim) };
        let mut sym = HormanderSymbol::new(format!("p_s:s={s}"), dim, s, move |_, eta| {
            Complex64::new(japanese(eta).powf(s), 0.0)
        })
        .with_eta_derivative(move |alpha, _, eta| Complex64::new(japanese_power_deriv(s, alpha, eta), 0.0))
        .with_analytic_extension(delta, move |_, zeta| (1.0 + complex_dot(zeta)).powf(s / 2.0))
        .with_analytic_gradient(move |_, zeta, out| {
            let base = (1.0 + complex_dot(zeta)).powf(s / 2.0 - 1.0);
            for (o, z) in out.iter_mut().zip(zeta) {
                *o = s * z * base;
            }
        })
        .real()
        .x_independent();
        if s == 0.0 {
            sym = sym.eta_independent();
        }
        if s > 0.0 {
            sym = sym.with_ellipticity(1.0, 0.0);
        }
        sym
    }

    /// `<eta>` with the principal-branch extension `(1 + zeta.zeta)^{1/2}`
    /// on the strip of half-width `1 / (2 sqrt d)`.
    pub fn relativistic(dim: usize) -> HormanderSymbol {
        let mut sym = Self::p_s(dim, 1.0);
        sym.id = "relativistic".into();
        sym
    }

    /// `|eta|^2`, order 2, entire.
    pub fn kinetic(dim: usize) -> HormanderSymbol {
        HormanderSymbol::new("kinetic", dim, 2.0, |_, eta| {
            Complex64::new(eta.iter().map(|e| e * e).sum(), 0.0)
        })
        .with_eta_derivative(|alpha, _, eta| {
            let total: usize = alpha.iter().sum();
            let value = match total {
                1 => {
                    let j = alpha.iter().position(|&a| a == 1).unwrap_or(0);
                    2.0 * eta[j]
                }
                2 if alpha.contains(&2) => 2.0,
                _ => 0.0,
            };
            Complex64::new(value, 0.0)
        })
        .with_analytic_extension(1.0, |_, zeta| complex_dot(zeta))
        .with_analytic_gradient(|_, zeta, out| {
            for (o, z) in out.iter_mut().zip(zeta) {
                *o = 2.0 * z;
            }
        })
        .real()
        .x_independent()
        .with_ellipticity(0.5, 1.0)
    }

    /// `a(x, eta) + v(x)` for a regular potential `v`.
    pub fn perturbed(base: HormanderSymbol, potential: PotentialSpec) -> Result<HormanderSymbol> {
        base.with_potential(potential)
    }

    /// The negative-order symbol `<eta>^{-1} (1 + v(x))`.
    pub fn negative_order(dim: usize, modulation: PotentialSpec) -> Result<HormanderSymbol> {
        if modulation.is_singular() {
            return Err(Error::NotApplicable("modulation must be bounded".into()));
        }
        let v = Arc::new(modulation.clone());
        let (v1, v2, v3) = (v.clone(), v.clone(), v);
        let sym = HormanderSymbol::new(format!("p_s:s=-1*(1+{})", modulation.id()), dim, -1.0, move |x, eta| {
            Complex64::new((1.0 + v1.value(x)) / japanese(eta), 0.0)
        })
        .with_eta_derivative(move |alpha, x, eta| {
            Complex64::new((1.0 + v2.value(x)) * japanese_power_deriv(-1.0, alpha, eta), 0.0)
        })
        .with_analytic_extension(relativistic_strip(dim), move |x, zeta| {
            (1.0 + complex_dot(zeta)).powf(-0.5) * (1.0 + v3.value(x))
        })
        .real();
        Ok(sym)
    }

    /// Parses `relativistic`, `kinetic`, `p_s:s=<s>`, optionally followed by
    /// `+<potential id>`.
    pub fn parse(id: &str, dim: usize) -> Result<HormanderSymbol> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Config(format!("symbol dimension must be 1 or 2, got {dim}")));
        }
        let (base_id, potential_id) = match id.split_once('+') {
            Some((b, p)) => (b.trim(), Some(p.trim())),
            None => (id.trim(), None),
        };
        let (name, params) = parse_params(base_id)?;
        let base = match name.as_str() {
            "relativistic" if params.is_empty() => Self::relativistic(dim),
            "kinetic" if params.is_empty() => Self::kinetic(dim),
            "p_s" => {
                let s = *params
                    .get("s")
                    .ok_or_else(|| Error::Config(format!("`{id}` needs parameter `s`")))?;
                if params.len() != 1 {
                    return Err(Error::Config(format!("`{id}` takes only parameter `s`")));
                }
                Self::p_s(dim, s)
            }
            _ => return Err(Error::Config(format!("unknown symbol `{base_id}`"))),
        };
        match potential_id {
            Some(p) => base.with_potential(PotentialSpec::parse(p)?),
            None => Ok(base),
        }
    }
}

/// Strip half-width `1 / (2 sqrt d)` for `<eta>^s` with non-polynomial `s`.
pub fn relativistic_strip(dim: usize) -> f64 {
    0.5 / (dim as f64).sqrt()
}

/// A symmetric sampling region `[-x_radius, x_radius]^d x [-eta_radius, eta_radius]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub x_radius: f64,
    pub eta_radius: f64,
}

impl SampleBox {
    pub fn new(x_radius: f64, eta_radius: f64) -> Self {
        Self { x_radius, eta_radius }
    }

    fn validate(&self) -> Result<()> {
        let ok = |r: f64| r.is_finite() && r >= 0.0;
        if ok(self.x_radius) && ok(self.eta_radius) {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid sample box {self:?}")))
        }
    }

    /// Lattice density giving about 64 points per axis on the larger side.
    pub fn default_density(&self) -> usize {
        let r = self.x_radius.max(self.eta_radius);
        if r <= 0.0 {
            1
        } else {
            ((32.0 / r).ceil() as usize).max(1)
        }
    }
}

/// Points `k / density` with `|k / density| <= radius`.
fn anchored_axis(radius: f64, density: usize) -> Vec<f64> {
    let density = density.max(1) as f64;
    let k_max = (radius * density + 1e-9).floor() as i64;
    (-k_max..=k_max).map(|k| k as f64 / density).collect()
}

fn tensor_lattice(axis: &[f64], dim: usize) -> Vec<[f64; MAX_DIM]> {
    match dim {
        1 => axis.iter().map(|&a| [a, 0.0]).collect(),
        _ => axis.iter().flat_map(|&a| axis.iter().map(move |&b| [a, b])).collect(),
    }
}

/// Sampled seminorm `sup <eta>^{-m+|beta|} |d^alpha_x d^beta_eta a(x, eta)|`.
pub fn seminorm_estimate(
    sym: &HormanderSymbol,
    alpha: &[usize],
    beta: &[usize],
    sample: &SampleBox,
    grid_density: usize,
) -> Result<f64> {
    sample.validate()?;
    let ax = sym.check_multi_index(alpha)?;
    let bx = sym.check_multi_index(beta)?;
    if ax + bx > DERIVATIVE_BUDGET {
        return Err(Error::UnsupportedOrder {
            order: ax + bx,
            budget: DERIVATIVE_BUDGET,
        });
    }
    let d = sym.dim();
    let x_matters = !sym.core_x_independent || (bx == 0 && sym.potential.is_some());
    let xs = if x_matters {
        tensor_lattice(&anchored_axis(sample.x_radius, grid_density), d)
    } else {
        vec![[0.0; MAX_DIM]]
    };
    let etas = tensor_lattice(&anchored_axis(sample.eta_radius, grid_density), d);
    let weight_power = -sym.order() + bx as f64;
    let values: Result<Vec<f64>> = xs
        .par_iter()
        .map(|x| {
            let mut best = 0.0f64;
            for eta in &etas {
                let v = sym.mixed_deriv(alpha, beta, &x[..d], &eta[..d])?;
                best = best.max(japanese(&eta[..d]).powf(weight_power) * v.norm());
            }
            Ok(best)
        })
        .collect();
    Ok(values?.into_iter().fold(0.0, f64::max))
}

/// Outcome of [`ellipticity_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    pub is_elliptic: bool,
    pub c_hat: f64,
    pub r_hat: f64,
}

const ELLIPTICITY_X_RADIUS: f64 = 8.0;
const ELLIPTICITY_X_POINTS: usize = 17;
const ELLIPTICITY_RADIAL_POINTS: usize = 64;
const ELLIPTICITY_ANGLES: usize = 32;

/// Sampled lower bound `|a(x, eta)| >= C <eta>^m` for large `|eta|`.
pub fn ellipticity_check(sym: &HormanderSymbol, box_radius: f64) -> Result<EllipticityReport> {
    let m = sym.order();
    if m <= 0.0 {
        return Err(Error::NotApplicable(format!(
            "ellipticity needs positive order, got {m}"
        )));
    }
    if !(box_radius.is_finite() && box_radius >= 2.0) {
        return Err(Error::Parameter(format!(
            "ellipticity scan needs box radius >= 2, got {box_radius}"
        )));
    }
    let d = sym.dim();
    let xs: Vec<[f64; MAX_DIM]> = if sym.core_x_independent && sym.potential.is_none() {
        vec![[0.0; MAX_DIM]]
    } else {
        let step = 2.0 * ELLIPTICITY_X_RADIUS / (ELLIPTICITY_X_POINTS - 1) as f64;
        let axis: Vec<f64> = (0..ELLIPTICITY_X_POINTS)
            .map(|i| -ELLIPTICITY_X_RADIUS + i as f64 * step)
            .collect();
        tensor_lattice(&axis, d)
    };
    let directions: Vec<[f64; MAX_DIM]> = match d {
        1 => vec![[1.0, 0.0], [-1.0, 0.0]],
        _ => (0..ELLIPTICITY_ANGLES)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / ELLIPTICITY_ANGLES as f64;
                [th.cos(), th.sin()]
            })
            .collect(),
    };
    // Dyadic shells [2^k, 2^{k+1}] up to the box, sampled uniformly in radius.
    let mut shells = Vec::new();
    let mut lo = 1.0;
    while lo < box_radius {
        let hi = (2.0 * lo).min(box_radius);
        shells.push((lo, hi));
        lo *= 2.0;
    }
    // Per shell: min |a| / <eta>^m, and whether Re a changes sign along a ray.
    let mut min_ratio = vec![f64::INFINITY; shells.len()];
    let mut change_shells = vec![false; shells.len()];
    for x in &xs {
        for dir in &directions {
            let mut last_sign = 0.0f64;
            for (si, &(a, b)) in shells.iter().enumerate() {
                for i in 0..=ELLIPTICITY_RADIAL_POINTS {
                    let r = a + (b - a) * i as f64 / ELLIPTICITY_RADIAL_POINTS as f64;
                    let eta = [r * dir[0], r * dir[1]];
                    let v = sym.eval(&x[..d], &eta[..d]);
                    let ratio = v.norm() / japanese(&eta[..d]).powf(m);
                    min_ratio[si] = min_ratio[si].min(ratio);
                    if sym.is_real() && v.re != 0.0 {
                        let sign = v.re.signum();
                        if last_sign != 0.0 && sign != last_sign {
                            change_shells[si] = true;
                        }
                        last_sign = sign;
                    }
                }
            }
        }
    }
    // C(R_k) = min over shells at or beyond k.
    let mut tail_min = vec![f64::INFINITY; shells.len()];
    let mut running = f64::INFINITY;
    for k in (0..shells.len()).rev() {
        running = running.min(min_ratio[k]);
        tail_min[k] = running;
    }
    let last = shells.len() - 1;
    let reference = tail_min[last];
    let k_hat = (0..shells.len())
        .find(|&k| tail_min[k] >= 0.5 * reference)
        .unwrap_or(last);
    let c_hat = tail_min[k_hat];
    let r_hat = shells[k_hat].0;
    let sign_change = change_shells[k_hat..].iter().any(|&c| c);
    Ok(EllipticityReport {
        is_elliptic: c_hat > 1e-8 && !sign_change,
        c_hat,
        r_hat,
    })
}

/// Outcome of [`cauchy_derivative_bound_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CauchyReport {
    pub passed: bool,
    pub worst_ratio: f64,
}

fn multi_indices(dim: usize, max_order: usize) -> Vec<[usize; MAX_DIM]> {
    let mut out = Vec::new();
    for a0 in 0..=max_order {
        if dim == 1 {
            out.push([a0, 0]);
        } else {
            for a1 in 0..=(max_order - a0) {
                out.push([a0, a1]);
            }
        }
    }
    out
}

/// Checks `|d^alpha_eta a| <= C (2/delta)^{|alpha|} alpha! <eta>^m` on
/// samples, with `C` the sampled order-zero seminorm times [`CAUCHY_SLACK`].
pub fn cauchy_derivative_bound_check(
    sym: &HormanderSymbol,
    max_order: usize,
    sample: &SampleBox,
) -> Result<CauchyReport> {
    let delta = sym
        .strip_delta()
        .ok_or_else(|| Error::NotApplicable(format!("`{}` has no analytic extension", sym.id())))?;
    if max_order > DERIVATIVE_BUDGET {
        return Err(Error::UnsupportedOrder {
            order: max_order,
            budget: DERIVATIVE_BUDGET,
        });
    }
    let d = sym.dim();
    let density = sample.default_density();
    let zero = [0usize; MAX_DIM];
    let c = CAUCHY_SLACK * seminorm_estimate(sym, &zero[..d], &zero[..d], sample, density)?;
    let xs = if sym.core_x_independent && sym.potential.is_none() {
        vec![[0.0; MAX_DIM]]
    } else {
        tensor_lattice(&anchored_axis(sample.x_radius, density), d)
    };
    let etas = tensor_lattice(&anchored_axis(sample.eta_radius, density), d);
    let mut worst = 0.0f64;
    for alpha in multi_indices(d, max_order) {
        let total: usize = alpha[..d].iter().sum();
        let alpha_fact: f64 = alpha[..d].iter().map(|&a| factorial(a)).product();
        let prefactor = c * (2.0 / delta).powi(total as i32) * alpha_fact;
        let local: Result<Vec<f64>> = xs
            .par_iter()
            .map(|x| {
                let mut w = 0.0f64;
                for eta in &etas {
                    let lhs = sym.eta_deriv(&alpha[..d], &x[..d], &eta[..d])?.norm();
                    let rhs = prefactor * japanese(&eta[..d]).powf(sym.order());
                    w = w.max(lhs / rhs);
                }
                Ok(w)
            })
            .collect();
        worst = local?.into_iter().fold(worst, f64::max);
    }
    Ok(CauchyReport {
        passed: worst <= 1.0,
        worst_ratio: worst,
    })
}

/// `a~(x, eta + i xi)` inside the strip `max_j |xi_j| < delta`.
pub fn eval_analytic(sym: &HormanderSymbol, x: &[f64], eta: &[f64], xi: &[f64]) -> Result<Complex64> {
    let delta = sym
        .strip_delta()
        .ok_or_else(|| Error::NotApplicable(format!("`{}` has no analytic extension", sym.id())))?;
    if eta.len() != sym.dim() || xi.len() != sym.dim() {
        return Err(Error::DimensionMismatch {
            expected: sym.dim(),
            found: eta.len().max(xi.len()),
        });
    }
    let worst = xi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if worst >= delta {
        return Err(Error::StripViolation { xi: worst, delta });
    }
    let zeta: Vec<Complex64> = eta.iter().zip(xi).map(|(&e, &s)| Complex64::new(e, s)).collect();
    Ok(sym.analytic_value(x, &zeta).expect("strip presence checked above"))
}
