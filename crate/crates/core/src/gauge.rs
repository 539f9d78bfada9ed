//! Magnetic fields, vector potentials in the transversal gauge, and the
//! magnetic phase along straight segments.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::MAX_DIM;
use crate::potential::parse_params;
use crate::quadrature::GaussLegendre;

/// Default Gauss–Legendre order for segment integrals.
pub const PHASE_QUADRATURE_ORDER: usize = 16;

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// How much structure a field has; constant fields admit exact shortcuts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldKind {
    Zero,
    Constant(f64),
    General,
}

/// A magnetic 2-form. Only the component `B_12` exists for `d <= 2`, so
/// antisymmetry and closedness hold by construction.
#[derive(Clone)]
pub struct MagneticField {
    id: String,
    dim: usize,
    kind: FieldKind,
    b12: Option<ScalarFn>,
}

impl fmt::Debug for MagneticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MagneticField")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .finish()
    }
}

impl MagneticField {
    pub fn zero(dim: usize) -> Self {
        Self {
            id: "zero".into(),
            dim,
            kind: FieldKind::Zero,
            b12: None,
        }
    }

    /// Constant `B_12 = b` in two dimensions.
    pub fn constant_2d(b: f64) -> Self {
        Self {
            id: format!("constant2d:b={b}"),
            dim: 2,
            kind: FieldKind::Constant(b),
            b12: Some(Arc::new(move |_| b)),
        }
    }

    /// `B_12(x) = amp * cos(x_1)` in two dimensions.
    pub fn cos_2d(amp: f64) -> Self {
        Self::general_2d(format!("cos2d:amp={amp}"), move |x| amp * x[0].cos())
    }

    pub fn general_2d<F>(id: impl Into<String>, b12: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            id: id.into(),
            dim: 2,
            kind: FieldKind::General,
            b12: Some(Arc::new(b12)),
        }
    }

    /// Parses `zero`, `constant2d:b=<b>` or `cos2d:amp=<a>`.
    pub fn parse(id: &str, dim: usize) -> Result<Self> {
        let (name, params) = parse_params(id)?;
        let param = |key: &str, default: f64| -> Result<f64> {
            for k in params.keys() {
                if k != key {
                    return Err(Error::Config(format!("field `{name}` has no parameter `{k}`")));
                }
            }
            Ok(params.get(key).copied().unwrap_or(default))
        };
        let needs_2d = |f: Self| -> Result<Self> {
            if dim == 2 {
                Ok(f)
            } else {
                Err(Error::Config(format!("field `{id}` needs d = 2, got d = {dim}")))
            }
        };
        match name.as_str() {
            "zero" if params.is_empty() => Ok(Self::zero(dim)),
            "constant2d" => needs_2d(Self::constant_2d(param("b", 1.0)?)),
            "cos2d" => needs_2d(Self::cos_2d(param("amp", 1.0)?)),
            _ => Err(Error::Config(format!("unknown field `{id}`"))),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    /// `B_jk(x)` with zero-based indices.
    pub fn component(&self, j: usize, k: usize, x: &[f64]) -> f64 {
        let Some(b) = &self.b12 else { return 0.0 };
        match (j, k) {
            (0, 1) => b(x),
            (1, 0) => -b(x),
            _ => 0.0,
        }
    }

    /// Largest `|B_12|` over the given sample points.
    pub fn max_strength(&self, points: &[[f64; MAX_DIM]]) -> f64 {
        match self.kind {
            FieldKind::Zero => 0.0,
            FieldKind::Constant(b) => b.abs(),
            FieldKind::General => points
                .iter()
                .map(|p| self.component(0, 1, &p[..self.dim]).abs())
                .fold(0.0, f64::max),
        }
    }
}

/// A field together with a vector potential `A` with `dA = B`.
#[derive(Clone)]
pub struct GaugeData {
    field: MagneticField,
    potential: Option<VectorFn>,
    affine: bool,
    quadrature: GaussLegendre,
    label: String,
}

impl fmt::Debug for GaugeData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaugeData")
            .field("field", &self.field)
            .field("label", &self.label)
            .field("affine", &self.affine)
            .field("quadrature_order", &self.quadrature.order())
            .finish()
    }
}

/// Vector potential in the transversal gauge,
/// `A_j(x) = -sum_k x_k int_0^1 s B_jk(s x) ds`.
pub fn transversal_gauge(field: &MagneticField) -> GaugeData {
    let potential: Option<VectorFn> = match field.kind {
        FieldKind::Zero => None,
        FieldKind::Constant(b) => Some(Arc::new(move |x: &[f64], out: &mut [f64]| {
            out[0] = -0.5 * b * x[1];
            out[1] = 0.5 * b * x[0];
        })),
        FieldKind::General => {
            let b12 = field.b12.clone().expect("general fields carry B_12");
            let gl: Vec<(f64, f64)> = GaussLegendre::new(PHASE_QUADRATURE_ORDER).unit();
            Some(Arc::new(move |x: &[f64], out: &mut [f64]| {
                let moment: f64 = gl.iter().map(|&(s, w)| w * s * b12(&[s * x[0], s * x[1]])).sum();
                // B_12 = -B_21: A_1 = -x_2 m, A_2 = x_1 m.
                out[0] = -x[1] * moment;
                out[1] = x[0] * moment;
            }))
        }
    };
    GaugeData {
        affine: !matches!(field.kind, FieldKind::General),
        label: format!("transversal({})", field.id),
        field: field.clone(),
        potential,
        quadrature: GaussLegendre::new(PHASE_QUADRATURE_ORDER),
    }
}

impl GaugeData {
    /// The zero field with `A = 0`.
    pub fn free(dim: usize) -> Self {
        transversal_gauge(&MagneticField::zero(dim))
    }

    /// An explicitly supplied potential. `affine` enables the exact midpoint
    /// rule for segment integrals and must only be set for affine `A`.
    pub fn with_potential<F>(field: MagneticField, label: impl Into<String>, affine: bool, a: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            field,
            potential: Some(Arc::new(a)),
            affine,
            quadrature: GaussLegendre::new(PHASE_QUADRATURE_ORDER),
            label: label.into(),
        }
    }

    pub fn with_quadrature_order(mut self, order: usize) -> Self {
        self.quadrature = GaussLegendre::new(order);
        self
    }

    pub fn field(&self) -> &MagneticField {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.field.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature.order()
    }

    /// True when `A` vanishes identically, so every phase is 1.
    pub fn is_trivial(&self) -> bool {
        self.potential.is_none()
    }

    /// `A(x)`; entries beyond the dimension are zero.
    pub fn vector_potential(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let mut out = [0.0; MAX_DIM];
        if let Some(a) = &self.potential {
            a(x, &mut out[..self.dim()]);
        }
        out
    }

    /// `int_0^1 <y - x, A(x + s (y - x))> ds`.
    pub fn line_integral(&self, x: &[f64], y: &[f64]) -> f64 {
        let Some(a) = &self.potential else { return 0.0 };
        let d = self.dim();
        let mut diff = [0.0; MAX_DIM];
        for i in 0..d {
            diff[i] = y[i] - x[i];
        }
        if diff[..d].iter().all(|&v| v == 0.0) {
            return 0.0;
        }
        let mut point = [0.0; MAX_DIM];
        let mut value = [0.0; MAX_DIM];
        let mut along = |s: f64| -> f64 {
            for i in 0..d {
                point[i] = x[i] + s * diff[i];
            }
            a(&point[..d], &mut value[..d]);
            (0..d).map(|i| diff[i] * value[i]).sum()
        };
        if self.affine {
            along(0.5)
        } else {
            self.quadrature.on_interval(0.0, 1.0).map(|(s, w)| w * along(s)).sum()
        }
    }

    /// `omega^A(x, y) = exp(-i int_[x,y] A)`.
    pub fn phase(&self, x: &[f64], y: &[f64]) -> Complex64 {
        if self.potential.is_none() {
            return Complex64::new(1.0, 0.0);
        }
        Complex64::from_polar(1.0, -self.line_integral(x, y))
    }

    /// Largest central-difference residual of `dA = B` over the points.
    pub fn curl_residual(&self, points: &[[f64; MAX_DIM]]) -> f64 {
        if self.dim() < 2 {
            return 0.0;
        }
        let h = 1e-5;
        points
            .iter()
            .map(|p| {
                let a_at = |dx: f64, dy: f64| self.vector_potential(&[p[0] + dx, p[1] + dy]);
                let d1a2 = (a_at(h, 0.0)[1] - a_at(-h, 0.0)[1]) / (2.0 * h);
                let d2a1 = (a_at(0.0, h)[0] - a_at(0.0, -h)[0]) / (2.0 * h);
                (d1a2 - d2a1 - self.field.component(0, 1, &p[..2])).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `int_[x,y] A`, see [`GaugeData::line_integral`].
pub fn line_integral_a(g: &GaugeData, x: &[f64], y: &[f64]) -> f64 {
    g.line_integral(x, y)
}

/// `omega^A(x, y)`, see [`GaugeData::phase`].
pub fn magnetic_phase(g: &GaugeData, x: &[f64], y: &[f64]) -> Complex64 {
    g.phase(x, y)
}

/// `A' = A + grad chi`, same field. Without a supplied gradient, `grad chi`
/// is taken by central differences.
pub fn gauge_transform<C>(
    g: &GaugeData,
    chi: C,
    grad: Option<Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>>,
) -> GaugeData
where
    C: Fn(&[f64]) -> f64 + Send + Sync + 'static,
{
    let d = g.dim();
    let base = g.clone();
    let chi = Arc::new(chi);
    let grad: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync> = match grad {
        Some(f) => f,
        None => {
            let chi = chi.clone();
            Arc::new(move |x: &[f64], out: &mut [f64]| {
                let mut p = x.to_vec();
                for i in 0..x.len() {
                    let h = 1e-6 * x[i].abs().max(1.0);
                    p[i] = x[i] + h;
                    let fp = chi(&p);
                    p[i] = x[i] - h;
                    let fm = chi(&p);
                    p[i] = x[i];
                    out[i] = (fp - fm) / (2.0 * h);
                }
            })
        }
    };
    GaugeData {
        field: g.field.clone(),
        potential: Some(Arc::new(move |x: &[f64], out: &mut [f64]| {
            let a = base.vector_potential(x);
            grad(x, out);
            for i in 0..d {
                out[i] += a[i];
            }
        })),
        affine: false,
        quadrature: g.quadrature.clone(),
        label: format!("{}+grad(chi)", g.label),
    }
}
