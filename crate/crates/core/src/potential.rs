//! Scalar potentials `V = V_+ - V_-` and their catalog identifiers.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;

type ProfileFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A nonnegative radial or custom profile used as `V_+` or `V_-`.
#[derive(Clone)]
pub enum Profile {
    /// `depth * exp(-|x|^2 / width^2)`.
    Gaussian {
        depth: f64,
        width: f64,
    },
    /// `alpha / <x>`, a Coulomb tail with the origin smoothed out.
    SoftCoulomb {
        alpha: f64,
    },
    /// `height * exp(1 - 1 / (1 - |x|^2 / radius^2))` inside the ball, zero outside.
    Bump {
        height: f64,
        radius: f64,
    },
    /// `slope * (<x> - 1)`.
    Confining {
        slope: f64,
    },
    /// `alpha * |x|^{-gamma}`, singular at the origin.
    InversePower {
        alpha: f64,
        gamma: f64,
    },
    Custom {
        name: String,
        f: ProfileFn,
    },
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Gaussian { depth, width } => {
                write!(f, "Gaussian {{ depth: {depth}, width: {width} }}")
            }
            Profile::SoftCoulomb { alpha } => write!(f, "SoftCoulomb {{ alpha: {alpha} }}"),
            Profile::Bump { height, radius } => {
                write!(f, "Bump {{ height: {height}, radius: {radius} }}")
            }
            Profile::Confining { slope } => write!(f, "Confining {{ slope: {slope} }}"),
            Profile::InversePower { alpha, gamma } => {
                write!(f, "InversePower {{ alpha: {alpha}, gamma: {gamma} }}")
            }
            Profile::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

fn japanese(x: &[f64]) -> f64 {
    (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

impl Profile {
    pub fn custom<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Profile::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match *self {
            Profile::Gaussian { depth, width } => depth * (-r2 / (width * width)).exp(),
            Profile::SoftCoulomb { alpha } => alpha / japanese(x),
            Profile::Bump { height, radius } => {
                let s = r2 / (radius * radius);
                if s < 1.0 {
                    height * (1.0 - 1.0 / (1.0 - s)).exp()
                } else {
                    0.0
                }
            }
            Profile::Confining { slope } => slope * (japanese(x) - 1.0),
            Profile::InversePower { alpha, gamma } => alpha * r2.sqrt().powf(-gamma),
            Profile::Custom { ref f, .. } => f(x),
        }
    }

    pub fn is_singular(&self) -> bool {
        matches!(self, Profile::InversePower { .. })
    }

    /// Average of the profile over the 1-d cell `[x - h/2, x + h/2]`.
    ///
    /// Exact for the inverse-power profile; midpoint value otherwise.
    pub fn cell_average_1d(&self, x: f64, h: f64) -> f64 {
        match *self {
            Profile::InversePower { alpha, gamma } => {
                let antiderivative = |y: f64| y.signum() * y.abs().powf(1.0 - gamma) / (1.0 - gamma);
                alpha * (antiderivative(x + 0.5 * h) - antiderivative(x - 0.5 * h)) / h
            }
            _ => self.value(&[x]),
        }
    }

    /// Maximum of profiles that peak at the origin; `None` for growing,
    /// singular or custom profiles.
    pub fn peak(&self) -> Option<f64> {
        match *self {
            Profile::Gaussian { depth, .. } => Some(depth),
            Profile::SoftCoulomb { alpha } => Some(alpha),
            Profile::Bump { height, .. } => Some(height),
            Profile::Confining { .. } | Profile::InversePower { .. } | Profile::Custom { .. } => None,
        }
    }
}

/// A potential split into its positive and negative parts.
#[derive(Clone, Debug)]
pub struct PotentialSpec {
    id: String,
    plus: Option<Profile>,
    minus: Option<Profile>,
}

impl PotentialSpec {
    pub fn zero() -> Self {
        Self {
            id: "zero".into(),
            plus: None,
            minus: None,
        }
    }

    pub fn new(id: impl Into<String>, plus: Option<Profile>, minus: Option<Profile>) -> Self {
        Self {
            id: id.into(),
            plus,
            minus,
        }
    }

    /// Attractive Gaussian well `V_- = depth * exp(-|x|^2 / width^2)`.
    pub fn gauss_well(depth: f64, width: f64) -> Self {
        Self::new(
            format!("gauss_well:depth={depth},width={width}"),
            None,
            Some(Profile::Gaussian { depth, width }),
        )
    }

    pub fn confining(slope: f64) -> Self {
        Self::new(
            format!("confining:slope={slope}"),
            Some(Profile::Confining { slope }),
            None,
        )
    }

    /// Parses identifiers such as `gauss_well:depth=2,width=1`, `coulomb_like:alpha=0.5`,
    /// `bounded_bump`, `confining:slope=1`, `inverse_power:alpha=1,gamma=0.5` or `zero`.
    pub fn parse(id: &str) -> Result<Self> {
        let (name, params) = parse_params(id)?;
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            params
                .get(key)
                .copied()
                .or(default)
                .ok_or_else(|| Error::Config(format!("potential `{id}` needs parameter `{key}`")))
        };
        let known = |keys: &[&str]| -> Result<()> {
            for k in params.keys() {
                if !keys.contains(&k.as_str()) {
                    return Err(Error::Config(format!("potential `{name}` has no parameter `{k}`")));
                }
            }
            Ok(())
        };
        let spec = match name.as_str() {
            "zero" => {
                known(&[])?;
                Self::zero()
            }
            "gauss_well" => {
                known(&["depth", "width"])?;
                let depth = get("depth", None)?;
                let width = get("width", Some(1.0))?;
                if depth < 0.0 || width <= 0.0 {
                    return Err(Error::Config(format!(
                        "gauss_well needs depth >= 0 and width > 0 in `{id}`"
                    )));
                }
                Self::gauss_well(depth, width)
            }
            "coulomb_like" => {
                known(&["alpha"])?;
                let alpha = get("alpha", None)?;
                if alpha < 0.0 {
                    return Err(Error::Config(format!("coulomb_like needs alpha >= 0 in `{id}`")));
                }
                Self::new(
                    format!("coulomb_like:alpha={alpha}"),
                    None,
                    Some(Profile::SoftCoulomb { alpha }),
                )
            }
            "bounded_bump" => {
                known(&["height", "radius"])?;
                let height = get("height", Some(1.0))?;
                let radius = get("radius", Some(1.0))?;
                if radius <= 0.0 {
                    return Err(Error::Config(format!("bounded_bump needs radius > 0 in `{id}`")));
                }
                let canonical = format!("bounded_bump:height={height},radius={radius}");
                let profile = Profile::Bump {
                    height: height.abs(),
                    radius,
                };
                if height >= 0.0 {
                    Self::new(canonical, Some(profile), None)
                } else {
                    Self::new(canonical, None, Some(profile))
                }
            }
            "confining" => {
                known(&["slope"])?;
                let slope = get("slope", Some(1.0))?;
                if slope < 0.0 {
                    return Err(Error::Config(format!("confining needs slope >= 0 in `{id}`")));
                }
                Self::confining(slope)
            }
            "inverse_power" => {
                known(&["alpha", "gamma"])?;
                let alpha = get("alpha", Some(1.0))?;
                let gamma = get("gamma", None)?;
                if alpha < 0.0 || !(0.0..1.0).contains(&gamma) {
                    return Err(Error::Config(format!(
                        "inverse_power needs alpha >= 0 and 0 <= gamma < 1 in `{id}`"
                    )));
                }
                Self::new(
                    format!("inverse_power:alpha={alpha},gamma={gamma}"),
                    None,
                    Some(Profile::InversePower { alpha, gamma }),
                )
            }
            other => return Err(Error::Config(format!("unknown potential `{other}`"))),
        };
        Ok(spec)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn plus(&self) -> Option<&Profile> {
        self.plus.as_ref()
    }

    pub fn minus(&self) -> Option<&Profile> {
        self.minus.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.plus.is_none() && self.minus.is_none()
    }

    pub fn is_singular(&self) -> bool {
        self.plus.as_ref().is_some_and(Profile::is_singular) || self.minus.as_ref().is_some_and(Profile::is_singular)
    }

    pub fn v_plus(&self, x: &[f64]) -> f64 {
        self.plus.as_ref().map_or(0.0, |p| p.value(x))
    }

    pub fn v_minus(&self, x: &[f64]) -> f64 {
        self.minus.as_ref().map_or(0.0, |p| p.value(x))
    }

    /// `V(x) = V_+(x) - V_-(x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.v_plus(x) - self.v_minus(x)
    }

    /// The attractive part alone, as a potential `-V_-`.
    pub fn negative_part(&self) -> Self {
        Self {
            id: format!("-({})_-", self.id),
            plus: None,
            minus: self.minus.clone(),
        }
    }

    /// Node values of `(V_+, V_-)` on a grid, with singular parts replaced by
    /// exact cell averages.
    pub fn node_values(&self, grid: &Grid) -> Result<(Vec<f64>, Vec<f64>)> {
        let sample = |profile: Option<&Profile>| -> Result<Vec<f64>> {
            let Some(p) = profile else {
                return Ok(vec![0.0; grid.size()]);
            };
            if p.is_singular() && grid.dim() != 1 {
                return Err(Error::NotApplicable(
                    "singular potentials are supported in one dimension only".into(),
                ));
            }
            let d = grid.dim();
            let h = grid.spacing();
            (0..grid.size())
                .map(|j| {
                    let x = grid.position(j);
                    let v = if p.is_singular() {
                        p.cell_average_1d(x[0], h)
                    } else {
                        p.value(&x[..d])
                    };
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::Domain(format!(
                            "potential `{}` is not finite at {:?}",
                            self.id,
                            &x[..d]
                        )))
                    }
                })
                .collect()
        };
        Ok((sample(self.plus.as_ref())?, sample(self.minus.as_ref())?))
    }
}

/// Splits `name:key=value,key=value` into the name and numeric parameters.
/// The Unicode minus sign is accepted in values.
pub(crate) fn parse_params(id: &str) -> Result<(String, BTreeMap<String, f64>)> {
    let id = id.trim();
    let (name, rest) = match id.split_once(':') {
        Some((n, r)) => (n.trim(), Some(r)),
        None => (id, None),
    };
    if name.is_empty() {
        return Err(Error::Config(format!("empty identifier in `{id}`")));
    }
    let mut params = BTreeMap::new();
    if let Some(rest) = rest {
        for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got `{pair}` in `{id}`")))?;
            let v = v.trim().replace('\u{2212}', "-");
            let value: f64 = v
                .parse()
                .map_err(|_| Error::Config(format!("`{v}` is not a number in `{id}`")))?;
            params.insert(k.trim().to_string(), value);
        }
    }
    Ok((name.to_string(), params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_well_is_attractive() {
        let v = PotentialSpec::parse("gauss_well:depth=2,width=1").unwrap();
        assert_eq!(v.value(&[0.0]), -2.0);
        assert!((v.value(&[1.0]) + 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(v.v_plus(&[0.3]), 0.0);
    }

    #[test]
    fn unknown_names_and_parameters_are_rejected() {
        assert!(PotentialSpec::parse("harmonic").is_err());
        assert!(PotentialSpec::parse("gauss_well:depth=2,radius=1").is_err());
        assert!(PotentialSpec::parse("gauss_well:depth=x").is_err());
    }

    #[test]
    fn unicode_minus_is_accepted() {
        let (_, p) = parse_params("p_s:s=\u{2212}1").unwrap();
        assert_eq!(p["s"], -1.0);
    }

    #[test]
    fn bump_is_compactly_supported() {
        let v = PotentialSpec::parse("bounded_bump").unwrap();
        assert_eq!(v.value(&[1.0]), 0.0);
        assert_eq!(v.value(&[0.0]), 1.0);
        assert!(v.value(&[0.5]) > 0.0);
    }

    #[test]
    fn singular_cell_average_matches_quadrature() {
        let p = Profile::InversePower { alpha: 1.0, gamma: 0.5 };
        // Cell [0.5, 1.5]: integral of y^{-1/2} is 2(sqrt(1.5) - sqrt(0.5)).
        let exact = 2.0 * (1.5f64.sqrt() - 0.5f64.sqrt());
        assert!((p.cell_average_1d(1.0, 1.0) - exact).abs() < 1e-14);
        // Cell centred on the singularity: 2 * 2 sqrt(h/2) / h.
        let h: f64 = 0.25;
        let exact0 = 4.0 * (0.5 * h).sqrt() / h;
        assert!((p.cell_average_1d(0.0, h) - exact0).abs() < 1e-13);
    }

    #[test]
    fn node_values_are_finite_for_singular_wells() {
        let grid = Grid::new(1, 4.0, 16).unwrap();
        let v = PotentialSpec::parse("inverse_power:alpha=1,gamma=0.5").unwrap();
        let (plus, minus) = v.node_values(&grid).unwrap();
        assert!(plus.iter().all(|&p| p == 0.0));
        assert!(minus.iter().all(|m| m.is_finite() && *m > 0.0));
    }
}
