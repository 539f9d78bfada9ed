use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::decay::{FitWindow, WeightFamily};
use crate::error::{Error, Result};
use crate::gauge::{transversal_gauge, GaugeData, MagneticField};
use crate::grid::Grid;
use crate::persist::content_hash;
use crate::potential::PotentialSpec;
use crate::symbol::{HormanderSymbol, SymbolCatalog};

/// Required ratio of the top grid frequency to the momentum scale.
pub const FREQUENCY_HEADROOM: f64 = 8.0;

pub const DEFAULT_EPS_LIST: [f64; 4] = [0.0125, 0.025, 0.05, 0.1];

/// The verification suites a scenario can select.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    QuantizeCore,
    LemmasWeights,
    Thm1RapidDecay,
    Thm2ExpDecay,
    Thm3Relativistic,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::QuantizeCore,
        Suite::LemmasWeights,
        Suite::Thm1RapidDecay,
        Suite::Thm2ExpDecay,
        Suite::Thm3Relativistic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::QuantizeCore => "quantize-core",
            Suite::LemmasWeights => "lemmas-weights",
            Suite::Thm1RapidDecay => "thm1-rapid-decay",
            Suite::Thm2ExpDecay => "thm2-exp-decay",
            Suite::Thm3Relativistic => "thm3-relativistic",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::UnknownSuite(s.to_string()))
    }
}

/// Torus grid: dimension `d`, half-length `L`, points per axis `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub half_length: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum WeightKindName {
    Polynomial,
    #[default]
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub kind: WeightKindName,
    /// Exponent of the polynomial weight `<eps x>^p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
}

impl WeightConfig {
    pub fn family(&self) -> Result<WeightFamily> {
        match (self.kind, self.p) {
            (WeightKindName::Exponential, None) => Ok(WeightFamily::exponential()),
            (WeightKindName::Exponential, Some(_)) => {
                Err(Error::Config("the exponential weight takes no exponent `p`".into()))
            }
            (WeightKindName::Polynomial, Some(p)) => {
                WeightFamily::polynomial(p).map_err(|e| Error::Config(e.to_string()))
            }
            (WeightKindName::Polynomial, None) => {
                Err(Error::Config("the polynomial weight needs an exponent `p`".into()))
            }
        }
    }
}

/// Radial fit window `r1 <= |x| <= r2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub r1: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for the report and artifacts; nothing is written when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Also write the CSV bundle next to the JSON report.
    #[serde(default)]
    pub csv: bool,
    /// Save the main operator as an MPDO1 file.
    #[serde(default)]
    pub save_operator: bool,
}

/// One scenario: what to discretize, where, and which suites to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Catalog symbol: `relativistic`, `kinetic` or `p_s:s=<s>`.
    pub symbol: String,
    /// `zero`, `constant2d:b=<b>` or `cos2d:amp=<a>`.
    #[serde(default = "default_field")]
    pub field: String,
    /// Potential identifier such as `gauss_well:depth=2,width=1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<String>,
    pub grid: GridConfig,
    #[serde(default)]
    pub weight: WeightConfig,
    /// Strictly increasing weight parameters in `(0, 1]`.
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowConfig>,
    /// Bottom of the essential spectrum; eigenvalues below it are discrete.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub essential_threshold: Option<f64>,
    /// Momentum scale for the frequency-headroom lint; derived from the
    /// potential depth and field strength when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum_scale: Option<f64>,
    #[serde(default)]
    pub suites: Vec<Suite>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

fn default_field() -> String {
    "zero".into()
}

fn default_eps_list() -> Vec<f64> {
    DEFAULT_EPS_LIST.to_vec()
}

impl ScenarioConfig {
    /// A configuration with defaults for everything but symbol and grid.
    pub fn new(symbol: impl Into<String>, d: usize, half_length: f64, n: usize) -> Self {
        Self {
            symbol: symbol.into(),
            field: default_field(),
            potential: None,
            grid: GridConfig { d, half_length, n },
            weight: WeightConfig::default(),
            eps_list: default_eps_list(),
            window: None,
            essential_threshold: None,
            momentum_scale: None,
            suites: Vec::new(),
            output: OutputConfig::default(),
            seed: 0,
        }
    }

    /// Parses and validates a JSON configuration.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The JSON schema of the configuration format.
    pub fn json_schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(ScenarioConfig)).expect("schemas serialize")
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        content_hash(&serde_json::to_vec(self).expect("configs serialize"))
    }

    pub fn grid(&self) -> Result<Grid> {
        let GridConfig { d, half_length, n } = self.grid;
        Grid::new(d, half_length, n).map_err(|e| Error::Config(e.to_string()))
    }

    /// The symbol without the potential.
    pub fn symbol(&self) -> Result<HormanderSymbol> {
        if self.symbol.contains('+') {
            return Err(Error::Config(format!(
                "symbol `{}` must not carry a potential; use the `potential` field",
                self.symbol
            )));
        }
        SymbolCatalog::parse(&self.symbol, self.grid.d)
    }

    pub fn field(&self) -> Result<MagneticField> {
        MagneticField::parse(&self.field, self.grid.d)
    }

    pub fn gauge(&self) -> Result<GaugeData> {
        Ok(transversal_gauge(&self.field()?))
    }

    pub fn potential(&self) -> Result<PotentialSpec> {
        match &self.potential {
            Some(id) => PotentialSpec::parse(id),
            None => Ok(PotentialSpec::zero()),
        }
    }

    pub fn weight(&self) -> Result<WeightFamily> {
        self.weight.family()
    }

    pub fn window(&self) -> Option<FitWindow> {
        self.window.map(|w| FitWindow { r1: w.r1, r2: w.r2 })
    }

    /// `max(1, sqrt(peak |V_+|), sqrt(peak |V_-|), sqrt(max |B|))` unless
    /// given explicitly.
    pub fn momentum_scale(&self) -> Result<f64> {
        if let Some(k) = self.momentum_scale {
            return Ok(k);
        }
        let v = self.potential()?;
        let grid = self.grid()?;
        let points: Vec<_> = (0..grid.size()).map(|j| grid.position(j)).collect();
        let mut k = 1.0f64;
        for peak in [v.plus().and_then(|p| p.peak()), v.minus().and_then(|p| p.peak())]
            .into_iter()
            .flatten()
        {
            k = k.max(peak.abs().sqrt());
        }
        Ok(k.max(self.field()?.max_strength(&points).sqrt()))
    }

    /// Schema-level and numerical validation; nothing is computed on failure.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        self.symbol()?;
        self.field()?;
        self.potential()?;
        let weight = self.weight()?;

        if self.eps_list.is_empty() {
            return Err(Error::Config("`eps_list` is empty".into()));
        }
        if let Some(eps) = self.eps_list.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(Error::Config(format!("eps = {eps} is outside (0, 1]")));
        }
        if self.eps_list.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::Config("`eps_list` must be strictly increasing".into()));
        }
        let radius = (grid.dim() as f64).sqrt() * grid.half_length();
        let max_safe_eps = weight.max_safe_eps(radius);
        if let Some(&eps) = self.eps_list.iter().find(|e| **e > max_safe_eps) {
            return Err(Error::Overflow { eps, max_safe_eps });
        }

        if let Some(w) = self.window {
            let l = grid.half_length();
            if !(w.r1 >= 0.0 && w.r1 < w.r2 && w.r2 <= 0.8 * l) {
                return Err(Error::Config(format!(
                    "fit window [{}, {}] must satisfy 0 <= r1 < r2 <= 0.8 L = {}",
                    w.r1,
                    w.r2,
                    0.8 * l
                )));
            }
        }
        if let Some(t) = self.essential_threshold {
            if !t.is_finite() {
                return Err(Error::Config(format!("essential threshold {t} is not finite")));
            }
        }
        let scale = self.momentum_scale()?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("momentum scale {scale} must be positive")));
        }
        if grid.nyquist() < FREQUENCY_HEADROOM * scale {
            return Err(Error::Config(format!(
                "grid lint: top frequency pi n / 2L = {:.3} is below {FREQUENCY_HEADROOM} x momentum scale {scale:.3}",
                grid.nyquist()
            )));
        }
        let mut seen = self.suites.clone();
        seen.sort();
        if seen.windows(2).any(|p| p[0] == p[1]) {
            return Err(Error::Config("a suite is listed twice".into()));
        }
        Ok(())
    }
}
