use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ScenarioConfig, Suite};
use crate::decay::{BoundSweep, DecayFit};
use crate::error::{csv_string, Error, Result};
use crate::persist::write_atomic;
use crate::relativistic::KatoScan;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Direction in which a check's value must lie relative to its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    Below,
    AtLeast,
    Above,
}

impl Comparison {
    fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparison::AtMost => value <= threshold,
            Comparison::Below => value < threshold,
            Comparison::AtLeast => value >= threshold,
            Comparison::Above => value > threshold,
        }
    }
}

/// One measured quantity against a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    /// The invariant this check measures.
    pub invariant: String,
    pub value: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    /// Signed distance to the threshold, positive on the passing side.
    pub margin: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckOutcome {
    /// Non-finite values fail and are stored as `f64::MAX` so reports stay
    /// valid JSON.
    pub fn new(name: &str, invariant: &str, value: f64, comparison: Comparison, threshold: f64) -> Self {
        let finite = value.is_finite();
        let value = if finite { value } else { f64::MAX };
        let margin = match comparison {
            Comparison::AtMost | Comparison::Below => threshold - value,
            Comparison::AtLeast | Comparison::Above => value - threshold,
        };
        Self {
            name: name.into(),
            invariant: invariant.into(),
            value,
            comparison,
            threshold,
            margin,
            passed: finite && comparison.holds(value, threshold),
            note: (!finite).then(|| "value is not finite".to_string()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub checks: Vec<CheckOutcome>,
    /// Set when the suite stopped early; the checks before the error remain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub passed: bool,
}

impl SuiteOutcome {
    pub fn new(suite: Suite, checks: Vec<CheckOutcome>, error: Option<String>) -> Self {
        let passed = error.is_none() && checks.iter().all(|c| c.passed);
        Self {
            suite,
            checks,
            error,
            passed,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub size: usize,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub essential_threshold: Option<f64>,
    /// Indices of eigenvalues below the essential threshold.
    pub discrete: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledFit {
    pub label: String,
    pub fit: DecayFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eps0Summary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub format_version: u32,
    pub config: ScenarioConfig,
    pub config_hash: String,
    /// SHA-256 of the MPDO1 encoding of each operator built.
    pub operator_hashes: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSummary>,
    pub fits: Vec<LabelledFit>,
    pub sweeps: Vec<BoundSweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps0: Option<Eps0Summary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kato: Option<KatoScan>,
    pub suites: Vec<SuiteOutcome>,
    /// False when any suite stopped on an error.
    pub complete: bool,
    pub passed: bool,
    /// Wall-clock seconds per stage; the only nondeterministic field.
    pub timings: BTreeMap<String, f64>,
}

impl ScenarioReport {
    pub fn new(config: ScenarioConfig) -> Self {
        Self {
            format_version: REPORT_FORMAT_VERSION,
            config_hash: config.hash(),
            config,
            operator_hashes: BTreeMap::new(),
            spectrum: None,
            fits: Vec::new(),
            sweeps: Vec::new(),
            eps0: None,
            kato: None,
            suites: Vec::new(),
            complete: true,
            passed: true,
            timings: BTreeMap::new(),
        }
    }

    pub fn push_suite(&mut self, outcome: SuiteOutcome) {
        self.complete &= outcome.is_complete();
        self.passed &= outcome.passed;
        self.suites.push(outcome);
    }

    /// The report with timings removed, for determinism comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.timings.clear();
        r
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Columns `suite, name, invariant, value, comparison, threshold, margin, passed`.
    pub fn checks_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "suite",
            "name",
            "invariant",
            "value",
            "comparison",
            "threshold",
            "margin",
            "passed",
        ])?;
        for s in &self.suites {
            for c in &s.checks {
                let cmp = serde_json::to_value(c.comparison)?;
                w.write_record([
                    s.suite.name(),
                    &c.name,
                    &c.invariant,
                    &format!("{:e}", c.value),
                    cmp.as_str().unwrap_or_default(),
                    &format!("{:e}", c.threshold),
                    &format!("{:e}", c.margin),
                    &c.passed.to_string(),
                ])?;
            }
        }
        csv_string(w)
    }

    /// Columns `index, eigenvalue, gap, residual`.
    pub fn spectrum_csv(&self) -> Result<Option<String>> {
        let Some(s) = &self.spectrum else {
            return Ok(None);
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["index", "eigenvalue", "gap", "residual"])?;
        for (k, lam) in s.eigenvalues.iter().enumerate() {
            w.write_record([
                k.to_string(),
                format!("{lam:.16e}"),
                format!("{:.16e}", crate::spectral::spectral_gap(&s.eigenvalues, k)),
                format!("{:.6e}", s.residuals[k]),
            ])?;
        }
        csv_string(w).map(Some)
    }

    /// Columns `label, mode, rate, r_squared, r1, r2, samples`.
    pub fn fits_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["label", "mode", "rate", "r_squared", "r1", "r2", "samples"])?;
        for f in &self.fits {
            let mode = serde_json::to_value(f.fit.mode)?;
            w.write_record([
                f.label.clone(),
                mode.as_str().unwrap_or_default().to_string(),
                f.fit.rate.to_string(),
                f.fit.r_squared.to_string(),
                f.fit.window.r1.to_string(),
                f.fit.window.r2.to_string(),
                f.fit.samples.to_string(),
            ])?;
        }
        csv_string(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    CsvBundle,
}

/// `poly:2` becomes `poly-2`.
fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect()
}

/// Writes the report into `dir` atomically and returns the files written.
pub fn emit_report(rep: &ScenarioReport, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    match format {
        ReportFormat::Json => files.push((dir.join("report.json"), rep.to_json()?)),
        ReportFormat::CsvBundle => {
            files.push((dir.join("checks.csv"), rep.checks_csv()?));
            files.push((dir.join("fits.csv"), rep.fits_csv()?));
            if let Some(s) = rep.spectrum_csv()? {
                files.push((dir.join("spectrum.csv"), s));
            }
            for sweep in &rep.sweeps {
                let name = format!("sweep_{}.csv", file_stem(&sweep.weight));
                files.push((dir.join(name), sweep.to_csv()?));
            }
            if let Some(k) = &rep.kato {
                files.push((dir.join("kato.csv"), k.to_csv()?));
            }
        }
    }
    for (path, text) in &files {
        write_atomic(path, text.as_bytes())?;
    }
    Ok(files.into_iter().map(|f| f.0).collect())
}

/// Summary over the reports found in a directory tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportIndex {
    pub reports: Vec<IndexEntry>,
    pub complete: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub path: PathBuf,
    pub config_hash: String,
    pub suites: Vec<(Suite, bool)>,
    pub complete: bool,
    pub passed: bool,
}

/// Collects every `report.json` below `dir`, sorted by path.
pub fn collect_reports(dir: &Path) -> Result<ReportIndex> {
    let mut paths = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let path = entry.map_err(|e| Error::io(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == "report.json") {
                paths.push(path);
            }
        }
    }
    paths.sort();
    let reports: Vec<IndexEntry> = paths
        .into_iter()
        .map(|path| {
            let r = ScenarioReport::load(&path)?;
            Ok(IndexEntry {
                config_hash: r.config_hash,
                suites: r.suites.iter().map(|s| (s.suite, s.passed)).collect(),
                complete: r.complete,
                passed: r.passed,
                path,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ReportIndex {
        complete: reports.iter().all(|r| r.complete),
        passed: reports.iter().all(|r| r.passed),
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> ScenarioReport {
        let mut r = ScenarioReport::new(ScenarioConfig::new("relativistic", 1, 10.0, 64));
        r.push_suite(SuiteOutcome::new(
            Suite::QuantizeCore,
            vec![CheckOutcome::new(
                "identity",
                "quantize/identity-reproduction",
                0.0,
                Comparison::AtMost,
                0.0,
            )],
            None,
        ));
        r.timings.insert("total".into(), 0.25);
        r
    }

    #[test]
    fn margins_and_passes() {
        let c = CheckOutcome::new("x", "inv", 0.5, Comparison::Below, 1.0);
        assert!(c.passed && c.margin == 0.5);
        let c = CheckOutcome::new("x", "inv", 0.5, Comparison::AtLeast, 1.0);
        assert!(!c.passed && c.margin == -0.5);
        let c = CheckOutcome::new("x", "inv", f64::NAN, Comparison::AtMost, 1.0);
        assert!(!c.passed && c.value == f64::MAX && c.note.is_some());
    }

    #[test]
    fn json_round_trip() {
        let r = report();
        assert_eq!(ScenarioReport::from_json(&r.to_json().unwrap()).unwrap(), r);
        assert!(r.without_timings().timings.is_empty());
    }

    #[test]
    fn empty_suite_list_is_a_valid_report() {
        let r = ScenarioReport::new(ScenarioConfig::new("kinetic", 1, 5.0, 32));
        assert!(r.complete && r.passed && r.suites.is_empty());
        assert_eq!(ScenarioReport::from_json(&r.to_json().unwrap()).unwrap(), r);
    }

    #[test]
    fn errors_mark_the_report_incomplete() {
        let mut r = report();
        r.push_suite(SuiteOutcome::new(Suite::Thm1RapidDecay, vec![], Some("boom".into())));
        assert!(!r.complete && !r.passed);
    }

    #[test]
    fn bundle_and_index() {
        let dir = tempfile::tempdir().unwrap();
        let r = report();
        let sub = dir.path().join("a");
        let files = emit_report(&r, ReportFormat::Json, &sub).unwrap();
        assert_eq!(files, vec![sub.join("report.json")]);
        let files = emit_report(&r, ReportFormat::CsvBundle, &sub).unwrap();
        assert!(files.contains(&sub.join("checks.csv")));
        let checks = fs::read_to_string(sub.join("checks.csv")).unwrap();
        assert!(checks.starts_with("suite,name,invariant,value,comparison,threshold,margin,passed\n"));
        assert!(checks.contains("quantize-core,identity,quantize/identity-reproduction,0e0,at_most,0e0,0e0,true"));
        let index = collect_reports(dir.path()).unwrap();
        assert_eq!(index.reports.len(), 1);
        assert!(index.passed);
    }
}
