use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn magpsido(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magpsido"))
        .args(args)
        .env("MAGPSIDO_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("scenario.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const BOUND_STATE: &str = r#"{
  "symbol": "relativistic",
  "potential": "gauss_well:depth=2,width=1",
  "grid": {"d": 1, "L": 8.0, "n": 128},
  "essential_threshold": 1.0,
  "suites": ["quantize-core", "thm1-rapid-decay"]
}"#;

#[test]
fn schema_lists_grid_fields() {
    let o = magpsido(&["schema"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("\"eps_list\"") && s.contains("\"grid\""), "{s}");
}

#[test]
fn verify_passes_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BOUND_STATE);
    let o = magpsido(&["verify", "quantize-core", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("quantize-core PASS"));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BOUND_STATE);
    let o = magpsido(&["verify", "thm4", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("thm4"));
}

#[test]
fn odd_grid_fails_before_computation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BOUND_STATE.replace("128", "127"));
    let o = magpsido(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_suite_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &BOUND_STATE.replace("relativistic", "kinetic").replace("1.0,", "0.0,"),
    );
    let o = magpsido(&["verify", "thm3-relativistic", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn build_then_spectrum_from_the_saved_operator() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BOUND_STATE);
    let op = dir.path().join("h.mpdo");
    let o = magpsido(&["build", "--config", &cfg, "--out", op.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::metadata(&op).unwrap().len(), 26 + 16 * 128 * 128);
    let o = magpsido(&["spectrum", "--op", op.to_str().unwrap(), "--threshold", "1"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert_eq!(s.lines().next(), Some("index,eigenvalue,gap,residual"));
    assert_eq!(s.lines().count(), 129);
    assert!(String::from_utf8_lossy(&o.stderr).contains("eigenvalues below 1"));
}

#[test]
fn conjugate_prints_the_sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BOUND_STATE);
    let o = magpsido(&[
        "conjugate",
        "--config",
        &cfg,
        "--eps-list",
        "0.025,0.05",
        "--weight",
        "poly:2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert_eq!(s.lines().next(), Some("epsilon,rel_bound,eps_rel_bound,flag"));
    assert_eq!(s.lines().count(), 3);
}

#[test]
fn run_writes_reports_that_report_indexes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let body = BOUND_STATE.replace(", \"thm1-rapid-decay\"", "").replacen(
        "\"suites\"",
        &format!(
            "\"output\": {{\"dir\": {:?}, \"csv\": true}},\n  \"suites\"",
            out.to_str().unwrap()
        ),
        1,
    );
    let cfg = write_config(dir.path(), &body);
    let o = magpsido(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(out.join("report.json").is_file() && out.join("checks.csv").is_file());
    let index = dir.path().join("index.json");
    let o = magpsido(&[
        "report",
        "--in",
        dir.path().to_str().unwrap(),
        "--out",
        index.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(fs::read_to_string(&index).unwrap().contains("\"passed\": true"));
}

#[test]
fn semigroup_and_kato_report_numbers() {
    let o = magpsido(&["semigroup", "--t", "1", "--points", "512"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("normalization_residual"));
    let o = magpsido(&["kato", "--potential", "bounded_bump", "--t-scan", "--levels", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn decay_reports_both_fits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BOUND_STATE);
    let o = magpsido(&["decay", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("\"Exponential\"") || s.contains("exponential"), "{s}");
    assert_eq!(s.lines().count(), 3);
}

#[test]
fn shipped_scenarios_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        magpsido::ScenarioConfig::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 3);
}
