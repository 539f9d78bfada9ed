//! Scenario configuration, verification suites and reports.

pub mod checks;
pub mod config;
pub mod report;
pub mod suites;

pub use config::{GridConfig, OutputConfig, ScenarioConfig, Suite, WeightConfig, WeightKindName, WindowConfig};
pub use report::{
    collect_reports, emit_report, CheckOutcome, Comparison, ReportFormat, ReportIndex, ScenarioReport, SuiteOutcome,
};
pub use suites::{build_operator, run_scenario, verify_suite};
