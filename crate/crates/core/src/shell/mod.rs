//! Scenario files, command line, reports and DOT export.

pub mod cli;
pub mod dot;
pub mod report;
pub mod scenario;

pub use dot::{export_dot, MissingStatus};
pub use report::{report_csv, report_json};
pub use scenario::{bundled, FlowSpec, Issue, Scenario, ScenarioError};
