//! Report serialization: a JSON document per run and a CSV shaped like a
//! results table.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use crate::failover::{ControllerState, NodeStatus, Transition};
use crate::metrics::MetricsReport;
use crate::sim::{RunOutput, SimConfig};
use crate::topology::NodeId;

pub const CSV_HEADER: &str = "test_case,loss_percent,mttr_ms,success_percent";

#[derive(Debug, Serialize)]
struct ControllerSummary<'a> {
    final_state: ControllerState,
    transitions: &'a [Transition],
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    #[serde(flatten)]
    metrics: &'a MetricsReport,
    config: SimConfig,
    node_status: &'a BTreeMap<NodeId, NodeStatus>,
    routes: BTreeMap<&'a str, &'a [NodeId]>,
    controller: ControllerSummary<'a>,
}

/// Pretty JSON report, newline-terminated.
pub fn report_json(out: &RunOutput) -> String {
    let report = RunReport {
        metrics: &out.report,
        config: out.config,
        node_status: &out.node_status,
        routes: out
            .routes_after
            .iter()
            .map(|(f, p)| (f.as_str(), p.nodes()))
            .collect(),
        controller: ControllerSummary {
            final_state: out.final_state,
            transitions: &out.transitions,
        },
    };
    let mut text = serde_json::to_string_pretty(&report).expect("plain data");
    text.push('\n');
    text
}

fn opt(v: Option<u64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Header, one row per fault (`<scenario>/F<id>`, loss left blank since it is
/// run-wide) when there is more than one, then the scenario row.
pub fn report_csv(report: &MetricsReport) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    if report.faults.len() > 1 {
        for f in &report.faults {
            writeln!(
                out,
                "{}/F{},,{},{:.1}",
                report.scenario,
                f.fault_id,
                opt(f.mttr_ms),
                f.success_rate_percent
            )
            .unwrap();
        }
    }
    writeln!(
        out,
        "{},{:.1},{},{:.1}",
        report.scenario,
        report.loss_rate_percent,
        opt(report.mttr_ms),
        report.success_rate_percent
    )
    .unwrap();
    out
}
