//! Scenario files: one JSON document describing topology, flows, faults and
//! run configuration.
//!
//! ```json
//! {
//!   "name": "demo",
//!   "nodes": [{"id": "A", "kind": "switch"}, {"id": "B", "kind": "router"}],
//!   "links": [{"a": "A", "b": "B", "weight": 1}],
//!   "flows": [{"id": "f1", "src": "A", "dst": "B", "rate": 1, "start": 0}],
//!   "faults": [{"kind": "link_down", "target": ["A", "B"], "at": 500}],
//!   "config": {"duration_ms": 1000}
//! }
//! ```
//!
//! Parsing reports every problem it finds, each with its location.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::engine::Millis;
use crate::faults::{CongestionParams, FaultKind, FaultSpec, RandomFaults};
use crate::sim::{RunOutput, SimConfig, Simulation};
use crate::topology::{Element, LinkKey, LinkSpec, NodeId, NodeKind, NodeSpec, Topology};
use crate::traffic::Flow;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{} validation error(s):\n{}", .0.len(), .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<Issue>),
}

/// A flow as written in a scenario; `end` defaults to the end of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub id: String,
    pub src: NodeId,
    pub dst: NodeId,
    pub rate: f64,
    pub start: Millis,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub end: Option<Millis>,
}

impl FlowSpec {
    pub fn new(id: &str, src: &str, dst: &str) -> Self {
        Self {
            id: id.into(),
            src: src.into(),
            dst: dst.into(),
            rate: 1.0,
            start: 0,
            end: None,
        }
    }

    pub fn to_flow(&self, duration: Millis) -> Flow {
        Flow {
            id: self.id.clone(),
            src: self.src.clone(),
            dst: self.dst.clone(),
            rate: self.rate,
            start: self.start,
            end: self.end.unwrap_or(duration),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    pub flows: Vec<FlowSpec>,
    pub faults: Vec<FaultSpec>,
    pub random_faults: Option<RandomFaults>,
    pub config: SimConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    nodes: Vec<RawNode>,
    #[serde(default)]
    links: Vec<RawLink>,
    #[serde(default)]
    flows: Vec<RawFlow>,
    #[serde(default)]
    faults: Vec<RawFault>,
    #[serde(default)]
    random_faults: Option<RawRandom>,
    #[serde(default)]
    config: RawConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: String,
    kind: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    a: String,
    b: String,
    weight: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFlow {
    id: String,
    src: String,
    dst: String,
    rate: Option<f64>,
    start: Option<i64>,
    end: Option<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFault {
    kind: String,
    target: Value,
    at: i64,
    p_drop: Option<f64>,
    extra_delay: Option<i64>,
    duration: Option<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRandom {
    rate_per_s: f64,
    start: Option<i64>,
    end: Option<i64>,
    repair_after: Option<i64>,
    include_nodes: Option<bool>,
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    probe_interval_ms: Option<i64>,
    probe_timeout_ms: Option<i64>,
    miss_threshold: Option<i64>,
    per_hop_latency_ms: Option<i64>,
    controller_proc_delay_ms: Option<i64>,
    per_flow_commit_delay_ms: Option<i64>,
    duration_ms: Option<i64>,
    seed: Option<u64>,
}

struct Checker {
    issues: Vec<Issue>,
}

impl Checker {
    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            location: location.into(),
            message: message.into(),
        });
    }

    /// Milliseconds that must be `>= min`.
    fn ms(&mut self, location: &str, value: i64, min: i64) -> Millis {
        if value < min {
            let what = if min == 0 { "non-negative" } else { "positive" };
            self.push(location, format!("must be {what}, got {value}"));
            return min.max(0) as Millis;
        }
        value as Millis
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let raw: RawScenario = serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut c = Checker { issues: Vec::new() };
        let scenario = Self::check(raw, &mut c);
        if c.issues.is_empty() {
            Ok(scenario)
        } else {
            Err(ScenarioError::Validation(c.issues))
        }
    }

    fn check(raw: RawScenario, c: &mut Checker) -> Self {
        if raw.name.trim().is_empty() {
            c.push("name", "must not be empty");
        }

        let defaults = SimConfig::default();
        let rc = &raw.config;
        let mut ms = |key: &str, v: Option<i64>, default: Millis, min: i64| {
            v.map_or(default, |v| c.ms(&format!("config.{key}"), v, min))
        };
        let mut config = SimConfig {
            probe_interval_ms: ms(
                "probe_interval_ms",
                rc.probe_interval_ms,
                defaults.probe_interval_ms,
                1,
            ),
            probe_timeout_ms: ms(
                "probe_timeout_ms",
                rc.probe_timeout_ms,
                defaults.probe_timeout_ms,
                1,
            ),
            miss_threshold: defaults.miss_threshold,
            per_hop_latency_ms: ms(
                "per_hop_latency_ms",
                rc.per_hop_latency_ms,
                defaults.per_hop_latency_ms,
                1,
            ),
            controller_proc_delay_ms: ms(
                "controller_proc_delay_ms",
                rc.controller_proc_delay_ms,
                defaults.controller_proc_delay_ms,
                0,
            ),
            per_flow_commit_delay_ms: ms(
                "per_flow_commit_delay_ms",
                rc.per_flow_commit_delay_ms,
                defaults.per_flow_commit_delay_ms,
                0,
            ),
            duration_ms: ms("duration_ms", rc.duration_ms, defaults.duration_ms, 1),
            seed: rc.seed.unwrap_or(defaults.seed),
        };
        if let Some(m) = rc.miss_threshold {
            match u32::try_from(m) {
                Ok(m) if m > 0 => config.miss_threshold = m,
                _ => c.push(
                    "config.miss_threshold",
                    format!("must be a positive integer, got {m}"),
                ),
            }
        }

        let mut ids = BTreeSet::new();
        let mut nodes = Vec::new();
        for (i, n) in raw.nodes.iter().enumerate() {
            let at = format!("nodes[{i}]");
            if n.id.is_empty() {
                c.push(format!("{at}.id"), "must not be empty");
            } else if !ids.insert(n.id.clone()) {
                c.push(format!("{at}.id"), format!("duplicate node \"{}\"", n.id));
            }
            let kind = match n.kind.as_str() {
                "host" => NodeKind::Host,
                "switch" => NodeKind::Switch,
                "router" => NodeKind::Router,
                other => {
                    c.push(
                        format!("{at}.kind"),
                        format!("unknown kind \"{other}\" (host, switch or router)"),
                    );
                    NodeKind::Switch
                }
            };
            nodes.push(NodeSpec::new(n.id.as_str(), kind));
        }
        if raw.nodes.is_empty() {
            c.push("nodes", "at least one node is required");
        }
        let known = |c: &mut Checker, at: String, id: &str| {
            if !ids.contains(id) {
                c.push(at, format!("unknown node \"{id}\""));
            }
        };

        let mut link_keys = BTreeSet::new();
        let mut links = Vec::new();
        for (i, l) in raw.links.iter().enumerate() {
            let at = format!("links[{i}]");
            known(c, format!("{at}.a"), &l.a);
            known(c, format!("{at}.b"), &l.b);
            if l.a == l.b {
                c.push(&at, format!("self-loop on \"{}\"", l.a));
            } else if !link_keys.insert(LinkKey::new(l.a.as_str(), l.b.as_str())) {
                c.push(&at, format!("duplicate link {}-{}", l.a, l.b));
            }
            let weight = l.weight.unwrap_or(1.0);
            if !(weight > 0.0 && weight.is_finite()) {
                c.push(
                    format!("{at}.weight"),
                    format!("must be positive, got {weight}"),
                );
            }
            links.push(LinkSpec::new(l.a.as_str(), l.b.as_str(), weight));
        }

        let mut flow_ids = BTreeSet::new();
        let mut flows = Vec::new();
        for (i, f) in raw.flows.iter().enumerate() {
            let at = format!("flows[{i}]");
            if f.id.is_empty() || f.id.chars().any(char::is_whitespace) {
                c.push(format!("{at}.id"), "must be a non-empty token");
            } else if !flow_ids.insert(f.id.clone()) {
                c.push(format!("{at}.id"), format!("duplicate flow \"{}\"", f.id));
            }
            known(c, format!("{at}.src"), &f.src);
            known(c, format!("{at}.dst"), &f.dst);
            if f.src == f.dst {
                c.push(&at, "src and dst must differ");
            }
            let rate = f.rate.unwrap_or(1.0);
            if !(rate > 0.0 && rate.is_finite()) {
                c.push(
                    format!("{at}.rate"),
                    format!("must be positive, got {rate}"),
                );
            }
            let start = c.ms(&format!("{at}.start"), f.start.unwrap_or(0), 0);
            let end = f.end.map(|e| c.ms(&format!("{at}.end"), e, 1));
            if let Some(end) = end.filter(|&e| e <= start) {
                c.push(
                    format!("{at}.end"),
                    format!("must be after start {start}, got {end}"),
                );
            }
            flows.push(FlowSpec {
                id: f.id.clone(),
                src: f.src.as_str().into(),
                dst: f.dst.as_str().into(),
                rate,
                start,
                end,
            });
        }

        let mut faults = Vec::new();
        for (i, f) in raw.faults.iter().enumerate() {
            let at = format!("faults[{i}]");
            let kind = match f.kind.as_str() {
                "link_down" => FaultKind::LinkDown,
                "node_down" => FaultKind::NodeDown,
                "congestion" => FaultKind::Congestion,
                "restore" => FaultKind::Restore,
                other => {
                    c.push(
                        format!("{at}.kind"),
                        format!("unknown fault kind \"{other}\""),
                    );
                    continue;
                }
            };
            let target = match &f.target {
                Value::String(n) => {
                    known(c, format!("{at}.target"), n);
                    Element::Node(n.as_str().into())
                }
                Value::Array(pair) if pair.len() == 2 && pair.iter().all(Value::is_string) => {
                    let (a, b) = (pair[0].as_str().unwrap(), pair[1].as_str().unwrap());
                    let key = LinkKey::new(a, b);
                    if ids.contains(a) && ids.contains(b) && !link_keys.contains(&key) {
                        c.push(format!("{at}.target"), format!("unknown link {key}"));
                    } else {
                        known(c, format!("{at}.target"), a);
                        known(c, format!("{at}.target"), b);
                    }
                    Element::Link(key)
                }
                _ => {
                    c.push(
                        format!("{at}.target"),
                        "must be a node id or a [node, node] pair",
                    );
                    continue;
                }
            };
            match (kind, &target) {
                (FaultKind::LinkDown | FaultKind::Congestion, Element::Node(_)) => {
                    c.push(
                        format!("{at}.target"),
                        format!("{kind} needs a [node, node] link target"),
                    );
                }
                (FaultKind::NodeDown, Element::Link(_)) => {
                    c.push(format!("{at}.target"), "node_down needs a node id target");
                }
                _ => {}
            }
            let time = c.ms(&format!("{at}.at"), f.at, 0);
            let has_params = f.p_drop.is_some() || f.extra_delay.is_some() || f.duration.is_some();
            let congestion = if kind == FaultKind::Congestion {
                let p_drop = f.p_drop.unwrap_or(0.0);
                if !(0.0..=1.0).contains(&p_drop) {
                    c.push(
                        format!("{at}.p_drop"),
                        format!("must lie in [0, 1], got {p_drop}"),
                    );
                }
                let extra_delay = c.ms(&format!("{at}.extra_delay"), f.extra_delay.unwrap_or(0), 0);
                let duration = match f.duration {
                    Some(d) => c.ms(&format!("{at}.duration"), d, 1),
                    None => {
                        c.push(format!("{at}.duration"), "congestion needs a duration");
                        1
                    }
                };
                Some(CongestionParams {
                    p_drop,
                    extra_delay,
                    duration,
                })
            } else {
                if has_params {
                    c.push(
                        &at,
                        format!("{kind} takes no p_drop, extra_delay or duration"),
                    );
                }
                None
            };
            faults.push(FaultSpec {
                kind,
                target,
                at: time,
                congestion,
            });
        }

        let random_faults = raw.random_faults.as_ref().map(|r| {
            let at = "random_faults";
            if !(r.rate_per_s > 0.0 && r.rate_per_s.is_finite()) {
                c.push(
                    format!("{at}.rate_per_s"),
                    format!("must be positive, got {}", r.rate_per_s),
                );
            }
            let start = c.ms(&format!("{at}.start"), r.start.unwrap_or(0), 0);
            let end = c.ms(
                &format!("{at}.end"),
                r.end.unwrap_or(config.duration_ms as i64),
                1,
            );
            if end <= start {
                c.push(
                    format!("{at}.end"),
                    format!("must be after start {start}, got {end}"),
                );
            }
            RandomFaults {
                rate_per_s: r.rate_per_s,
                start,
                end,
                repair_after: r
                    .repair_after
                    .map(|v| c.ms(&format!("{at}.repair_after"), v, 1)),
                include_nodes: r.include_nodes.unwrap_or(false),
                seed: r.seed,
            }
        });

        Self {
            name: raw.name,
            nodes,
            links,
            flows,
            faults,
            random_faults,
            config,
        }
    }

    /// Pretty JSON that parses back to an equal scenario.
    pub fn to_json(&self) -> String {
        let faults: Vec<Value> = self
            .faults
            .iter()
            .map(|f| {
                let mut v = serde_json::json!({"kind": f.kind, "target": f.target, "at": f.at});
                if let Some(p) = f.congestion {
                    v["p_drop"] = p.p_drop.into();
                    v["extra_delay"] = p.extra_delay.into();
                    v["duration"] = p.duration.into();
                }
                v
            })
            .collect();
        let mut doc = serde_json::json!({
            "name": self.name,
            "nodes": self.nodes,
            "links": self.links,
            "flows": self.flows,
            "faults": faults,
            "config": self.config,
        });
        if let Some(r) = &self.random_faults {
            doc["random_faults"] = serde_json::to_value(r).expect("plain data");
        }
        let mut text = serde_json::to_string_pretty(&doc).expect("plain data");
        text.push('\n');
        text
    }

    pub fn topology(&self) -> Topology {
        Topology::build(&self.nodes, &self.links).expect("validated scenario")
    }

    pub fn flows(&self) -> Vec<Flow> {
        self.flows
            .iter()
            .map(|f| f.to_flow(self.config.duration_ms))
            .collect()
    }

    /// Scripted faults followed by any drawn at random, stably ordered by time.
    pub fn all_faults(&self) -> Vec<FaultSpec> {
        let mut all = self.faults.clone();
        if let Some(r) = &self.random_faults {
            all.extend(r.generate(&self.topology(), self.config.seed));
        }
        all.sort_by_key(|f| f.at);
        all
    }

    pub fn simulation(&self) -> Simulation {
        Simulation::new(
            &self.name,
            self.topology(),
            self.flows(),
            self.all_faults(),
            self.config,
        )
        .expect("validated scenario")
    }

    pub fn run(&self) -> RunOutput {
        self.simulation().run()
    }
}

/// Bundled scenarios: the three canonical test cases and the node-failure
/// view used for status colouring.
pub mod bundled {
    pub const TESTCASE1: &str = include_str!("../../scenarios/testcase1.json");
    pub const TESTCASE2: &str = include_str!("../../scenarios/testcase2.json");
    pub const TESTCASE3: &str = include_str!("../../scenarios/testcase3.json");
    pub const NODE_FAILURE_VIEW: &str = include_str!("../../scenarios/node_failure_view.json");

    pub const CANONICAL: [(&str, &str); 3] = [
        ("testcase1", TESTCASE1),
        ("testcase2", TESTCASE2),
        ("testcase3", TESTCASE3),
    ];
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "mini",
        "nodes": [{"id": "A", "kind": "host"}, {"id": "B", "kind": "switch"}],
        "links": [{"a": "A", "b": "B"}],
        "flows": [{"id": "f", "src": "A", "dst": "B"}]
    }"#;

    #[test]
    fn minimal_gets_defaults() {
        let s = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(s.config, SimConfig::default());
        assert_eq!(s.links[0].weight, 1.0);
        assert_eq!(s.flows[0], FlowSpec::new("f", "A", "B"));
        assert_eq!(s.flows()[0].end, 10_000);
    }

    fn issues(text: &str) -> Vec<String> {
        match Scenario::parse(text) {
            Err(ScenarioError::Validation(v)) => v.iter().map(Issue::to_string).collect(),
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn unknown_node_is_named() {
        let text = MINIMAL.replace(r#""dst": "B""#, r#""dst": "S9""#);
        assert_eq!(issues(&text), [r#"flows[0].dst: unknown node "S9""#]);
    }

    #[test]
    fn negative_weight() {
        let text = MINIMAL.replace(r#""b": "B"}"#, r#""b": "B", "weight": -2}"#);
        assert_eq!(issues(&text), ["links[0].weight: must be positive, got -2"]);
    }

    #[test]
    fn errors_are_aggregated() {
        let text = r#"{
            "name": "",
            "nodes": [{"id": "A", "kind": "hub"}, {"id": "A", "kind": "switch"}],
            "links": [{"a": "A", "b": "Z"}],
            "flows": [{"id": "f", "src": "A", "dst": "A", "rate": 0}],
            "faults": [{"kind": "link_down", "target": "A", "at": -1},
                       {"kind": "congestion", "target": ["A", "Z"], "at": 0, "p_drop": 2}],
            "config": {"probe_interval_ms": 0, "miss_threshold": -1}
        }"#;
        let got = issues(text);
        for want in [
            "name: must not be empty",
            "nodes[0].kind: unknown kind \"hub\" (host, switch or router)",
            "nodes[1].id: duplicate node \"A\"",
            "links[0].b: unknown node \"Z\"",
            "flows[0]: src and dst must differ",
            "flows[0].rate: must be positive, got 0",
            "faults[0].target: link_down needs a [node, node] link target",
            "faults[0].at: must be non-negative, got -1",
            "faults[1].p_drop: must lie in [0, 1], got 2",
            "faults[1].duration: congestion needs a duration",
            "config.probe_interval_ms: must be positive, got 0",
            "config.miss_threshold: must be a positive integer, got -1",
        ] {
            assert!(
                got.iter().any(|g| g == want),
                "missing {want:?} in {got:#?}"
            );
        }
    }

    #[test]
    fn syntax_errors_have_positions() {
        match Scenario::parse("{\n  \"name\": \"x\",\n  oops\n}") {
            Err(ScenarioError::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            Scenario::parse(r#"{"name": "x", "bogus": 1}"#),
            Err(ScenarioError::Syntax { .. })
        ));
    }

    #[test]
    fn unknown_link_target() {
        let text = MINIMAL.replace(
            r#""flows""#,
            r#""faults": [{"kind": "link_down", "target": ["B", "A"], "at": 5}, {"kind": "restore", "target": "B", "at": 9}], "flows""#,
        );
        let s = Scenario::parse(&text).unwrap();
        assert_eq!(s.faults[0], FaultSpec::link_down(("A", "B"), 5));
        let text = text.replace(r#"["B", "A"]"#, r#"["A", "A"]"#);
        assert_eq!(issues(&text), ["faults[0].target: unknown link A-A"]);
    }

    #[test]
    fn round_trip() {
        for (_, text) in bundled::CANONICAL {
            let s = Scenario::parse(text).unwrap();
            assert_eq!(Scenario::parse(&s.to_json()).unwrap(), s);
        }
        let text = MINIMAL.replace(
            r#""flows""#,
            r#""faults": [{"kind": "congestion", "target": ["A", "B"], "at": 5, "p_drop": 0.25, "extra_delay": 3, "duration": 40}],
               "random_faults": {"rate_per_s": 0.5, "repair_after": 100},
               "flows""#,
        );
        let s = Scenario::parse(&text).unwrap();
        assert_eq!(Scenario::parse(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn bundled_scenarios_validate() {
        for (name, text) in bundled::CANONICAL {
            assert_eq!(Scenario::parse(text).unwrap().name, name);
        }
        Scenario::parse(bundled::NODE_FAILURE_VIEW).unwrap();
    }
}
