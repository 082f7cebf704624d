//! Scripted and randomly drawn faults: link and node failures, windowed
//! congestion, and restoration.

use std::fmt;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Millis;
use crate::topology::{Congestion, Element, ElementState, LinkKey, Path, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    LinkDown,
    NodeDown,
    Congestion,
    Restore,
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FaultKind::LinkDown => "link_down",
            FaultKind::NodeDown => "node_down",
            FaultKind::Congestion => "congestion",
            FaultKind::Restore => "restore",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CongestionParams {
    pub p_drop: f64,
    pub extra_delay: Millis,
    pub duration: Millis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub target: Element,
    pub at: Millis,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub congestion: Option<CongestionParams>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FaultError {
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("bad fault parameters: {0}")]
    BadParams(String),
}

impl FaultSpec {
    pub fn link_down(link: impl Into<LinkKey>, at: Millis) -> Self {
        Self {
            kind: FaultKind::LinkDown,
            target: Element::Link(link.into()),
            at,
            congestion: None,
        }
    }

    pub fn node_down(node: &str, at: Millis) -> Self {
        Self {
            kind: FaultKind::NodeDown,
            target: Element::Node(node.into()),
            at,
            congestion: None,
        }
    }

    pub fn congestion(link: impl Into<LinkKey>, at: Millis, params: CongestionParams) -> Self {
        Self {
            kind: FaultKind::Congestion,
            target: Element::Link(link.into()),
            at,
            congestion: Some(params),
        }
    }

    pub fn restore(target: Element, at: Millis) -> Self {
        Self {
            kind: FaultKind::Restore,
            target,
            at,
            congestion: None,
        }
    }

    /// Whether this spec takes an element out of service.
    pub fn is_failure(&self) -> bool {
        matches!(self.kind, FaultKind::LinkDown | FaultKind::NodeDown)
    }

    pub fn validate(&self, topo: &Topology) -> Result<(), FaultError> {
        if !topo.contains(&self.target) {
            return Err(FaultError::UnknownElement(self.target.to_string()));
        }
        match (self.kind, &self.target) {
            (FaultKind::LinkDown | FaultKind::Congestion, Element::Node(n)) => {
                return Err(FaultError::BadParams(format!(
                    "{} needs a link target, got node {n}",
                    self.kind
                )));
            }
            (FaultKind::NodeDown, Element::Link(l)) => {
                return Err(FaultError::BadParams(format!(
                    "node_down needs a node target, got link {l}"
                )));
            }
            _ => {}
        }
        match (self.kind, &self.congestion) {
            (FaultKind::Congestion, None) => Err(FaultError::BadParams(
                "congestion needs p_drop, extra_delay and duration".into(),
            )),
            (FaultKind::Congestion, Some(p)) => {
                if !(0.0..=1.0).contains(&p.p_drop) {
                    Err(FaultError::BadParams(format!(
                        "p_drop {} outside [0, 1]",
                        p.p_drop
                    )))
                } else if p.duration == 0 {
                    Err(FaultError::BadParams(
                        "congestion duration must be positive".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            (_, Some(_)) => Err(FaultError::BadParams(format!(
                "{} takes no congestion parameters",
                self.kind
            ))),
            (_, None) => Ok(()),
        }
    }

    /// Whether a route through `path` runs over the element this spec targets.
    pub fn affects(&self, path: &Path) -> bool {
        path.traverses(&self.target)
    }
}

/// Keys of the links an element's failure takes out of the residual graph.
pub fn element_links(topo: &Topology, element: &Element) -> Vec<LinkKey> {
    match element {
        Element::Link(l) => vec![l.clone()],
        Element::Node(n) => topo
            .links()
            .iter()
            .filter(|l| l.key().touches(n))
            .map(|l| l.key().clone())
            .collect(),
    }
}

/// Link indices whose usability an element change can flip.
fn touched_links(topo: &Topology, element: &Element) -> Vec<usize> {
    match element {
        Element::Link(l) => topo.link_position(l).into_iter().collect(),
        Element::Node(n) => topo
            .node_index(n)
            .map(|i| topo.incident_links(i).collect())
            .unwrap_or_default(),
    }
}

/// Applies `spec` to `topo` at `now`. Returns the indices of links whose
/// usability changed, so probe and forwarding history can be updated.
pub fn apply_fault(
    topo: &mut Topology,
    spec: &FaultSpec,
    now: Millis,
) -> Result<Vec<usize>, FaultError> {
    spec.validate(topo)?;
    let touched = touched_links(topo, &spec.target);
    let before: Vec<bool> = touched.iter().map(|&li| topo.link_usable(li)).collect();
    let set = |topo: &mut Topology, state| {
        topo.set_element_state(&spec.target, state)
            .map_err(|e| FaultError::UnknownElement(e.to_string()))
    };
    match spec.kind {
        FaultKind::LinkDown | FaultKind::NodeDown => set(topo, ElementState::Down)?,
        FaultKind::Restore => {
            set(topo, ElementState::Up)?;
            if let Element::Link(l) = &spec.target {
                topo.set_congestion(l, None).expect("validated link");
            }
        }
        FaultKind::Congestion => {
            let Element::Link(l) = &spec.target else {
                unreachable!("validated")
            };
            let p = spec.congestion.expect("validated");
            topo.set_congestion(
                l,
                Some(Congestion {
                    p_drop: p.p_drop,
                    extra_delay: p.extra_delay,
                    until: now + p.duration,
                }),
            )
            .expect("validated link");
        }
    }
    Ok(touched
        .into_iter()
        .zip(before)
        .filter(|&(li, was)| topo.link_usable(li) != was)
        .map(|(li, _)| li)
        .collect())
}

/// Poisson fault arrivals drawn before a run starts, so the event schedule
/// stays fixed for a given seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFaults {
    /// Mean failures per second of virtual time.
    pub rate_per_s: f64,
    pub start: Millis,
    pub end: Millis,
    /// When set, each failure is followed by a restore this many ms later.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub repair_after: Option<Millis>,
    /// Also fail whole nodes, not just links.
    #[serde(default)]
    pub include_nodes: bool,
    /// Overrides the run seed for fault drawing.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

impl RandomFaults {
    pub fn generate(&self, topo: &Topology, run_seed: u64) -> Vec<FaultSpec> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.unwrap_or(run_seed));
        let mut targets: Vec<Element> = topo
            .links()
            .iter()
            .map(|l| Element::Link(l.key().clone()))
            .collect();
        if self.include_nodes {
            targets.extend(topo.nodes().iter().map(|n| Element::Node(n.id().clone())));
        }
        if targets.is_empty() || self.rate_per_s.is_nan() || self.rate_per_s <= 0.0 {
            return Vec::new();
        }
        let mean_gap = 1000.0 / self.rate_per_s;
        let mut out = Vec::new();
        let mut t = self.start as f64;
        loop {
            let u: f64 = rng.random();
            t += -mean_gap * (1.0 - u).ln();
            if t >= self.end as f64 {
                break;
            }
            let at = t as Millis;
            let target = targets[rng.random_range(0..targets.len())].clone();
            let kind = match target {
                Element::Link(_) => FaultKind::LinkDown,
                Element::Node(_) => FaultKind::NodeDown,
            };
            out.push(FaultSpec {
                kind,
                target: target.clone(),
                at,
                congestion: None,
            });
            if let Some(repair) = self.repair_after {
                out.push(FaultSpec::restore(target, at + repair));
            }
        }
        out.sort_by_key(|f| f.at);
        out
    }
}
