//! The failover controller: probe-driven failure detection, backup-first
//! rerouting with shortest-path fallback, equal-cost load balancing, the
//! controller state machine, and node status classification.
//!
//! The controller never sees the real topology after start-up. Its routing
//! view changes only when probes say so: a link is believed down after
//! `miss_threshold` consecutive missed probes and believed up again after the
//! first answered one. The lag between a fault and its detection is what makes
//! recovery time and blackout loss measurable.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::Millis;
use crate::topology::{Element, ElementState, LinkKey, NodeId, Path, Topology};
use crate::traffic::{Flow, ProbeOutcome, ProbeResult};

/// Weight of the cost term in a path score.
pub const SCORE_BETA: f64 = 0.1;
/// Probes per link considered when scoring.
pub const SCORE_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControllerConfig {
    pub miss_threshold: u32,
    pub proc_delay: Millis,
    pub per_flow_commit_delay: Millis,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            miss_threshold: 2,
            proc_delay: 5,
            per_flow_commit_delay: 2,
        }
    }
}

/// What a single probe result changed in the controller's view of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeVerdict {
    Healthy,
    Suspected {
        misses: u32,
    },
    Detected,
    /// Another miss on a link already believed down.
    StillDown,
    /// First answered probe on a link believed down.
    Restored,
}

/// Consecutive-miss counters per link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionTracker {
    threshold: u32,
    misses: BTreeMap<LinkKey, u32>,
    down: BTreeSet<LinkKey>,
}

impl DetectionTracker {
    pub fn new(threshold: u32) -> Self {
        assert!(threshold > 0, "miss threshold must be positive");
        Self {
            threshold,
            misses: BTreeMap::new(),
            down: BTreeSet::new(),
        }
    }

    pub fn observe(&mut self, result: &ProbeResult) -> ProbeVerdict {
        let link = &result.link;
        let ok = result.outcome == ProbeOutcome::Ok;
        if self.down.contains(link) {
            if ok {
                self.down.remove(link);
                self.misses.remove(link);
                return ProbeVerdict::Restored;
            }
            return ProbeVerdict::StillDown;
        }
        if ok {
            self.misses.remove(link);
            return ProbeVerdict::Healthy;
        }
        let m = self.misses.entry(link.clone()).or_insert(0);
        *m += 1;
        if *m == self.threshold {
            self.misses.remove(link);
            self.down.insert(link.clone());
            ProbeVerdict::Detected
        } else {
            ProbeVerdict::Suspected { misses: *m }
        }
    }

    pub fn misses(&self, link: &LinkKey) -> u32 {
        self.misses.get(link).copied().unwrap_or(0)
    }

    pub fn is_believed_down(&self, link: &LinkKey) -> bool {
        self.down.contains(link)
    }

    /// Links with at least one outstanding miss that are not yet believed down.
    pub fn suspects(&self) -> usize {
        self.misses.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControllerState {
    Normal,
    FaultSuspected,
    FaultDetected,
    Rerouting,
    Recovered,
}

impl ControllerState {
    pub fn can_transition_to(self, next: ControllerState) -> bool {
        use ControllerState::*;
        matches!(
            (self, next),
            (Normal, FaultSuspected)
                | (FaultSuspected, FaultDetected)
                | (FaultSuspected, Normal)
                | (FaultDetected, Rerouting)
                | (Rerouting, Recovered)
                | (Recovered, Normal)
        )
    }
}

impl fmt::Display for ControllerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub at: Millis,
    pub from: ControllerState,
    pub to: ControllerState,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateMachine {
    state: ControllerState,
    log: Vec<Transition>,
}

impl Default for StateMachine {
    fn default() -> Self {
        Self {
            state: ControllerState::Normal,
            log: Vec::new(),
        }
    }
}

impl StateMachine {
    pub fn state(&self) -> ControllerState {
        self.state
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.log
    }

    pub fn go(&mut self, to: ControllerState, at: Millis) {
        assert!(
            self.state.can_transition_to(to),
            "illegal controller transition {} -> {to}",
            self.state
        );
        self.log.push(Transition {
            at,
            from: self.state,
            to,
        });
        self.state = to;
    }
}

/// Sliding window of recent probe outcomes per link.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProbeHistory {
    windows: BTreeMap<LinkKey, VecDeque<bool>>,
}

impl ProbeHistory {
    pub fn record(&mut self, link: &LinkKey, ok: bool) {
        let w = self.windows.entry(link.clone()).or_default();
        if w.len() == SCORE_WINDOW {
            w.pop_front();
        }
        w.push_back(ok);
    }

    /// Fraction of answered probes in the window; 1 for a never-probed link.
    pub fn success_ratio(&self, link: &LinkKey) -> f64 {
        match self.windows.get(link) {
            Some(w) if !w.is_empty() => w.iter().filter(|&&ok| ok).count() as f64 / w.len() as f64,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathScore {
    pub score: f64,
    pub success_ratio: f64,
    pub normalized_cost: f64,
}

/// `score = success_ratio - beta * cost / max_candidate_cost`, where a path's
/// success ratio is the worst ratio among its links.
pub fn score_path(path: &Path, history: &ProbeHistory, max_candidate_cost: f64) -> PathScore {
    let success_ratio = path
        .links()
        .map(|l| history.success_ratio(&l))
        .fold(1.0, f64::min);
    let normalized_cost = if max_candidate_cost > 0.0 {
        path.cost() / max_candidate_cost
    } else {
        0.0
    };
    PathScore {
        score: success_ratio - SCORE_BETA * normalized_cost,
        success_ratio,
        normalized_cost,
    }
}

/// Byte sum of a flow id, used to spread flows over tied candidates.
pub fn flow_hash(flow_id: &str) -> u64 {
    flow_id.bytes().map(u64::from).sum()
}

/// Picks one of `candidates` (canonically sorted, non-empty) for a flow.
/// When every candidate scores the same the flow id hash picks the index;
/// otherwise the best score wins, earlier candidates winning ties.
pub fn select_active_path(flow_id: &str, candidates: &[Path], history: &ProbeHistory) -> usize {
    assert!(!candidates.is_empty(), "no candidate paths");
    let max_cost = candidates.iter().map(Path::cost).fold(0.0, f64::max);
    let scores: Vec<f64> = candidates
        .iter()
        .map(|p| score_path(p, history, max_cost).score)
        .collect();
    if scores.iter().all(|&s| s == scores[0]) {
        return (flow_hash(flow_id) % candidates.len() as u64) as usize;
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerouteVia {
    Backup,
    Recomputed,
    Unrouted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PendingCommit {
    pub path: Option<Path>,
    pub commit_at: Millis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteEntry {
    pub flow: String,
    pub src: NodeId,
    pub dst: NodeId,
    pub primary: Option<Path>,
    pub backup: Option<Path>,
    /// `None` while the flow has no route.
    pub active: Option<Path>,
    pub last_commit: Option<Millis>,
    pub pending: Option<PendingCommit>,
}

impl RouteEntry {
    /// The path the flow will be on once pending work lands.
    pub fn intended(&self) -> Option<&Path> {
        match &self.pending {
            Some(p) => p.path.as_ref(),
            None => self.active.as_ref(),
        }
    }
}

/// Active path per flow id; unrouted flows are absent.
pub type RouteSnapshot = BTreeMap<String, Path>;

#[derive(Debug, Clone, PartialEq)]
pub struct RouteTable {
    entries: Vec<RouteEntry>,
    /// Entry indices sorted by flow id.
    order: Vec<usize>,
}

impl RouteTable {
    pub fn entries(&self) -> &[RouteEntry] {
        &self.entries
    }

    pub fn get(&self, flow: usize) -> &RouteEntry {
        &self.entries[flow]
    }

    pub fn has_pending(&self) -> bool {
        self.entries.iter().any(|e| e.pending.is_some())
    }

    pub fn snapshot(&self) -> RouteSnapshot {
        self.entries
            .iter()
            .filter_map(|e| e.active.clone().map(|p| (e.flow.clone(), p)))
            .collect()
    }
}

/// A reroute decision waiting for its commit instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedCommit {
    pub flow: usize,
    pub path: Option<Path>,
    pub via: RerouteVia,
    pub decided_at: Millis,
    pub commit_at: Millis,
}

#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControllerConfig,
    view: Topology,
    tracker: DetectionTracker,
    history: ProbeHistory,
    machine: StateMachine,
    routes: RouteTable,
    busy_until: Millis,
    retry_unrouted: bool,
}

impl Controller {
    /// Sets up primary and backup routes for every flow on a fully healthy view of `topo`.
    pub fn new(topo: &Topology, flows: &[Flow], cfg: ControllerConfig) -> Self {
        let view = topo.clone();
        let history = ProbeHistory::default();
        let entries: Vec<RouteEntry> = flows
            .iter()
            .map(|f| {
                let primary = view
                    .equal_cost_paths(&f.src, &f.dst)
                    .ok()
                    .map(|c| c[select_active_path(&f.id, &c, &history)].clone());
                let backup = primary.as_ref().and_then(|p| view.disjoint_backup(p).ok());
                RouteEntry {
                    flow: f.id.clone(),
                    src: f.src.clone(),
                    dst: f.dst.clone(),
                    active: primary.clone(),
                    primary,
                    backup,
                    last_commit: None,
                    pending: None,
                }
            })
            .collect();
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_by(|&a, &b| entries[a].flow.cmp(&entries[b].flow));
        Self {
            cfg,
            view,
            tracker: DetectionTracker::new(cfg.miss_threshold),
            history,
            machine: StateMachine::default(),
            routes: RouteTable { entries, order },
            busy_until: 0,
            retry_unrouted: false,
        }
    }

    pub fn config(&self) -> ControllerConfig {
        self.cfg
    }

    pub fn state(&self) -> ControllerState {
        self.machine.state()
    }

    pub fn transitions(&self) -> &[Transition] {
        self.machine.transitions()
    }

    pub fn routes(&self) -> &RouteTable {
        &self.routes
    }

    /// The controller's believed topology.
    pub fn view(&self) -> &Topology {
        &self.view
    }

    pub fn tracker(&self) -> &DetectionTracker {
        &self.tracker
    }

    pub fn history(&self) -> &ProbeHistory {
        &self.history
    }

    fn set_view(&mut self, link: &LinkKey, state: ElementState) {
        self.view
            .set_element_state(&Element::Link(link.clone()), state)
            .expect("probed links exist in the view");
    }

    pub fn observe_probe(&mut self, result: &ProbeResult, now: Millis) -> ProbeVerdict {
        use ControllerState::*;
        self.history
            .record(&result.link, result.outcome == ProbeOutcome::Ok);
        let verdict = self.tracker.observe(result);
        match verdict {
            ProbeVerdict::Suspected { .. } | ProbeVerdict::Detected => {
                if self.state() == Recovered {
                    self.machine.go(Normal, now);
                }
                if self.state() == Normal {
                    self.machine.go(FaultSuspected, now);
                }
                if verdict == ProbeVerdict::Detected {
                    self.set_view(&result.link, ElementState::Down);
                    if self.state() == FaultSuspected {
                        self.machine.go(FaultDetected, now);
                    }
                }
            }
            ProbeVerdict::Restored => {
                self.set_view(&result.link, ElementState::Up);
                self.retry_unrouted = true;
            }
            ProbeVerdict::Healthy | ProbeVerdict::StillDown => {}
        }
        if matches!(self.state(), FaultSuspected | Recovered) && self.tracker.suspects() == 0 {
            self.machine.go(Normal, now);
        }
        verdict
    }

    /// Marks `link` failed and reroutes whatever ran over it.
    pub fn on_fault_detected(&mut self, link: &LinkKey, at: Millis) -> Vec<PlannedCommit> {
        self.set_view(link, ElementState::Down);
        self.reroute(at)
    }

    fn choose(&self, entry: &RouteEntry) -> (Option<Path>, RerouteVia) {
        if let Some(backup) = entry
            .backup
            .as_ref()
            .filter(|b| self.view.is_path_usable(b))
        {
            return (Some(backup.clone()), RerouteVia::Backup);
        }
        match self.view.equal_cost_paths(&entry.src, &entry.dst) {
            Ok(c) => {
                let pick = select_active_path(&entry.flow, &c, &self.history);
                (Some(c[pick].clone()), RerouteVia::Recomputed)
            }
            Err(_) => (None, RerouteVia::Unrouted),
        }
    }

    /// Plans a commit for every flow whose intended path crosses a link
    /// believed down, plus unrouted flows after a restoration. Flows are
    /// handled in id order; the controller works through one batch at a time.
    pub fn reroute(&mut self, now: Millis) -> Vec<PlannedCommit> {
        let start = now.max(self.busy_until);
        let retry = std::mem::take(&mut self.retry_unrouted);
        let mut plans = Vec::new();
        for &idx in &self.routes.order {
            let entry = &self.routes.entries[idx];
            let affected = match entry.intended() {
                Some(p) => !self.view.is_path_usable(p),
                None => retry,
            };
            if !affected {
                continue;
            }
            let (path, via) = self.choose(entry);
            if entry.intended().is_none() && path.is_none() {
                continue;
            }
            let commit_at = start
                + self.cfg.proc_delay
                + plans.len() as Millis * self.cfg.per_flow_commit_delay;
            plans.push(PlannedCommit {
                flow: idx,
                path,
                via,
                decided_at: now,
                commit_at,
            });
        }
        for plan in &plans {
            self.routes.entries[plan.flow].pending = Some(PendingCommit {
                path: plan.path.clone(),
                commit_at: plan.commit_at,
            });
        }
        if let Some(last) = plans.last() {
            self.busy_until = last.commit_at;
        }
        if self.state() == ControllerState::FaultDetected {
            self.machine.go(ControllerState::Rerouting, now);
        }
        self.settle(now);
        plans
    }

    /// Applies a planned commit.
    pub fn commit(&mut self, flow: usize, path: Option<Path>, now: Millis) {
        let entry = &mut self.routes.entries[flow];
        entry.active = path;
        entry.pending = None;
        entry.last_commit = Some(now);
        self.settle(now);
    }

    fn settle(&mut self, now: Millis) {
        if self.state() == ControllerState::Rerouting && !self.routes.has_pending() {
            self.machine.go(ControllerState::Recovered, now);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeStatus {
    Active,
    Failed,
    Rerouted,
}

impl NodeStatus {
    /// Fill colour used when drawing the topology.
    pub fn color(&self) -> &'static str {
        match self {
            NodeStatus::Active => "green",
            NodeStatus::Failed => "red",
            NodeStatus::Rerouted => "orange",
        }
    }
}

/// Failed: down, or every link of the node is down. Rerouted: an up node on
/// some flow's path after failover that the same flow did not use before.
/// Active: everything else.
pub fn classify_node_status(
    topo: &Topology,
    before: &RouteSnapshot,
    after: &RouteSnapshot,
) -> BTreeMap<NodeId, NodeStatus> {
    let failed = |i: usize| {
        let node = topo.node_at(i);
        if node.state() == ElementState::Down {
            return true;
        }
        let mut links = topo.incident_links(i).peekable();
        links.peek().is_some() && links.all(|li| topo.link_at(li).state() == ElementState::Down)
    };
    let mut rerouted = BTreeSet::new();
    for (flow, path) in after {
        let old = before.get(flow);
        for n in path.nodes() {
            if old.is_none_or(|p| !p.contains_node(n)) {
                rerouted.insert(n.clone());
            }
        }
    }
    topo.nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let status = if failed(i) {
                NodeStatus::Failed
            } else if rerouted.contains(n.id()) {
                NodeStatus::Rerouted
            } else {
                NodeStatus::Active
            };
            (n.id().clone(), status)
        })
        .collect()
}
