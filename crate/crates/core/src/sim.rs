//! The simulation driver: wires topology, traffic, probes, faults, the
//! controller and metrics onto one engine loop.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::engine::{Engine, EventHandle, Millis};
use crate::failover::{
    classify_node_status, Controller, ControllerConfig, ControllerState, NodeStatus, ProbeVerdict,
    RerouteVia, RouteSnapshot, Transition,
};
use crate::faults::{apply_fault, element_links, FaultError, FaultSpec};
use crate::metrics::{Metrics, MetricsReport};
use crate::topology::{NodeId, Path, Topology};
use crate::traffic::{
    arrive, drop_packet, forward, Flow, FlowError, LossReason, Packet, PacketOutcome, ProbeOutcome,
    ProbeResult, ProbeTiming, Route, Step, UsabilityTimeline,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub probe_interval_ms: Millis,
    pub probe_timeout_ms: Millis,
    pub miss_threshold: u32,
    pub per_hop_latency_ms: Millis,
    pub controller_proc_delay_ms: Millis,
    pub per_flow_commit_delay_ms: Millis,
    pub duration_ms: Millis,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            probe_interval_ms: 25,
            probe_timeout_ms: 10,
            miss_threshold: 2,
            per_hop_latency_ms: 1,
            controller_proc_delay_ms: 5,
            per_flow_commit_delay_ms: 2,
            duration_ms: 10_000,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("probe_interval_ms", self.probe_interval_ms),
            ("probe_timeout_ms", self.probe_timeout_ms),
            ("miss_threshold", u64::from(self.miss_threshold)),
            ("per_hop_latency_ms", self.per_hop_latency_ms),
            ("duration_ms", self.duration_ms),
        ];
        match positive.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(SimError::Config(format!("{name} must be positive"))),
            None => Ok(()),
        }
    }

    pub fn controller(&self) -> ControllerConfig {
        ControllerConfig {
            miss_threshold: self.miss_threshold,
            proc_delay: self.controller_proc_delay_ms,
            per_flow_commit_delay: self.per_flow_commit_delay_ms,
        }
    }

    pub fn probe_timing(&self) -> ProbeTiming {
        ProbeTiming {
            interval: self.probe_interval_ms,
            timeout: self.probe_timeout_ms,
            per_hop_latency: self.per_hop_latency_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("duplicate flow id `{0}`")]
    DuplicateFlow(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    Fault(usize),
    Emit { flow: usize, k: u64 },
    Hop { slot: usize },
    ProbeSend { link: usize },
    ProbeDeadline { link: usize, sent_at: Millis },
    ControllerAction,
    Commit { flow: usize },
}

#[derive(Debug, Clone)]
struct PendingCommit {
    handle: EventHandle,
    path: Option<Path>,
    via: RerouteVia,
    decided_at: Millis,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub config: SimConfig,
    pub final_topology: Topology,
    pub routes_before: RouteSnapshot,
    pub routes_after: RouteSnapshot,
    pub node_status: BTreeMap<NodeId, NodeStatus>,
    pub transitions: Vec<Transition>,
    pub final_state: ControllerState,
    /// JSON Lines, one record per simulation action, when requested.
    pub event_log: Option<String>,
}

/// One configured run.
#[derive(Debug, Clone)]
pub struct Simulation {
    name: String,
    topo: Topology,
    flows: Vec<Flow>,
    faults: Vec<FaultSpec>,
    config: SimConfig,
    event_log: bool,
}

fn path_json(path: Option<&Path>) -> Value {
    match path {
        Some(p) => json!(p.nodes()),
        None => Value::Null,
    }
}

impl Simulation {
    pub fn new(
        name: impl Into<String>,
        topo: Topology,
        flows: Vec<Flow>,
        faults: Vec<FaultSpec>,
        config: SimConfig,
    ) -> Result<Self, SimError> {
        config.validate()?;
        let mut ids = std::collections::BTreeSet::new();
        for f in &flows {
            f.check()?;
            f.check_endpoints(&topo)?;
            if !ids.insert(f.id.as_str()) {
                return Err(SimError::DuplicateFlow(f.id.clone()));
            }
        }
        for spec in &faults {
            spec.validate(&topo)?;
        }
        Ok(Self {
            name: name.into(),
            topo,
            flows,
            faults,
            config,
            event_log: false,
        })
    }

    pub fn with_event_log(mut self, on: bool) -> Self {
        self.event_log = on;
        self
    }

    pub fn run(self) -> RunOutput {
        Run::new(self).execute()
    }
}

struct Run {
    sim: Simulation,
    engine: Engine<Event>,
    topo: Topology,
    timelines: Vec<UsabilityTimeline>,
    controller: Controller,
    routes: Vec<Option<Arc<Route>>>,
    pending: Vec<Option<PendingCommit>>,
    packets: Vec<Option<Packet>>,
    free: Vec<usize>,
    next_packet: u64,
    metrics: Metrics,
    rng: ChaCha8Rng,
    action_at: Option<Millis>,
    logged_transitions: usize,
    log: Option<String>,
    /// Flow ids as JSON strings.
    flow_json: Vec<String>,
}

impl Run {
    fn new(sim: Simulation) -> Self {
        let cfg = sim.config;
        let topo = sim.topo.clone();
        let controller = Controller::new(&topo, &sim.flows, cfg.controller());
        let routes = controller
            .routes()
            .entries()
            .iter()
            .map(|e| {
                e.active
                    .as_ref()
                    .and_then(|p| Route::resolve(&topo, p))
                    .map(Arc::new)
            })
            .collect();
        Self {
            engine: Engine::new(),
            timelines: vec![UsabilityTimeline::default(); topo.link_count()],
            pending: vec![None; sim.flows.len()],
            packets: Vec::new(),
            free: Vec::new(),
            next_packet: 0,
            metrics: Metrics::new(sim.name.clone(), cfg.seed, cfg.duration_ms),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            action_at: None,
            logged_transitions: 0,
            log: sim.event_log.then(String::new),
            flow_json: sim
                .flows
                .iter()
                .map(|f| Value::from(f.id.as_str()).to_string())
                .collect(),
            controller,
            routes,
            topo,
            sim,
        }
    }

    fn log(&mut self, record: impl FnOnce() -> Value) {
        if let Some(buf) = &mut self.log {
            let mut v = record();
            v["t"] = json!(self.engine.now());
            buf.push_str(&v.to_string());
            buf.push('\n');
        }
    }

    fn log_transitions(&mut self) {
        while self.logged_transitions < self.controller.transitions().len() {
            let t = self.controller.transitions()[self.logged_transitions];
            self.logged_transitions += 1;
            self.log(|| json!({"ev": "state", "from": t.from, "to": t.to}));
        }
    }

    fn execute(mut self) -> RunOutput {
        let cfg = self.sim.config;
        let end = cfg.duration_ms;
        let name = self.sim.name.clone();
        self.log(|| json!({"ev": "run_start", "scenario": name, "config": cfg}));
        let init: Vec<_> = self
            .controller
            .routes()
            .entries()
            .iter()
            .map(|e| {
                (
                    e.flow.clone(),
                    path_json(e.active.as_ref()),
                    path_json(e.backup.as_ref()),
                )
            })
            .collect();
        for (flow, path, backup) in init {
            self.log(|| json!({"ev": "route_init", "flow": flow, "path": path, "backup": backup}));
        }

        // Faults go first so they precede anything else due at the same instant.
        for (i, spec) in self.sim.faults.iter().enumerate() {
            if spec.at < end {
                self.engine
                    .schedule(Event::Fault(i), spec.at)
                    .expect("future");
            }
        }
        for link in 0..self.topo.link_count() {
            self.engine
                .schedule(Event::ProbeSend { link }, 0)
                .expect("future");
        }
        for (flow, f) in self.sim.flows.iter().enumerate() {
            if f.emission_time(0) < f.end.min(end) {
                self.engine
                    .schedule(Event::Emit { flow, k: 0 }, f.emission_time(0))
                    .expect("future");
            }
        }

        while let Some(ev) = self.engine.pop_until(end.saturating_sub(1)) {
            self.handle(ev.payload);
        }
        // Past the horizon only packets already in flight are carried to completion.
        while let Some(ev) = self.engine.pop_until(Millis::MAX) {
            if let Event::Hop { slot } = ev.payload {
                self.hop(slot);
            }
        }
        self.metrics.end_run();
        self.log(|| json!({"ev": "run_end"}));

        let routes_before = self
            .controller
            .routes()
            .entries()
            .iter()
            .filter_map(|e| e.primary.clone().map(|p| (e.flow.clone(), p)))
            .collect();
        let routes_after = self.controller.routes().snapshot();
        let node_status = classify_node_status(&self.topo, &routes_before, &routes_after);
        RunOutput {
            report: self.metrics.report().expect("run ended"),
            config: cfg,
            routes_before,
            routes_after,
            node_status,
            transitions: self.controller.transitions().to_vec(),
            final_state: self.controller.state(),
            final_topology: self.topo,
            event_log: self.log,
        }
    }

    fn handle(&mut self, ev: Event) {
        match ev {
            Event::Fault(i) => self.fault(i),
            Event::Emit { flow, k } => self.emit(flow, k),
            Event::Hop { slot } => self.hop(slot),
            Event::ProbeSend { link } => {
                let cfg = self.sim.config;
                let now = self.engine.now();
                self.engine.schedule_in(
                    Event::ProbeDeadline { link, sent_at: now },
                    cfg.probe_timeout_ms,
                );
                if now + cfg.probe_interval_ms < cfg.duration_ms {
                    self.engine
                        .schedule_in(Event::ProbeSend { link }, cfg.probe_interval_ms);
                }
            }
            Event::ProbeDeadline { link, sent_at } => self.probe_deadline(link, sent_at),
            Event::ControllerAction => self.controller_action(),
            Event::Commit { flow } => self.commit(flow),
        }
    }

    fn fault(&mut self, i: usize) {
        let now = self.engine.now();
        let spec = self.sim.faults[i].clone();
        let flipped = apply_fault(&mut self.topo, &spec, now).expect("validated fault");
        for li in flipped {
            let usable = self.topo.link_usable(li);
            self.timelines[li].record(now, usable);
        }
        let target = spec.target.to_string();
        if !spec.is_failure() {
            let params = spec.congestion;
            self.log(|| json!({"ev": spec.kind.to_string(), "target": target, "params": params}));
            return;
        }
        let links = element_links(&self.topo, &spec.target);
        let affected: Vec<String> = self
            .controller
            .routes()
            .entries()
            .iter()
            .filter(|e| e.active.as_ref().is_some_and(|p| spec.affects(p)))
            .map(|e| e.flow.clone())
            .collect();
        let id = self.metrics.record_fault(
            spec.kind,
            target.clone(),
            now,
            links.clone(),
            affected.clone(),
        );
        let link_names: Vec<String> = links.iter().map(|l| l.to_string()).collect();
        self.log(|| {
            json!({"ev": "fault", "id": id, "kind": spec.kind, "target": target, "links": link_names, "affected": affected})
        });
    }

    fn alloc(&mut self, packet: Packet) -> usize {
        match self.free.pop() {
            Some(slot) => {
                self.packets[slot] = Some(packet);
                slot
            }
            None => {
                self.packets.push(Some(packet));
                self.packets.len() - 1
            }
        }
    }

    fn emit(&mut self, flow: usize, k: u64) {
        let now = self.engine.now();
        let f = &self.sim.flows[flow];
        let next = f.emission_time(k + 1);
        if next < f.end.min(self.sim.config.duration_ms) {
            self.engine
                .schedule(Event::Emit { flow, k: k + 1 }, next)
                .expect("future");
        }
        let id = self.next_packet;
        self.next_packet += 1;
        self.metrics.record_sent(id, now).expect("fresh packet id");
        match self.routes[flow].clone() {
            Some(route) => {
                let slot = self.alloc(Packet::new(id, flow, k, now, route));
                self.step(slot);
            }
            None => {
                let mut packet = Packet::new(id, flow, k, now, Arc::new(Route::empty()));
                drop_packet(&mut packet, now, LossReason::NoRoute);
                self.settle(&packet);
            }
        }
    }

    fn hop(&mut self, slot: usize) {
        let now = self.engine.now();
        let packet = self.packets[slot].as_mut().expect("live packet");
        if arrive(&self.topo, &self.timelines, packet, now).is_err() {
            self.finish(slot);
        } else {
            self.step(slot);
        }
    }

    /// Forwards the packet in `slot` from the node it sits at.
    fn step(&mut self, slot: usize) {
        let now = self.engine.now();
        let latency = self.sim.config.per_hop_latency_ms;
        let packet = self.packets[slot].as_mut().expect("live packet");
        match forward(&self.topo, packet, now, latency, &mut self.rng) {
            Step::Hop { arrive_at } => {
                self.engine
                    .schedule(Event::Hop { slot }, arrive_at)
                    .expect("future");
            }
            Step::Delivered | Step::Lost(_) => self.finish(slot),
        }
    }

    fn finish(&mut self, slot: usize) {
        let packet = self.packets[slot].take().expect("live packet");
        self.free.push(slot);
        self.settle(&packet);
    }

    fn settle(&mut self, packet: &Packet) {
        let outcome = packet.outcome();
        self.metrics
            .record_outcome(packet.id, outcome)
            .expect("single outcome");
        let Some(buf) = &mut self.log else { return };
        // Hot path: written by hand in the same sorted-key layout as `log`.
        let flow = &self.flow_json[packet.flow];
        let (id, created, now) = (packet.id, packet.created_at, self.engine.now());
        let line = match outcome {
            PacketOutcome::Delivered { .. } => {
                format!(
                    r#"{{"created":{created},"ev":"delivered","flow":{flow},"pkt":{id},"t":{now}}}"#
                )
            }
            PacketOutcome::Lost { reason, .. } => format!(
                r#"{{"created":{created},"ev":"lost","flow":{flow},"pkt":{id},"reason":"{reason}","t":{now}}}"#
            ),
            PacketOutcome::InFlight => unreachable!("settled packets are final"),
        };
        buf.push_str(&line);
        buf.push('\n');
    }

    fn probe_deadline(&mut self, li: usize, sent_at: Millis) {
        let now = self.engine.now();
        let link = self.topo.links()[li].key().clone();
        let outcome = crate::traffic::probe_outcome(
            &self.timelines[li],
            sent_at,
            self.sim.config.probe_timing(),
        );
        let result = ProbeResult {
            link: link.clone(),
            sent_at,
            outcome,
        };
        let name = link.to_string();
        self.log(|| json!({"ev": "probe", "link": name, "sent": sent_at, "outcome": outcome}));
        let verdict = self.controller.observe_probe(&result, now);
        self.log_transitions();
        match verdict {
            ProbeVerdict::Detected => {
                self.metrics.record_detection(&link, now);
                self.log(|| json!({"ev": "detect", "link": name}));
                self.request_action(now);
            }
            ProbeVerdict::Restored => {
                self.log(|| json!({"ev": "restore_detect", "link": name}));
                self.request_action(now);
            }
            _ => debug_assert!(outcome == ProbeOutcome::Ok || verdict != ProbeVerdict::Healthy),
        }
    }

    /// Batches every detection of one instant into a single controller action.
    fn request_action(&mut self, now: Millis) {
        if self.action_at != Some(now) {
            self.action_at = Some(now);
            self.engine.schedule_in(Event::ControllerAction, 0);
        }
    }

    fn controller_action(&mut self) {
        let now = self.engine.now();
        let plans = self.controller.reroute(now);
        self.log_transitions();
        for plan in plans {
            if let Some(old) = self.pending[plan.flow].take() {
                self.engine.cancel(old.handle);
            }
            let handle = self
                .engine
                .schedule(Event::Commit { flow: plan.flow }, plan.commit_at)
                .expect("commit lies ahead");
            let flow = self.sim.flows[plan.flow].id.clone();
            let (via, commit_at) = (plan.via, plan.commit_at);
            self.log(|| json!({"ev": "plan", "flow": flow, "via": via, "commit_at": commit_at}));
            self.pending[plan.flow] = Some(PendingCommit {
                handle,
                path: plan.path,
                via: plan.via,
                decided_at: now,
            });
        }
    }

    fn commit(&mut self, flow: usize) {
        let now = self.engine.now();
        let p = self.pending[flow].take().expect("scheduled commit");
        self.routes[flow] = p
            .path
            .as_ref()
            .and_then(|path| Route::resolve(&self.topo, path))
            .map(Arc::new);
        self.controller.commit(flow, p.path.clone(), now);
        let id = self.sim.flows[flow].id.clone();
        self.metrics
            .record_commit(&id, p.decided_at, now, p.path.is_some());
        let path = path_json(p.path.as_ref());
        self.log(|| json!({"ev": "commit", "flow": id, "decided": p.decided_at, "path": path, "via": p.via}));
        self.log_transitions();
    }
}

/// Runs a scenario with default config and no event log.
pub fn simulate(
    name: &str,
    topo: Topology,
    flows: Vec<Flow>,
    faults: Vec<FaultSpec>,
) -> Result<RunOutput, SimError> {
    Ok(Simulation::new(name, topo, flows, faults, SimConfig::default())?.run())
}
