//! Constant-rate flows, hop-by-hop packet forwarding and link health probes.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Millis;
use crate::topology::{ElementState, LinkKey, NodeId, Path, Topology};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("flow `{0}` has identical source and destination")]
    SameEndpoints(String),
    #[error("flow `{id}` has non-positive rate {rate}")]
    NonPositiveRate { id: String, rate: f64 },
    #[error("flow `{id}` starts at {start} ms but ends at {end} ms")]
    EmptyWindow {
        id: String,
        start: Millis,
        end: Millis,
    },
    #[error("flow `{id}` references unknown node `{node}`")]
    UnknownEndpoint { id: String, node: NodeId },
}

/// A source-destination packet stream emitting `rate` packets per ms over `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub id: String,
    pub src: NodeId,
    pub dst: NodeId,
    pub rate: f64,
    pub start: Millis,
    pub end: Millis,
}

impl Flow {
    pub fn new(
        id: impl Into<String>,
        src: impl Into<NodeId>,
        dst: impl Into<NodeId>,
        rate: f64,
        start: Millis,
        end: Millis,
    ) -> Result<Self, FlowError> {
        let flow = Self {
            id: id.into(),
            src: src.into(),
            dst: dst.into(),
            rate,
            start,
            end,
        };
        flow.check()?;
        Ok(flow)
    }

    pub fn check(&self) -> Result<(), FlowError> {
        if self.src == self.dst {
            return Err(FlowError::SameEndpoints(self.id.clone()));
        }
        if !self.rate.is_finite() || self.rate <= 0.0 {
            return Err(FlowError::NonPositiveRate {
                id: self.id.clone(),
                rate: self.rate,
            });
        }
        if self.start >= self.end {
            return Err(FlowError::EmptyWindow {
                id: self.id.clone(),
                start: self.start,
                end: self.end,
            });
        }
        Ok(())
    }

    pub fn check_endpoints(&self, topo: &Topology) -> Result<(), FlowError> {
        for node in [&self.src, &self.dst] {
            if topo.node(node).is_none() {
                return Err(FlowError::UnknownEndpoint {
                    id: self.id.clone(),
                    node: node.clone(),
                });
            }
        }
        Ok(())
    }

    /// Emission instant of the `k`-th packet: `start + floor(k / rate)`.
    pub fn emission_time(&self, k: u64) -> Millis {
        // The epsilon absorbs representation error in rates like 0.1.
        self.start + (k as f64 / self.rate + 1e-9).floor() as Millis
    }

    /// Emission instants before `min(end, horizon)`.
    pub fn emission_times(&self, horizon: Millis) -> impl Iterator<Item = Millis> + '_ {
        let stop = self.end.min(horizon);
        (0u64..)
            .map(|k| self.emission_time(k))
            .take_while(move |&t| t < stop)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossReason {
    LinkDown,
    NodeDown,
    Congestion,
    NoRoute,
}

impl LossReason {
    pub const ALL: [LossReason; 4] = [
        LossReason::LinkDown,
        LossReason::NodeDown,
        LossReason::Congestion,
        LossReason::NoRoute,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LossReason::LinkDown => "link_down",
            LossReason::NodeDown => "node_down",
            LossReason::Congestion => "congestion",
            LossReason::NoRoute => "no_route",
        }
    }
}

impl fmt::Display for LossReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketOutcome {
    InFlight,
    Delivered { at: Millis },
    Lost { at: Millis, reason: LossReason },
}

/// A path resolved to topology indices: `links[i]` joins `nodes[i]` and `nodes[i + 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    nodes: Vec<usize>,
    links: Vec<usize>,
}

impl Route {
    pub fn resolve(topo: &Topology, path: &Path) -> Option<Self> {
        let nodes = topo.path_indices(path)?;
        let links = nodes
            .windows(2)
            .map(|w| topo.link_between(w[0], w[1]))
            .collect::<Option<Vec<_>>>()?;
        Some(Self { nodes, links })
    }

    pub fn hops(&self) -> usize {
        self.links.len()
    }

    pub(crate) fn empty() -> Self {
        Self {
            nodes: Vec::new(),
            links: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Packet {
    pub id: u64,
    pub flow: usize,
    pub seq: u64,
    pub created_at: Millis,
    route: Arc<Route>,
    hop_index: usize,
    departed_at: Millis,
    outcome: PacketOutcome,
}

impl Packet {
    pub fn new(id: u64, flow: usize, seq: u64, created_at: Millis, route: Arc<Route>) -> Self {
        Self {
            id,
            flow,
            seq,
            created_at,
            route,
            hop_index: 0,
            departed_at: created_at,
            outcome: PacketOutcome::InFlight,
        }
    }

    pub fn hop_index(&self) -> usize {
        self.hop_index
    }

    pub fn outcome(&self) -> PacketOutcome {
        self.outcome
    }

    fn settle(&mut self, outcome: PacketOutcome) {
        debug_assert_eq!(
            self.outcome,
            PacketOutcome::InFlight,
            "packet outcome is final"
        );
        self.outcome = outcome;
    }
}

/// Result of handing a packet to the node it currently sits at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Delivered,
    Hop { arrive_at: Millis },
    Lost(LossReason),
}

/// Why the link at `li` cannot carry traffic right now.
fn blocked_reason(topo: &Topology, li: usize) -> LossReason {
    let (i, j) = topo.link_endpoints(li);
    if topo.link_at(li).state() == ElementState::Down || (topo.node_up(i) && topo.node_up(j)) {
        LossReason::LinkDown
    } else {
        LossReason::NodeDown
    }
}

/// Sends the packet onward from its current node. Congested links draw one
/// uniform sample from `rng` per traversal, whatever the drop probability.
pub fn forward<R: Rng + ?Sized>(
    topo: &Topology,
    packet: &mut Packet,
    now: Millis,
    per_hop_latency: Millis,
    rng: &mut R,
) -> Step {
    let hop = packet.hop_index;
    if hop == packet.route.hops() {
        packet.settle(PacketOutcome::Delivered { at: now });
        return Step::Delivered;
    }
    let here = packet.route.nodes[hop];
    let li = packet.route.links[hop];
    if !topo.node_up(here) {
        packet.settle(PacketOutcome::Lost {
            at: now,
            reason: LossReason::NodeDown,
        });
        return Step::Lost(LossReason::NodeDown);
    }
    if !topo.link_usable(li) {
        let reason = blocked_reason(topo, li);
        packet.settle(PacketOutcome::Lost { at: now, reason });
        return Step::Lost(reason);
    }
    let mut delay = per_hop_latency;
    if let Some(c) = topo.link_at(li).congestion().filter(|c| c.active_at(now)) {
        let draw: f64 = rng.random();
        if draw < c.p_drop {
            packet.settle(PacketOutcome::Lost {
                at: now,
                reason: LossReason::Congestion,
            });
            return Step::Lost(LossReason::Congestion);
        }
        delay += c.extra_delay;
    }
    packet.departed_at = now;
    Step::Hop {
        arrive_at: now + delay,
    }
}

/// Lands the packet on the far end of the link it departed over. The link must
/// have stayed usable for the whole `[departed_at, now)` transit.
pub fn arrive(
    topo: &Topology,
    timelines: &[UsabilityTimeline],
    packet: &mut Packet,
    now: Millis,
) -> Result<(), LossReason> {
    let li = packet.route.links[packet.hop_index];
    let next = packet.route.nodes[packet.hop_index + 1];
    let reason = if !topo.node_up(next) {
        Some(LossReason::NodeDown)
    } else if !timelines[li].usable_throughout(packet.departed_at, now) {
        Some(blocked_reason(topo, li))
    } else {
        None
    };
    if let Some(reason) = reason {
        packet.settle(PacketOutcome::Lost { at: now, reason });
        return Err(reason);
    }
    packet.hop_index += 1;
    Ok(())
}

/// Marks a packet lost without forwarding it, e.g. when its flow has no route.
pub fn drop_packet(packet: &mut Packet, now: Millis, reason: LossReason) {
    packet.settle(PacketOutcome::Lost { at: now, reason });
}

/// History of a link's usability. Links start usable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UsabilityTimeline {
    changes: Vec<(Millis, bool)>,
}

impl UsabilityTimeline {
    pub fn record(&mut self, at: Millis, usable: bool) {
        debug_assert!(self.changes.last().is_none_or(|&(t, _)| t <= at));
        if self.usable_at(at) != usable {
            self.changes.push((at, usable));
        }
    }

    pub fn usable_at(&self, t: Millis) -> bool {
        self.changes
            .iter()
            .rev()
            .find(|&&(at, _)| at <= t)
            .is_none_or(|&(_, usable)| usable)
    }

    /// Usable at every instant of `[from, to)`; for an empty interval, usable at `from`.
    pub fn usable_throughout(&self, from: Millis, to: Millis) -> bool {
        self.usable_at(from)
            && !self
                .changes
                .iter()
                .any(|&(at, usable)| !usable && at > from && at < to)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeOutcome {
    Ok,
    Missed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeResult {
    pub link: LinkKey,
    pub sent_at: Millis,
    pub outcome: ProbeOutcome,
}

/// Probe timing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeTiming {
    pub interval: Millis,
    pub timeout: Millis,
    pub per_hop_latency: Millis,
}

impl ProbeTiming {
    pub fn round_trip(&self) -> Millis {
        2 * self.per_hop_latency
    }
}

/// A probe is answered iff the link stays usable for its entire round trip
/// and the echo returns within the timeout.
pub fn probe_outcome(
    timeline: &UsabilityTimeline,
    sent_at: Millis,
    timing: ProbeTiming,
) -> ProbeOutcome {
    let rtt = timing.round_trip();
    if rtt <= timing.timeout && timeline.usable_throughout(sent_at, sent_at + rtt) {
        ProbeOutcome::Ok
    } else {
        ProbeOutcome::Missed
    }
}

/// Results of the periodic probe on one link, for probes sent at
/// `0, interval, 2*interval, ...` up to and including `horizon`.
pub fn probe_cycle(
    link: &LinkKey,
    timeline: &UsabilityTimeline,
    timing: ProbeTiming,
    horizon: Millis,
) -> Vec<ProbeResult> {
    (0..)
        .map(|k| k * timing.interval)
        .take_while(|&t| t <= horizon)
        .map(|sent_at| ProbeResult {
            link: link.clone(),
            sent_at,
            outcome: probe_outcome(timeline, sent_at, timing),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::topology::{Congestion, Element, LinkSpec, NodeKind, NodeSpec};

    fn timing() -> ProbeTiming {
        ProbeTiming {
            interval: 25,
            timeout: 10,
            per_hop_latency: 1,
        }
    }

    fn line() -> Topology {
        let nodes = ["A", "B", "C"].map(|n| NodeSpec::new(n, NodeKind::Switch));
        Topology::build(
            &nodes,
            &[LinkSpec::new("A", "B", 1.0), LinkSpec::new("B", "C", 1.0)],
        )
        .unwrap()
    }

    fn packet(topo: &Topology) -> Packet {
        let path = topo.shortest_path(&"A".into(), &"C".into()).unwrap();
        Packet::new(0, 0, 0, 100, Arc::new(Route::resolve(topo, &path).unwrap()))
    }

    #[test]
    fn emission_schedule() {
        let f = Flow::new("f", "A", "B", 1.0, 0, 10).unwrap();
        assert_eq!(
            f.emission_times(u64::MAX).collect::<Vec<_>>(),
            (0..10).collect::<Vec<_>>()
        );
        let f = Flow::new("f", "A", "B", 0.5, 0, 10).unwrap();
        assert_eq!(
            f.emission_times(u64::MAX).collect::<Vec<_>>(),
            [0, 2, 4, 6, 8]
        );
        let f = Flow::new("f", "A", "B", 0.1, 0, 100).unwrap();
        assert_eq!(f.emission_times(u64::MAX).count(), 10);
        assert_eq!(f.emission_times(35).collect::<Vec<_>>(), [0, 10, 20, 30]);
    }

    #[test]
    fn flow_validation() {
        assert_eq!(
            Flow::new("f", "A", "A", 1.0, 0, 10),
            Err(FlowError::SameEndpoints("f".into()))
        );
        assert!(matches!(
            Flow::new("f", "A", "B", 0.0, 0, 10),
            Err(FlowError::NonPositiveRate { .. })
        ));
        assert!(matches!(
            Flow::new("f", "A", "B", 1.0, 5, 5),
            Err(FlowError::EmptyWindow { .. })
        ));
    }

    fn walk(
        topo: &Topology,
        timelines: &[UsabilityTimeline],
        pkt: &mut Packet,
        mut now: Millis,
    ) -> (Step, Millis) {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        loop {
            match forward(topo, pkt, now, 1, &mut rng) {
                Step::Hop { arrive_at } => {
                    now = arrive_at;
                    if let Err(reason) = arrive(topo, timelines, pkt, now) {
                        return (Step::Lost(reason), now);
                    }
                }
                other => return (other, now),
            }
        }
    }

    #[test]
    fn healthy_path_delivers_after_latency_sum() {
        let topo = line();
        let timelines = vec![UsabilityTimeline::default(); topo.link_count()];
        let mut pkt = packet(&topo);
        let (step, at) = walk(&topo, &timelines, &mut pkt, 100);
        assert_eq!(step, Step::Delivered);
        assert_eq!(at, 102);
        assert_eq!(pkt.outcome(), PacketOutcome::Delivered { at: 102 });
    }

    #[test]
    fn link_down_mid_flight() {
        let mut topo = line();
        let mut timelines = vec![UsabilityTimeline::default(); topo.link_count()];
        let mut pkt = packet(&topo);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            forward(&topo, &mut pkt, 100, 1, &mut rng),
            Step::Hop { arrive_at: 101 }
        );
        arrive(&topo, &timelines, &mut pkt, 101).unwrap();
        // B-C fails while the packet sits at B.
        topo.set_element_state(&Element::Link(("B", "C").into()), ElementState::Down)
            .unwrap();
        let li = topo.link_position(&("B", "C").into()).unwrap();
        timelines[li].record(101, false);
        assert_eq!(
            forward(&topo, &mut pkt, 101, 1, &mut rng),
            Step::Lost(LossReason::LinkDown)
        );
    }

    #[test]
    fn link_failing_during_transit_loses_packet() {
        let mut topo = line();
        let mut timelines = vec![UsabilityTimeline::default(); topo.link_count()];
        let mut pkt = packet(&topo);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let congested = Congestion {
            p_drop: 0.0,
            extra_delay: 5,
            until: 1000,
        };
        topo.set_congestion(&("A", "B").into(), Some(congested))
            .unwrap();
        assert_eq!(
            forward(&topo, &mut pkt, 100, 1, &mut rng),
            Step::Hop { arrive_at: 106 }
        );
        topo.set_element_state(&Element::Link(("A", "B").into()), ElementState::Down)
            .unwrap();
        timelines[topo.link_position(&("A", "B").into()).unwrap()].record(103, false);
        assert_eq!(
            arrive(&topo, &timelines, &mut pkt, 106),
            Err(LossReason::LinkDown)
        );
    }

    #[test]
    fn node_down_reason() {
        let mut topo = line();
        let mut pkt = packet(&topo);
        topo.set_element_state(&Element::Node("B".into()), ElementState::Down)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            forward(&topo, &mut pkt, 100, 1, &mut rng),
            Step::Lost(LossReason::NodeDown)
        );
    }

    #[test]
    fn certain_congestion_drop() {
        let mut topo = line();
        let full = Congestion {
            p_drop: 1.0,
            extra_delay: 0,
            until: 1000,
        };
        topo.set_congestion(&("A", "B").into(), Some(full)).unwrap();
        let mut pkt = packet(&topo);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(
            forward(&topo, &mut pkt, 100, 1, &mut rng),
            Step::Lost(LossReason::Congestion)
        );
        // Outside the window the link is clean again.
        let mut pkt = packet(&topo);
        assert_eq!(
            forward(&topo, &mut pkt, 1000, 1, &mut rng),
            Step::Hop { arrive_at: 1001 }
        );
    }

    #[test]
    fn timeline_queries() {
        let mut tl = UsabilityTimeline::default();
        assert!(tl.usable_at(0));
        tl.record(5000, false);
        tl.record(8000, true);
        assert!(tl.usable_at(4999));
        assert!(!tl.usable_at(5000));
        assert!(tl.usable_at(8000));
        assert!(tl.usable_throughout(4990, 5000));
        assert!(!tl.usable_throughout(4990, 5001));
        assert!(!tl.usable_throughout(5100, 5200));
        assert!(tl.usable_throughout(8000, 9000));
    }

    #[test]
    fn probes_around_a_failure() {
        let link = LinkKey::new("A", "B");
        let mut tl = UsabilityTimeline::default();
        tl.record(5000, false);
        let results = probe_cycle(&link, &tl, timing(), 6000);
        for r in &results {
            let expect = if r.sent_at >= 5000 {
                ProbeOutcome::Missed
            } else {
                ProbeOutcome::Ok
            };
            assert_eq!(r.outcome, expect, "probe sent at {}", r.sent_at);
        }
    }

    #[test]
    fn probe_completing_before_failure_is_ok() {
        let mut tl = UsabilityTimeline::default();
        tl.record(5010, false);
        assert_eq!(probe_outcome(&tl, 5000, timing()), ProbeOutcome::Ok);
        let mut tl = UsabilityTimeline::default();
        tl.record(5001, false);
        assert_eq!(probe_outcome(&tl, 5000, timing()), ProbeOutcome::Missed);
    }
}
