//! Run statistics: packet loss, per-fault recovery time and rerouting success.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Millis;
use crate::faults::FaultKind;
use crate::topology::LinkKey;
use crate::traffic::{LossReason, PacketOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("packet {0} already recorded")]
    DuplicatePacket(u64),
    #[error("packet {0} was never sent")]
    UnknownPacket(u64),
    #[error("no packets sent in [{t0}, {t1}]")]
    EmptyWindow { t0: Millis, t1: Millis },
    #[error("window start {t0} is after its end {t1}")]
    BadWindow { t0: Millis, t1: Millis },
    #[error("unknown fault {0}")]
    UnknownFault(usize),
    #[error("fault {0} has not quiesced")]
    FaultNotQuiesced(usize),
    #[error("the run has not ended")]
    RunNotEnded,
}

/// `100 * num / den` rounded half up to one decimal place, computed exactly.
pub fn percent(num: u64, den: u64) -> f64 {
    assert!(den > 0, "percent of nothing");
    let tenths = (2000 * u128::from(num) + u128::from(den)) / (2 * u128::from(den));
    tenths as f64 / 10.0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultRecoveryRecord {
    pub fault_id: usize,
    pub kind: FaultKind,
    pub target: String,
    pub fault_at: Millis,
    links: Vec<LinkKey>,
    pub detected_at: Option<Millis>,
    /// Flows whose active path crossed the failed element, sorted by id.
    pub affected: Vec<String>,
    /// Per affected flow: commit time and whether it got a route.
    resolved: BTreeMap<String, (Millis, bool)>,
}

impl FaultRecoveryRecord {
    pub fn affected_flows(&self) -> usize {
        self.affected.len()
    }

    pub fn rerouted(&self) -> Vec<&str> {
        self.resolved
            .iter()
            .filter(|(_, &(_, routed))| routed)
            .map(|(f, _)| f.as_str())
            .collect()
    }

    pub fn rerouted_flows(&self) -> usize {
        self.rerouted().len()
    }

    /// Detected, and every affected flow has a committed decision.
    pub fn is_quiesced(&self) -> bool {
        self.detected_at.is_some() && self.resolved.len() == self.affected.len()
    }

    pub fn last_commit_at(&self) -> Option<Millis> {
        if !self.is_quiesced() {
            return None;
        }
        let detected = self.detected_at?;
        Some(
            self.resolved
                .values()
                .map(|&(t, _)| t)
                .fold(detected, Millis::max),
        )
    }

    /// Fault to last reroute commit; fault to detection when no flow was affected.
    pub fn mttr(&self) -> Option<Millis> {
        self.last_commit_at().map(|t| t - self.fault_at)
    }

    pub fn success_rate(&self) -> f64 {
        if self.affected.is_empty() {
            100.0
        } else {
            percent(self.rerouted_flows() as u64, self.affected.len() as u64)
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct PacketRecord {
    created_at: Millis,
    outcome: PacketOutcome,
}

/// Accumulates simulation records. Every packet is counted exactly once as
/// sent and at most once as delivered or lost. Packet ids are expected to be
/// dense, as handed out by the simulator.
#[derive(Debug, Clone)]
pub struct Metrics {
    scenario: String,
    seed: u64,
    duration: Millis,
    packets: Vec<Option<PacketRecord>>,
    sent: u64,
    delivered: u64,
    lost: BTreeMap<LossReason, u64>,
    faults: Vec<FaultRecoveryRecord>,
    ended: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultReport {
    pub fault_id: usize,
    pub kind: FaultKind,
    pub target: String,
    pub fault_at: Millis,
    pub detected_at: Option<Millis>,
    pub last_commit_at: Option<Millis>,
    pub affected_flows: usize,
    pub rerouted_flows: usize,
    pub affected: Vec<String>,
    pub rerouted: Vec<String>,
    pub mttr_ms: Option<Millis>,
    pub success_rate_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub seed: u64,
    pub duration_ms: Millis,
    pub packets_sent: u64,
    pub delivered: u64,
    pub lost: u64,
    pub in_flight: u64,
    pub lost_by_reason: BTreeMap<String, u64>,
    pub loss_rate_percent: f64,
    pub faults: Vec<FaultReport>,
    /// Worst recovery time over the faults that quiesced.
    pub mttr_ms: Option<Millis>,
    /// Distinct flows hit by any fault, and how many of them were rerouted
    /// after every fault that hit them.
    pub affected_flows: usize,
    pub rerouted_flows: usize,
    pub success_rate_percent: f64,
}

impl Metrics {
    pub fn new(scenario: impl Into<String>, seed: u64, duration: Millis) -> Self {
        Self {
            scenario: scenario.into(),
            seed,
            duration,
            packets: Vec::new(),
            sent: 0,
            delivered: 0,
            lost: BTreeMap::new(),
            faults: Vec::new(),
            ended: false,
        }
    }

    pub fn record_sent(&mut self, id: u64, created_at: Millis) -> Result<(), MetricsError> {
        let i = id as usize;
        if i >= self.packets.len() {
            self.packets.resize(i + 1, None);
        }
        if self.packets[i].is_some() {
            return Err(MetricsError::DuplicatePacket(id));
        }
        self.packets[i] = Some(PacketRecord {
            created_at,
            outcome: PacketOutcome::InFlight,
        });
        self.sent += 1;
        Ok(())
    }

    pub fn record_outcome(&mut self, id: u64, outcome: PacketOutcome) -> Result<(), MetricsError> {
        let rec = self
            .packets
            .get_mut(id as usize)
            .and_then(Option::as_mut)
            .ok_or(MetricsError::UnknownPacket(id))?;
        if rec.outcome != PacketOutcome::InFlight || outcome == PacketOutcome::InFlight {
            return Err(MetricsError::DuplicatePacket(id));
        }
        rec.outcome = outcome;
        match outcome {
            PacketOutcome::Delivered { .. } => self.delivered += 1,
            PacketOutcome::Lost { reason, .. } => *self.lost.entry(reason).or_default() += 1,
            PacketOutcome::InFlight => unreachable!(),
        }
        Ok(())
    }

    pub fn packets_sent(&self) -> u64 {
        self.sent
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn lost(&self) -> u64 {
        self.lost.values().sum()
    }

    pub fn lost_by(&self, reason: LossReason) -> u64 {
        self.lost.get(&reason).copied().unwrap_or(0)
    }

    pub fn in_flight(&self) -> u64 {
        self.packets_sent() - self.delivered - self.lost()
    }

    /// Run-wide loss rate; 0 when nothing was sent.
    pub fn loss_rate(&self) -> f64 {
        match self.packets_sent() {
            0 => 0.0,
            n => percent(self.lost(), n),
        }
    }

    /// Loss rate among packets created in `[t0, t1]`.
    pub fn packet_loss_rate(&self, t0: Millis, t1: Millis) -> Result<f64, MetricsError> {
        if t0 > t1 {
            return Err(MetricsError::BadWindow { t0, t1 });
        }
        let (mut sent, mut lost) = (0, 0);
        for rec in self
            .packets
            .iter()
            .flatten()
            .filter(|r| (t0..=t1).contains(&r.created_at))
        {
            sent += 1;
            if matches!(rec.outcome, PacketOutcome::Lost { .. }) {
                lost += 1;
            }
        }
        if sent == 0 {
            return Err(MetricsError::EmptyWindow { t0, t1 });
        }
        Ok(percent(lost, sent))
    }

    /// Opens a recovery record. `links` are the links the fault takes out and
    /// `affected` the flows whose active path crossed the element.
    pub fn record_fault(
        &mut self,
        kind: FaultKind,
        target: impl Into<String>,
        at: Millis,
        links: Vec<LinkKey>,
        mut affected: Vec<String>,
    ) -> usize {
        affected.sort();
        affected.dedup();
        let fault_id = self.faults.len();
        self.faults.push(FaultRecoveryRecord {
            fault_id,
            kind,
            target: target.into(),
            fault_at: at,
            links,
            detected_at: None,
            affected,
            resolved: BTreeMap::new(),
        });
        fault_id
    }

    /// A link was declared down by the controller.
    pub fn record_detection(&mut self, link: &LinkKey, at: Millis) {
        for f in &mut self.faults {
            if f.detected_at.is_none() && f.fault_at <= at && f.links.contains(link) {
                f.detected_at = Some(at);
            }
        }
    }

    /// A route decision for `flow`, taken at `decided_at`, landed at `at`.
    /// It settles the flow for every fault that hit it no later than the decision.
    pub fn record_commit(&mut self, flow: &str, decided_at: Millis, at: Millis, routed: bool) {
        for f in &mut self.faults {
            if f.fault_at <= decided_at
                && !f.resolved.contains_key(flow)
                && f.affected
                    .binary_search_by(|a| a.as_str().cmp(flow))
                    .is_ok()
            {
                f.resolved.insert(flow.to_string(), (at, routed));
            }
        }
    }

    pub fn end_run(&mut self) {
        self.ended = true;
    }

    pub fn faults(&self) -> &[FaultRecoveryRecord] {
        &self.faults
    }

    fn fault(&self, fault_id: usize) -> Result<&FaultRecoveryRecord, MetricsError> {
        self.faults
            .get(fault_id)
            .ok_or(MetricsError::UnknownFault(fault_id))
    }

    pub fn mttr(&self, fault_id: usize) -> Result<Millis, MetricsError> {
        self.fault(fault_id)?
            .mttr()
            .ok_or(MetricsError::FaultNotQuiesced(fault_id))
    }

    pub fn success_rate(&self, fault_id: usize) -> Result<f64, MetricsError> {
        let f = self.fault(fault_id)?;
        if !f.is_quiesced() {
            return Err(MetricsError::FaultNotQuiesced(fault_id));
        }
        Ok(f.success_rate())
    }

    pub fn report(&self) -> Result<MetricsReport, MetricsError> {
        if !self.ended {
            return Err(MetricsError::RunNotEnded);
        }
        let faults: Vec<FaultReport> = self
            .faults
            .iter()
            .map(|f| FaultReport {
                fault_id: f.fault_id,
                kind: f.kind,
                target: f.target.clone(),
                fault_at: f.fault_at,
                detected_at: f.detected_at,
                last_commit_at: f.last_commit_at(),
                affected_flows: f.affected_flows(),
                rerouted_flows: f.rerouted_flows(),
                affected: f.affected.clone(),
                rerouted: f.rerouted().into_iter().map(String::from).collect(),
                mttr_ms: f.mttr(),
                success_rate_percent: f.success_rate(),
            })
            .collect();

        let mut affected = BTreeSet::new();
        let mut failed = BTreeSet::new();
        for f in &self.faults {
            let rerouted: BTreeSet<&str> = f.rerouted().into_iter().collect();
            for flow in &f.affected {
                affected.insert(flow.as_str());
                if !rerouted.contains(flow.as_str()) {
                    failed.insert(flow.as_str());
                }
            }
        }
        let rerouted_flows = affected.len() - failed.len();
        Ok(MetricsReport {
            scenario: self.scenario.clone(),
            seed: self.seed,
            duration_ms: self.duration,
            packets_sent: self.packets_sent(),
            delivered: self.delivered,
            lost: self.lost(),
            in_flight: self.in_flight(),
            lost_by_reason: LossReason::ALL
                .iter()
                .map(|r| (r.as_str().to_string(), self.lost_by(*r)))
                .collect(),
            loss_rate_percent: self.loss_rate(),
            mttr_ms: faults.iter().filter_map(|f| f.mttr_ms).max(),
            faults,
            affected_flows: affected.len(),
            rerouted_flows,
            success_rate_percent: if affected.is_empty() {
                100.0
            } else {
                percent(rerouted_flows as u64, affected.len() as u64)
            },
        })
    }
}
