//! Heartbeat probing against a link that fails mid-cycle, and the miss
//! counter that turns missed probes into a detection.
//!
//! cargo run --example probe_detection

use ftswitch::failover::DetectionTracker;
use ftswitch::topology::LinkKey;
use ftswitch::traffic::{probe_cycle, ProbeTiming, UsabilityTimeline};

fn main() {
    let link = LinkKey::from(("S2", "R1"));
    let mut timeline = UsabilityTimeline::default();
    timeline.record(5_010, false);
    timeline.record(5_200, true);

    let timing = ProbeTiming {
        interval: 25,
        timeout: 10,
        per_hop_latency: 1,
    };
    let mut tracker = DetectionTracker::new(2);
    for probe in probe_cycle(&link, &timeline, timing, 5_250)
        .into_iter()
        .filter(|p| p.sent_at >= 4_975)
    {
        let verdict = tracker.observe(&probe);
        println!(
            "sent {:>5}  {:?}  {:?}",
            probe.sent_at, probe.outcome, verdict
        );
    }
}
