//! Windowed congestion: seeded random drops and extra delay on one link,
//! without tripping failure detection.
//!
//! cargo run --release --example congestion

use ftswitch::faults::{CongestionParams, FaultSpec};
use ftswitch::sim::{SimConfig, Simulation};
use ftswitch::topology::Topology;
use ftswitch::traffic::{Flow, LossReason};

fn main() {
    let flows = vec![Flow::new("f1", "S1", "S6", 5.0, 0, 4_000).unwrap()];
    let params = CongestionParams {
        p_drop: 0.2,
        extra_delay: 3,
        duration: 1_000,
    };
    let faults = vec![FaultSpec::congestion(("R2", "S6"), 1_000, params)];
    for seed in [1, 2] {
        let config = SimConfig {
            duration_ms: 4_000,
            seed,
            ..SimConfig::default()
        };
        let out = Simulation::new(
            "congestion",
            Topology::canonical(),
            flows.clone(),
            faults.clone(),
            config,
        )
        .unwrap()
        .run();
        let r = &out.report;
        println!(
            "seed {seed}: {} sent, {} dropped by congestion ({:.1}%), controller {}",
            r.packets_sent,
            r.lost_by_reason[LossReason::Congestion.as_str()],
            r.loss_rate_percent,
            out.final_state
        );
    }
}
