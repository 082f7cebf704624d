//! A single link failure under load: probes detect it, the controller moves
//! affected flows onto their backups, and the report gives loss and MTTR.
//!
//! cargo run --release --example link_failover

use ftswitch::faults::FaultSpec;
use ftswitch::sim::simulate;
use ftswitch::topology::Topology;
use ftswitch::traffic::Flow;

fn main() {
    let flows = vec![
        Flow::new("f1", "S1", "S6", 10.0, 0, 10_000).unwrap(),
        Flow::new("f2", "S3", "S6", 10.0, 0, 10_000).unwrap(),
        Flow::new("f3", "S4", "S5", 10.0, 0, 10_000).unwrap(),
    ];
    let faults = vec![FaultSpec::link_down(("S2", "R1"), 5_000)];
    let out = simulate("link_failover", Topology::canonical(), flows, faults).unwrap();

    for t in &out.transitions {
        println!("{:>5} ms  {} -> {}", t.at, t.from, t.to);
    }
    for (flow, path) in &out.routes_after {
        let before = &out.routes_before[flow];
        let mark = if before == path { "" } else { "  (moved)" };
        println!("{flow}: {path}{mark}");
    }
    let r = &out.report;
    for f in &r.faults {
        println!(
            "fault {} {} at {} ms: detected {:?}, mttr {:?} ms, {} of {} flows rerouted",
            f.fault_id,
            f.target,
            f.fault_at,
            f.detected_at,
            f.mttr_ms,
            f.rerouted_flows,
            f.affected_flows
        );
    }
    println!(
        "loss {:.1}% ({} of {})",
        r.loss_rate_percent, r.lost, r.packets_sent
    );
}
