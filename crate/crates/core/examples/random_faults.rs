//! Poisson fault arrivals with automatic repair. The draw depends only on the
//! seed, so the same seed replays the same failures.
//!
//! cargo run --release --example random_faults

use ftswitch::faults::RandomFaults;
use ftswitch::shell::{bundled, Scenario};

fn main() {
    let mut scenario = Scenario::parse(bundled::TESTCASE1).unwrap();
    scenario.name = "random".into();
    scenario.faults.clear();
    scenario.random_faults = Some(RandomFaults {
        rate_per_s: 0.5,
        start: 1_000,
        end: 9_000,
        repair_after: Some(1_500),
        include_nodes: true,
        seed: None,
    });
    scenario.config.seed = 42;

    for f in scenario.all_faults() {
        println!("{:>5} ms  {} {}", f.at, f.kind, f.target);
    }
    let r = scenario.run().report;
    println!(
        "loss {:.1}%, mttr {:?} ms, success {:.1}% over {} faults",
        r.loss_rate_percent,
        r.mttr_ms,
        r.success_rate_percent,
        r.faults.len()
    );
}
