//! Shortest, equal-cost and backup paths on the eight-node reference fabric.
//!
//! cargo run --example path_queries

use ftswitch::topology::{Element, ElementState, NodeId, Topology};

fn main() {
    let topo = Topology::canonical();
    let (s1, s6) = (NodeId::from("S1"), NodeId::from("S6"));

    let primary = topo.shortest_path(&s1, &s6).expect("connected");
    println!("shortest  {primary}");
    for p in topo.equal_cost_paths(&s1, &s6).expect("connected") {
        println!("equal     {p}");
    }
    match topo.disjoint_backup(&primary) {
        Ok(b) => println!("backup    {b}"),
        Err(e) => println!("backup    none ({e})"),
    }

    let degraded = topo
        .with_element_state(&Element::Link(("S2", "R1").into()), ElementState::Down)
        .unwrap();
    println!("after S2-R1 fails");
    println!(
        "shortest  {}",
        degraded.shortest_path(&s1, &s6).expect("still connected")
    );
}
