//! Node failure with post-run status classification, written as Graphviz.
//!
//! cargo run --release --example node_failure_dot > fabric.dot && dot -Tsvg fabric.dot

use ftswitch::shell::{bundled, export_dot, Scenario};

fn main() {
    let out = Scenario::parse(bundled::NODE_FAILURE_VIEW).unwrap().run();
    for (node, status) in &out.node_status {
        eprintln!("{node}: {status:?}");
    }
    print!(
        "{}",
        export_dot(&out.final_topology, &out.node_status).unwrap()
    );
}
