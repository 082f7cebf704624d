//! Graphviz export with node status colours.

use std::collections::BTreeMap;
use std::fmt::Write;

use thiserror::Error;

use crate::failover::NodeStatus;
use crate::topology::{NodeId, Topology};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no status for node `{0}`")]
pub struct MissingStatus(pub NodeId);

/// Undirected DOT graph: nodes filled by status, unusable links dashed.
/// Nodes and links come out sorted by id.
pub fn export_dot(
    topo: &Topology,
    statuses: &BTreeMap<NodeId, NodeStatus>,
) -> Result<String, MissingStatus> {
    let mut out = String::from("graph topology {\n  node [style=filled];\n");
    for node in topo.nodes() {
        let status = statuses
            .get(node.id())
            .ok_or_else(|| MissingStatus(node.id().clone()))?;
        writeln!(
            out,
            "  \"{}\" [label=\"{}\\n{}\", fillcolor={}];",
            node.id(),
            node.id(),
            node.kind(),
            status.color()
        )
        .unwrap();
    }
    for link in topo.links() {
        let key = link.key();
        let style = if topo.is_link_usable(key) {
            ""
        } else {
            ", style=dashed"
        };
        writeln!(
            out,
            "  \"{}\" -- \"{}\" [label=\"{}\"{style}];",
            key.a(),
            key.b(),
            link.weight()
        )
        .unwrap();
    }
    out.push_str("}\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Element, ElementState};

    fn all(topo: &Topology, s: NodeStatus) -> BTreeMap<NodeId, NodeStatus> {
        topo.nodes().iter().map(|n| (n.id().clone(), s)).collect()
    }

    #[test]
    fn healthy_is_green_and_solid() {
        let topo = Topology::canonical();
        let dot = export_dot(&topo, &all(&topo, NodeStatus::Active)).unwrap();
        assert_eq!(dot.matches("fillcolor=green").count(), 8);
        assert!(!dot.contains("dashed"));
        assert_eq!(
            dot,
            export_dot(&topo, &all(&topo, NodeStatus::Active)).unwrap()
        );
    }

    #[test]
    fn down_links_dashed() {
        let topo = Topology::canonical()
            .with_element_state(&Element::Node("S2".into()), ElementState::Down)
            .unwrap();
        let dot = export_dot(&topo, &all(&topo, NodeStatus::Active)).unwrap();
        assert_eq!(dot.matches("style=dashed").count(), 2);
        assert!(dot.contains("\"R1\" -- \"S2\" [label=\"1\", style=dashed];"));
    }

    #[test]
    fn missing_status() {
        let topo = Topology::canonical();
        let mut s = all(&topo, NodeStatus::Active);
        s.remove(&NodeId::from("S4"));
        assert_eq!(export_dot(&topo, &s), Err(MissingStatus("S4".into())));
    }
}
