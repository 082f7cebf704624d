//! Network graph model: nodes, weighted links, element state and path computation.
//!
//! The graph is undirected and simple. Routing and forwarding only ever look at
//! the *residual graph*: links whose stored state is up and whose endpoints are
//! both up. Taking a node down never touches its links' stored state, so
//! restoring the node brings the original residual graph back unchanged.
//!
//! Nodes are kept sorted by id, so comparing index sequences is the same as
//! comparing node-id sequences lexicographically. All tie-breaks rely on that.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Millis;

/// Identifier of a node, e.g. `S1` or `R2`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Host,
    Switch,
    Router,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Host => "host",
            NodeKind::Switch => "switch",
            NodeKind::Router => "router",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementState {
    Up,
    Down,
}

/// Unordered node pair naming a link. The smaller id is always stored first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkKey(NodeId, NodeId);

impl LinkKey {
    pub fn new(a: impl Into<NodeId>, b: impl Into<NodeId>) -> Self {
        let (a, b) = (a.into(), b.into());
        if a <= b {
            Self(a, b)
        } else {
            Self(b, a)
        }
    }

    pub fn a(&self) -> &NodeId {
        &self.0
    }

    pub fn b(&self) -> &NodeId {
        &self.1
    }

    pub fn touches(&self, node: &NodeId) -> bool {
        &self.0 == node || &self.1 == node
    }
}

impl From<(&str, &str)> for LinkKey {
    fn from((a, b): (&str, &str)) -> Self {
        Self::new(a, b)
    }
}

impl fmt::Display for LinkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

impl Serialize for LinkKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [&self.0, &self.1].serialize(s)
    }
}

impl<'de> Deserialize<'de> for LinkKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [a, b] = <[NodeId; 2]>::deserialize(d)?;
        Ok(Self::new(a, b))
    }
}

/// A node or a link.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Element {
    Node(NodeId),
    Link(LinkKey),
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Node(n) => n.fmt(f),
            Element::Link(l) => l.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    id: NodeId,
    kind: NodeKind,
    state: ElementState,
}

impl Node {
    pub fn id(&self) -> &NodeId {
        &self.id
    }

    pub fn kind(&self) -> NodeKind {
        self.kind
    }

    pub fn state(&self) -> ElementState {
        self.state
    }
}

/// Windowed congestion attached to a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Congestion {
    pub p_drop: f64,
    pub extra_delay: Millis,
    /// Exclusive end of the congestion window.
    pub until: Millis,
}

impl Congestion {
    pub fn active_at(&self, now: Millis) -> bool {
        now < self.until
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    key: LinkKey,
    weight: f64,
    state: ElementState,
    congestion: Option<Congestion>,
}

impl Link {
    pub fn key(&self) -> &LinkKey {
        &self.key
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn state(&self) -> ElementState {
        self.state
    }

    pub fn congestion(&self) -> Option<&Congestion> {
        self.congestion.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    pub kind: NodeKind,
}

impl NodeSpec {
    pub fn new(id: impl Into<NodeId>, kind: NodeKind) -> Self {
        Self {
            id: id.into(),
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub a: NodeId,
    pub b: NodeId,
    pub weight: f64,
}

impl LinkSpec {
    pub fn new(a: impl Into<NodeId>, b: impl Into<NodeId>, weight: f64) -> Self {
        Self {
            a: a.into(),
            b: b.into(),
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("node id must not be empty")]
    EmptyId,
    #[error("duplicate node id `{0}`")]
    DuplicateId(NodeId),
    #[error("duplicate link {0}")]
    DuplicateLink(LinkKey),
    #[error("link {a}-{b} references unknown node `{missing}`")]
    UnknownEndpoint {
        a: NodeId,
        b: NodeId,
        missing: NodeId,
    },
    #[error("link {0} connects a node to itself")]
    SelfLoop(NodeId),
    #[error("link {link} has non-positive weight {weight}")]
    NonPositiveWeight { link: LinkKey, weight: f64 },
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("no path from {src} to {dst}")]
    NoPath { src: NodeId, dst: NodeId },
    #[error("no backup route from {src} to {dst}")]
    NoBackup { src: NodeId, dst: NodeId },
}

/// An ordered node sequence with its total link cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    nodes: Vec<NodeId>,
    cost: f64,
}

impl Path {
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn src(&self) -> &NodeId {
        &self.nodes[0]
    }

    pub fn dst(&self) -> &NodeId {
        &self.nodes[self.nodes.len() - 1]
    }

    /// Number of links on the path.
    pub fn hops(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn links(&self) -> impl Iterator<Item = LinkKey> + '_ {
        self.nodes
            .windows(2)
            .map(|w| LinkKey::new(w[0].clone(), w[1].clone()))
    }

    pub fn contains_node(&self, node: &NodeId) -> bool {
        self.nodes.contains(node)
    }

    pub fn uses_link(&self, link: &LinkKey) -> bool {
        self.nodes.windows(2).any(|w| {
            (&w[0] == link.a() && &w[1] == link.b()) || (&w[1] == link.a() && &w[0] == link.b())
        })
    }

    pub fn traverses(&self, element: &Element) -> bool {
        match element {
            Element::Node(n) => self.contains_node(n),
            Element::Link(l) => self.uses_link(l),
        }
    }

    /// Ascending cost, then lexicographic node-id sequence.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then_with(|| self.nodes.cmp(&other.nodes))
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<&str> = self.nodes.iter().map(NodeId::as_str).collect();
        write!(f, "[{}] cost {}", ids.join(","), self.cost)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<Node>,
    index: HashMap<NodeId, usize>,
    links: Vec<Link>,
    endpoints: Vec<(usize, usize)>,
    link_index: HashMap<(usize, usize), usize>,
    /// `(neighbor, link)` pairs, sorted by neighbor index.
    adjacency: Vec<Vec<(usize, usize)>>,
}

fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

impl Topology {
    /// Builds a topology with every element up and no congestion.
    pub fn build(nodes: &[NodeSpec], links: &[LinkSpec]) -> Result<Self, TopologyError> {
        let mut sorted: Vec<&NodeSpec> = nodes.iter().collect();
        sorted.sort_by(|x, y| x.id.cmp(&y.id));
        let mut index = HashMap::with_capacity(sorted.len());
        let mut node_vec = Vec::with_capacity(sorted.len());
        for (i, spec) in sorted.iter().enumerate() {
            if spec.id.as_str().is_empty() {
                return Err(TopologyError::EmptyId);
            }
            if index.insert(spec.id.clone(), i).is_some() {
                return Err(TopologyError::DuplicateId(spec.id.clone()));
            }
            node_vec.push(Node {
                id: spec.id.clone(),
                kind: spec.kind,
                state: ElementState::Up,
            });
        }

        let mut topo = Topology {
            adjacency: vec![Vec::new(); node_vec.len()],
            nodes: node_vec,
            index,
            links: Vec::with_capacity(links.len()),
            endpoints: Vec::with_capacity(links.len()),
            link_index: HashMap::with_capacity(links.len()),
        };

        let mut sorted_links: Vec<&LinkSpec> = links.iter().collect();
        sorted_links.sort_by(|x, y| {
            LinkKey::new(x.a.clone(), x.b.clone()).cmp(&LinkKey::new(y.a.clone(), y.b.clone()))
        });
        for spec in sorted_links {
            let lookup = |id: &NodeId| {
                topo.index
                    .get(id)
                    .copied()
                    .ok_or_else(|| TopologyError::UnknownEndpoint {
                        a: spec.a.clone(),
                        b: spec.b.clone(),
                        missing: id.clone(),
                    })
            };
            let i = lookup(&spec.a)?;
            let j = lookup(&spec.b)?;
            if i == j {
                return Err(TopologyError::SelfLoop(spec.a.clone()));
            }
            let key = LinkKey::new(spec.a.clone(), spec.b.clone());
            if !spec.weight.is_finite() || spec.weight <= 0.0 {
                return Err(TopologyError::NonPositiveWeight {
                    link: key,
                    weight: spec.weight,
                });
            }
            let pair = ordered(i, j);
            if topo.link_index.contains_key(&pair) {
                return Err(TopologyError::DuplicateLink(key));
            }
            let li = topo.links.len();
            topo.links.push(Link {
                key,
                weight: spec.weight,
                state: ElementState::Up,
                congestion: None,
            });
            topo.endpoints.push(pair);
            topo.link_index.insert(pair, li);
            topo.adjacency[i].push((j, li));
            topo.adjacency[j].push((i, li));
        }
        for adj in &mut topo.adjacency {
            adj.sort_unstable();
        }
        Ok(topo)
    }

    /// Two routers and six switches arranged so that a single S2 failure
    /// pushes S1->S6 traffic over S3, S4 and S5. R1-R2 is the redundant
    /// router interconnect.
    pub fn canonical() -> Self {
        let nodes = [
            NodeSpec::new("R1", NodeKind::Router),
            NodeSpec::new("R2", NodeKind::Router),
            NodeSpec::new("S1", NodeKind::Switch),
            NodeSpec::new("S2", NodeKind::Switch),
            NodeSpec::new("S3", NodeKind::Switch),
            NodeSpec::new("S4", NodeKind::Switch),
            NodeSpec::new("S5", NodeKind::Switch),
            NodeSpec::new("S6", NodeKind::Switch),
        ];
        let links = [
            ("S1", "S2"),
            ("S2", "R1"),
            ("R1", "R2"),
            ("R2", "S6"),
            ("S1", "S3"),
            ("S3", "S4"),
            ("S4", "S5"),
            ("S5", "R2"),
        ]
        .map(|(a, b)| LinkSpec::new(a, b, 1.0));
        Self::build(&nodes, &links).expect("canonical topology is well-formed")
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Links in key order.
    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn link(&self, key: &LinkKey) -> Option<&Link> {
        self.link_position(key).map(|li| &self.links[li])
    }

    pub fn node_index(&self, id: &NodeId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn link_position(&self, key: &LinkKey) -> Option<usize> {
        let i = self.node_index(key.a())?;
        let j = self.node_index(key.b())?;
        self.link_index.get(&ordered(i, j)).copied()
    }

    pub(crate) fn link_between(&self, i: usize, j: usize) -> Option<usize> {
        self.link_index.get(&ordered(i, j)).copied()
    }

    pub(crate) fn link_endpoints(&self, li: usize) -> (usize, usize) {
        self.endpoints[li]
    }

    pub(crate) fn link_at(&self, li: usize) -> &Link {
        &self.links[li]
    }

    pub(crate) fn node_at(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    /// Link indices incident to a node.
    pub(crate) fn incident_links(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().map(|&(_, li)| li)
    }

    pub fn contains(&self, element: &Element) -> bool {
        match element {
            Element::Node(n) => self.index.contains_key(n),
            Element::Link(l) => self.link_position(l).is_some(),
        }
    }

    /// Marks a node or link up or down. Idempotent.
    pub fn set_element_state(
        &mut self,
        target: &Element,
        state: ElementState,
    ) -> Result<(), TopologyError> {
        match target {
            Element::Node(n) => {
                let i = self
                    .node_index(n)
                    .ok_or_else(|| TopologyError::UnknownElement(n.to_string()))?;
                self.nodes[i].state = state;
            }
            Element::Link(l) => {
                let li = self
                    .link_position(l)
                    .ok_or_else(|| TopologyError::UnknownElement(l.to_string()))?;
                self.links[li].state = state;
            }
        }
        Ok(())
    }

    /// Value-style variant of [`Topology::set_element_state`].
    pub fn with_element_state(
        &self,
        target: &Element,
        state: ElementState,
    ) -> Result<Self, TopologyError> {
        let mut next = self.clone();
        next.set_element_state(target, state)?;
        Ok(next)
    }

    pub fn set_congestion(
        &mut self,
        key: &LinkKey,
        congestion: Option<Congestion>,
    ) -> Result<(), TopologyError> {
        let li = self
            .link_position(key)
            .ok_or_else(|| TopologyError::UnknownElement(key.to_string()))?;
        self.links[li].congestion = congestion;
        Ok(())
    }

    pub(crate) fn node_up(&self, i: usize) -> bool {
        self.nodes[i].state == ElementState::Up
    }

    /// A link is usable when it is up and both endpoints are up.
    pub(crate) fn link_usable(&self, li: usize) -> bool {
        let (i, j) = self.endpoints[li];
        self.links[li].state == ElementState::Up && self.node_up(i) && self.node_up(j)
    }

    pub fn is_link_usable(&self, key: &LinkKey) -> bool {
        self.link_position(key)
            .is_some_and(|li| self.link_usable(li))
    }

    /// Keys of every usable link, in key order.
    pub fn residual_links(&self) -> Vec<LinkKey> {
        (0..self.links.len())
            .filter(|&li| self.link_usable(li))
            .map(|li| self.links[li].key.clone())
            .collect()
    }

    fn residual_neighbors(&self, i: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency[i]
            .iter()
            .copied()
            .filter(move |&(_, li)| self.link_usable(li))
    }

    fn endpoints_of(&self, src: &NodeId, dst: &NodeId) -> Result<(usize, usize), TopologyError> {
        let s = self
            .node_index(src)
            .ok_or_else(|| TopologyError::UnknownElement(src.to_string()))?;
        let d = self
            .node_index(dst)
            .ok_or_else(|| TopologyError::UnknownElement(dst.to_string()))?;
        Ok((s, d))
    }

    fn no_path(&self, s: usize, d: usize) -> TopologyError {
        TopologyError::NoPath {
            src: self.nodes[s].id.clone(),
            dst: self.nodes[d].id.clone(),
        }
    }

    pub(crate) fn path_from_indices(&self, seq: &[usize]) -> Path {
        let mut cost = 0.0;
        for w in seq.windows(2) {
            let li = self
                .link_between(w[0], w[1])
                .expect("consecutive path nodes are linked");
            cost += self.links[li].weight;
        }
        Path {
            nodes: seq.iter().map(|&i| self.nodes[i].id.clone()).collect(),
            cost,
        }
    }

    /// Resolves a path to node indices. `None` if any node is unknown.
    pub(crate) fn path_indices(&self, path: &Path) -> Option<Vec<usize>> {
        path.nodes.iter().map(|n| self.node_index(n)).collect()
    }

    /// Sum of link weights along a node sequence, `None` if two consecutive
    /// nodes are not linked.
    pub fn path_cost(&self, nodes: &[NodeId]) -> Option<f64> {
        let mut cost = 0.0;
        for w in nodes.windows(2) {
            cost += self.link(&LinkKey::new(w[0].clone(), w[1].clone()))?.weight;
        }
        Some(cost)
    }

    /// Builds a [`Path`] from node ids, checking that consecutive nodes are
    /// linked and that no node repeats. Element state is not consulted.
    pub fn make_path(&self, nodes: Vec<NodeId>) -> Option<Path> {
        if nodes.is_empty() || nodes.iter().any(|n| self.node(n).is_none()) {
            return None;
        }
        let unique: HashSet<&NodeId> = nodes.iter().collect();
        if unique.len() != nodes.len() {
            return None;
        }
        let cost = self.path_cost(&nodes)?;
        Some(Path { nodes, cost })
    }

    /// True if every node and link of `path` is currently usable.
    pub fn is_path_usable(&self, path: &Path) -> bool {
        let Some(seq) = self.path_indices(path) else {
            return false;
        };
        if !seq.iter().all(|&i| self.node_up(i)) {
            return false;
        }
        seq.windows(2).all(|w| {
            self.link_between(w[0], w[1])
                .is_some_and(|li| self.link_usable(li))
        })
    }

    /// Minimum-cost path over the residual graph. Equal-cost candidates are
    /// ordered by their node-id sequence and the smallest wins.
    pub fn shortest_path(&self, src: &NodeId, dst: &NodeId) -> Result<Path, TopologyError> {
        let (s, d) = self.endpoints_of(src, dst)?;
        self.shortest_indices(s, d)
            .map(|(seq, _)| self.path_from_indices(&seq))
            .ok_or_else(|| self.no_path(s, d))
    }

    fn shortest_indices(&self, s: usize, d: usize) -> Option<(Vec<usize>, f64)> {
        if !self.node_up(s) || !self.node_up(d) {
            return None;
        }
        let mut settled = vec![false; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        heap.push(Reverse(Label {
            cost: 0.0,
            seq: vec![s],
        }));
        while let Some(Reverse(label)) = heap.pop() {
            let at = *label.seq.last().expect("labels are non-empty");
            if settled[at] {
                continue;
            }
            settled[at] = true;
            if at == d {
                return Some((label.seq, label.cost));
            }
            for (next, li) in self.residual_neighbors(at) {
                if settled[next] {
                    continue;
                }
                let mut seq = label.seq.clone();
                seq.push(next);
                heap.push(Reverse(Label {
                    cost: label.cost + self.links[li].weight,
                    seq,
                }));
            }
        }
        None
    }

    /// Calls `visit` for every simple residual path from `s` to `d`, pruning
    /// partial paths that exceed `bound`.
    fn for_each_simple_path(
        &self,
        s: usize,
        d: usize,
        bound: Option<f64>,
        visit: &mut dyn FnMut(&[usize], f64),
    ) {
        if !self.node_up(s) || !self.node_up(d) {
            return;
        }
        let mut on_path = vec![false; self.nodes.len()];
        let mut seq = vec![s];
        on_path[s] = true;
        self.dfs(d, 0.0, bound, &mut seq, &mut on_path, visit);
    }

    fn dfs(
        &self,
        d: usize,
        cost: f64,
        bound: Option<f64>,
        seq: &mut Vec<usize>,
        on_path: &mut [bool],
        visit: &mut dyn FnMut(&[usize], f64),
    ) {
        let at = *seq.last().expect("non-empty");
        if at == d {
            visit(seq, cost);
            return;
        }
        for (next, li) in self.residual_neighbors(at) {
            if on_path[next] {
                continue;
            }
            let next_cost = cost + self.links[li].weight;
            if bound.is_some_and(|b| next_cost > b) {
                continue;
            }
            on_path[next] = true;
            seq.push(next);
            self.dfs(d, next_cost, bound, seq, on_path, visit);
            seq.pop();
            on_path[next] = false;
        }
    }

    /// Every simple residual path whose cost equals the shortest-path cost,
    /// in canonical order.
    pub fn equal_cost_paths(&self, src: &NodeId, dst: &NodeId) -> Result<Vec<Path>, TopologyError> {
        let (s, d) = self.endpoints_of(src, dst)?;
        let (_, best) = self
            .shortest_indices(s, d)
            .ok_or_else(|| self.no_path(s, d))?;
        let mut found = Vec::new();
        self.for_each_simple_path(s, d, Some(best), &mut |seq, cost| {
            if cost == best {
                found.push(seq.to_vec());
            }
        });
        found.sort();
        Ok(found
            .iter()
            .map(|seq| self.path_from_indices(seq))
            .collect())
    }

    /// Backup route for `primary`: the alternative sharing the fewest links
    /// with it, so an edge-disjoint route wins whenever one exists. Ties go to
    /// fewer shared intermediate nodes, then lower cost, then canonical order.
    /// `NoBackup` when the primary is the only route.
    pub fn disjoint_backup(&self, primary: &Path) -> Result<Path, TopologyError> {
        let (s, d) = self.endpoints_of(primary.src(), primary.dst())?;
        let no_backup = || TopologyError::NoBackup {
            src: primary.src().clone(),
            dst: primary.dst().clone(),
        };
        let seq = self.path_indices(primary).ok_or_else(no_backup)?;
        if seq.len() < 2 {
            return Err(no_backup());
        }
        let primary_links: HashSet<usize> = seq
            .windows(2)
            .filter_map(|w| self.link_between(w[0], w[1]))
            .collect();
        let interior: HashSet<usize> = seq[1..seq.len() - 1].iter().copied().collect();

        let mut best: Option<(usize, usize, f64, Vec<usize>)> = None;
        self.for_each_simple_path(s, d, None, &mut |cand, cost| {
            if cand == seq.as_slice() {
                return;
            }
            let links = cand
                .windows(2)
                .filter(|w| {
                    self.link_between(w[0], w[1])
                        .is_some_and(|li| primary_links.contains(&li))
                })
                .count();
            let nodes = cand[1..cand.len() - 1]
                .iter()
                .filter(|n| interior.contains(n))
                .count();
            let better = match &best {
                None => true,
                Some((bl, bn, bc, bseq)) => {
                    links
                        .cmp(bl)
                        .then(nodes.cmp(bn))
                        .then_with(|| cost.total_cmp(bc))
                        .then_with(|| cand.cmp(bseq.as_slice()))
                        == Ordering::Less
                }
            };
            if better {
                best = Some((links, nodes, cost, cand.to_vec()));
            }
        });
        best.map(|(_, _, _, seq)| self.path_from_indices(&seq))
            .ok_or_else(no_backup)
    }

    /// True iff `src` and `dst` are connected in the residual graph.
    pub fn is_reachable(&self, src: &NodeId, dst: &NodeId) -> Result<bool, TopologyError> {
        let (s, d) = self.endpoints_of(src, dst)?;
        if !self.node_up(s) || !self.node_up(d) {
            return Ok(false);
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([s]);
        seen[s] = true;
        while let Some(at) = queue.pop_front() {
            if at == d {
                return Ok(true);
            }
            for (next, _) in self.residual_neighbors(at) {
                if !seen[next] {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
        Ok(false)
    }
}

/// Dijkstra label ordered by `(cost, node sequence)`.
#[derive(Debug, Clone)]
struct Label {
    cost: f64,
    seq: Vec<usize>,
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Label {}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then_with(|| self.seq.cmp(&other.seq))
    }
}
