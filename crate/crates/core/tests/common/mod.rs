//! Independent oracles and generators shared by the integration tests. Nothing
//! here calls the library's path or metrics code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ftswitch::topology::{LinkSpec, NodeKind, NodeSpec};
use rand::{Rng, RngExt};
use serde_json::Value;

/// Minimum cost over every simple path from `src` to `dst`, costs summed
/// along the path. `None` when disconnected.
pub fn brute_force_min(links: &[(String, String, f64)], src: &str, dst: &str) -> Option<f64> {
    all_simple_paths(links, src, dst)
        .into_iter()
        .map(|(_, c)| c)
        .reduce(f64::min)
}

/// Every simple path with its cost, by exhaustive DFS over the edge list.
pub fn all_simple_paths(
    links: &[(String, String, f64)],
    src: &str,
    dst: &str,
) -> Vec<(Vec<String>, f64)> {
    fn walk(
        links: &[(String, String, f64)],
        dst: &str,
        path: &mut Vec<String>,
        cost: f64,
        out: &mut Vec<(Vec<String>, f64)>,
    ) {
        let at = path.last().unwrap().clone();
        if at == dst {
            out.push((path.clone(), cost));
            return;
        }
        for (a, b, w) in links {
            let next = if *a == at {
                b
            } else if *b == at {
                a
            } else {
                continue;
            };
            if path.contains(next) {
                continue;
            }
            path.push(next.clone());
            walk(links, dst, path, cost + w, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    walk(links, dst, &mut vec![src.to_string()], 0.0, &mut out);
    out
}

/// Connectivity by repeated edge relaxation over the edge list.
pub fn connected(links: &[(String, String)], src: &str, dst: &str) -> bool {
    let mut seen = BTreeSet::from([src.to_string()]);
    loop {
        let before = seen.len();
        for (a, b) in links {
            if seen.contains(a) || seen.contains(b) {
                seen.insert(a.clone());
                seen.insert(b.clone());
            }
        }
        if seen.len() == before {
            return seen.contains(dst);
        }
    }
}

pub struct RandomGraph {
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
}

impl RandomGraph {
    pub fn edge_list(&self) -> Vec<(String, String, f64)> {
        self.links
            .iter()
            .map(|l| (l.a.as_str().to_string(), l.b.as_str().to_string(), l.weight))
            .collect()
    }
}

/// Random simple graph on 2..=`max_nodes` nodes. With `connected` set, a
/// random spanning tree is laid down first.
pub fn random_graph<R: Rng>(
    rng: &mut R,
    max_nodes: usize,
    connected: bool,
    weight: impl Fn(&mut R) -> f64,
) -> RandomGraph {
    let n = rng.random_range(2..=max_nodes);
    let ids: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
    let nodes = ids
        .iter()
        .map(|id| NodeSpec::new(id.as_str(), NodeKind::Switch))
        .collect();
    let mut pairs = BTreeSet::new();
    if connected {
        for i in 1..n {
            let j = rng.random_range(0..i);
            pairs.insert((j, i));
        }
    }
    let extra = rng.random_range(0..=n * (n - 1) / 2);
    for _ in 0..extra {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        if i != j {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    let links = pairs
        .into_iter()
        .map(|(i, j)| LinkSpec::new(ids[i].as_str(), ids[j].as_str(), weight(rng)))
        .collect();
    RandomGraph { nodes, links }
}

/// Figures recomputed from a JSON Lines event log.
#[derive(Debug, Default, PartialEq)]
pub struct Fold {
    pub sent: u64,
    pub lost: u64,
    pub loss_percent: f64,
    pub fault_mttr: Vec<Option<u64>>,
    pub fault_success: Vec<f64>,
    pub mttr: Option<u64>,
    pub success_percent: f64,
}

/// One decimal, half up, via integers.
pub fn pct(num: u64, den: u64) -> f64 {
    ((num * 2000 + den) / (2 * den)) as f64 / 10.0
}

pub fn fold_event_log(log: &str) -> Fold {
    let t = |r: &Value| r["t"].as_u64().unwrap();
    let (mut delivered, mut lost) = (0u64, 0u64);
    let (mut faults, mut detects, mut commits) = (Vec::new(), Vec::new(), Vec::new());
    for line in log.lines() {
        let r: Value = serde_json::from_str(line).expect("json line");
        match r["ev"].as_str().unwrap() {
            "delivered" => delivered += 1,
            "lost" => lost += 1,
            "fault" => faults.push(r),
            "detect" => detects.push(r),
            "commit" => commits.push(r),
            _ => {}
        }
    }
    let mut fold = Fold {
        sent: delivered + lost,
        lost,
        loss_percent: if delivered + lost == 0 {
            0.0
        } else {
            pct(lost, delivered + lost)
        },
        ..Fold::default()
    };

    let mut hit: BTreeMap<String, bool> = BTreeMap::new();
    for fault in &faults {
        let at = t(fault);
        let links: Vec<&str> = fault["links"]
            .as_array()
            .unwrap()
            .iter()
            .map(|l| l.as_str().unwrap())
            .collect();
        let affected: Vec<&str> = fault["affected"]
            .as_array()
            .unwrap()
            .iter()
            .map(|f| f.as_str().unwrap())
            .collect();
        let detected = detects
            .iter()
            .find(|r| t(r) >= at && links.contains(&r["link"].as_str().unwrap()))
            .map(t);
        let mut last = detected;
        let mut rerouted = 0;
        let mut all_resolved = true;
        for flow in &affected {
            let commit = commits
                .iter()
                .find(|r| r["flow"] == *flow && r["decided"].as_u64().unwrap() >= at);
            match commit {
                Some(c) => {
                    let ok = !c["path"].is_null();
                    rerouted += u64::from(ok);
                    last = last.map(|l| l.max(t(c)));
                    *hit.entry(flow.to_string()).or_insert(true) &= ok;
                }
                None => {
                    all_resolved = false;
                    hit.insert(flow.to_string(), false);
                }
            }
        }
        let mttr = if all_resolved {
            last.map(|l| l - at)
        } else {
            None
        };
        fold.fault_mttr.push(mttr);
        fold.fault_success.push(if affected.is_empty() {
            100.0
        } else {
            pct(rerouted, affected.len() as u64)
        });
    }
    fold.mttr = fold.fault_mttr.iter().flatten().copied().max();
    let ok = hit.values().filter(|&&v| v).count() as u64;
    fold.success_percent = if hit.is_empty() {
        100.0
    } else {
        pct(ok, hit.len() as u64)
    };
    fold
}
