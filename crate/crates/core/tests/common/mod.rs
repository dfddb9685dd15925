//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mmw_manet::routing::testnet::{adjacency_from_edges, bfs_hops, TestNet};
use mmw_manet::routing::{NodeId, RoutingConfig};

/// Routing defaults without timer jitter and with destination-only RREPs.
pub fn quiet() -> RoutingConfig {
    let mut cfg = RoutingConfig {
        jitter_fraction: 0.0,
        ..RoutingConfig::default()
    };
    cfg.aodv.intermediate_reply = false;
    cfg
}

/// Connected random geometric graph in the unit square with 4..=20 nodes.
pub fn geometric_graph(seed: u64) -> Vec<BTreeSet<NodeId>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(4..=20usize);
        let radius = rng.random_range(0.3..0.5);
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
                if dx.hypot(dy) <= radius {
                    edges.push((i as u32, j as u32));
                }
            }
        }
        let adj = adjacency_from_edges(n, &edges);
        if bfs_hops(&adj, NodeId(0)).len() == n {
            return adj;
        }
    }
}

/// Checks that every node's route to every other node has the BFS hop count and a
/// next hop that is a neighbour one hop closer.
pub fn tables_match(net: &TestNet) -> Result<(), String> {
    let adj = net.adjacency();
    let dist: Vec<BTreeMap<NodeId, u32>> = (0..net.len()).map(|v| bfs_hops(adj, NodeId(v as u32))).collect();
    for u in (0..net.len()).map(|i| NodeId(i as u32)) {
        for v in (0..net.len()).map(|i| NodeId(i as u32)) {
            if u == v {
                continue;
            }
            let e = net
                .node(u)
                .route_entry(v, net.now())
                .ok_or_else(|| format!("{u:?} has no route to {v:?}"))?;
            let want = dist[v.index()][&u];
            if e.metric != want {
                return Err(format!("{u:?}->{v:?}: {} hops, BFS says {want}", e.metric));
            }
            if !adj[u.index()].contains(&e.next_hop) || dist[v.index()][&e.next_hop] + 1 != want {
                return Err(format!(
                    "{u:?}->{v:?}: next hop {:?} is not on a shortest path",
                    e.next_hop
                ));
            }
        }
    }
    Ok(())
}

/// Sum of a named protocol counter over all nodes.
pub fn counter(net: &TestNet, name: &str) -> u64 {
    (0..net.len())
        .flat_map(|i| net.node(NodeId(i as u32)).counters())
        .filter(|(k, _)| *k == name)
        .map(|(_, v)| v)
        .sum()
}
