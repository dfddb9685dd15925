//! Constant-bit-rate source/sink flows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{RngStream, SimTime};
use crate::routing::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error("{pairs} flow pairs need {needed} distinct nodes but only {nodes} exist")]
    TooFewNodes { pairs: usize, needed: usize, nodes: usize },
    #[error("invalid start window [{0}, {1})")]
    StartWindow(f64, f64),
    #[error("packet rate must be positive, got {0}")]
    Rate(f64),
}

/// Application payload frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPacket {
    pub flow: u32,
    pub seq: u32,
    pub src: NodeId,
    pub dst: NodeId,
    pub created_at: SimTime,
    /// Remaining hops before the packet is dropped.
    pub ttl: u32,
    pub bytes: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub n_pairs: usize,
    pub pkt_bytes: u32,
    pub pkts_per_s: f64,
    pub start_window: [f64; 2],
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            n_pairs: 10,
            pkt_bytes: 64,
            pkts_per_s: 4.0,
            start_window: [50.0, 51.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub id: u32,
    pub src: NodeId,
    pub dst: NodeId,
    pub pkt_bytes: u32,
    pub pkts_per_s: f64,
    pub start_at: SimTime,
    pub stop_at: SimTime,
}

impl FlowSpec {
    /// Application bit rate in b/s.
    pub fn app_rate_bps(&self) -> f64 {
        self.pkt_bytes as f64 * 8.0 * self.pkts_per_s
    }

    /// Time of the `k`-th send, or `None` once it would fall at or after `stop_at`.
    pub fn send_time(&self, k: u32) -> Option<SimTime> {
        let t = self.start_at.as_secs() + k as f64 / self.pkts_per_s;
        (t < self.stop_at.as_secs()).then(|| SimTime::secs(t))
    }

    /// All send instants `start_at + k/rate` in `[start_at, stop_at)`.
    pub fn emit_schedule(&self) -> Vec<SimTime> {
        (0..).map_while(|k| self.send_time(k)).collect()
    }
}

/// Draws `n_pairs` flows with pairwise-disjoint endpoints.
pub fn build_flows(
    cfg: &TrafficConfig,
    n_nodes: usize,
    stop_at: SimTime,
    rng: &mut RngStream,
) -> Result<Vec<FlowSpec>, TrafficError> {
    let needed = 2 * cfg.n_pairs;
    if needed > n_nodes {
        return Err(TrafficError::TooFewNodes {
            pairs: cfg.n_pairs,
            needed,
            nodes: n_nodes,
        });
    }
    let [lo, hi] = cfg.start_window;
    if !(lo >= 0.0 && hi >= lo) {
        return Err(TrafficError::StartWindow(lo, hi));
    }
    if !(cfg.pkts_per_s > 0.0) {
        return Err(TrafficError::Rate(cfg.pkts_per_s));
    }
    // Partial Fisher-Yates: the first 2·n_pairs slots become the endpoints.
    let mut pool: Vec<u32> = (0..n_nodes as u32).collect();
    for i in 0..needed {
        let j = i + rng.index(n_nodes - i);
        pool.swap(i, j);
    }
    let mut flows = Vec::with_capacity(cfg.n_pairs);
    for i in 0..cfg.n_pairs {
        let start = rng.uniform(lo, hi).map_err(|_| TrafficError::StartWindow(lo, hi))?;
        flows.push(FlowSpec {
            id: i as u32,
            src: NodeId(pool[2 * i]),
            dst: NodeId(pool[2 * i + 1]),
            pkt_bytes: cfg.pkt_bytes,
            pkts_per_s: cfg.pkts_per_s,
            start_at: SimTime::secs(start),
            stop_at,
        });
    }
    Ok(flows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn flows(n_pairs: usize, nodes: usize) -> Result<Vec<FlowSpec>, TrafficError> {
        let cfg = TrafficConfig {
            n_pairs,
            ..TrafficConfig::default()
        };
        build_flows(&cfg, nodes, SimTime::secs(200.0), &mut RngStream::new(1, "traffic"))
    }

    #[test]
    fn ten_pairs_use_twenty_endpoints() {
        let f = flows(10, 50).unwrap();
        let ends: BTreeSet<NodeId> = f.iter().flat_map(|x| [x.src, x.dst]).collect();
        assert_eq!(ends.len(), 20);
        assert!(f.iter().all(|x| x.src != x.dst));
    }

    #[test]
    fn zero_pairs_is_empty() {
        assert!(flows(0, 2).unwrap().is_empty());
    }

    #[test]
    fn starts_inside_window() {
        for seed in 0..20 {
            let cfg = TrafficConfig::default();
            let f = build_flows(&cfg, 50, SimTime::secs(200.0), &mut RngStream::new(seed, "traffic")).unwrap();
            assert!(f.iter().all(|x| (50.0..51.0).contains(&x.start_at.as_secs())));
        }
    }

    #[test]
    fn too_few_nodes() {
        assert!(matches!(flows(3, 5), Err(TrafficError::TooFewNodes { needed: 6, .. })));
    }

    #[test]
    fn app_rates() {
        let mut f = flows(1, 2).unwrap().remove(0);
        assert_eq!(f.app_rate_bps(), 2048.0);
        f.pkt_bytes = 128;
        assert_eq!(f.app_rate_bps(), 4096.0);
    }

    #[test]
    fn one_fifty_seconds_at_four_per_second() {
        let mut f = flows(1, 2).unwrap().remove(0);
        f.start_at = SimTime::secs(50.0);
        f.stop_at = SimTime::secs(200.0);
        let sched = f.emit_schedule();
        assert_eq!(sched.len(), 600);
        assert!(sched.windows(2).all(|w| w[0] < w[1]));
    }
}
