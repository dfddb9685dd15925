//! Loss-free network over a fixed adjacency graph, for exercising protocols without
//! the radio model. Every frame takes `latency` seconds and reaches exactly the
//! sender's graph neighbours.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{
    build, forwarding_step_ok, Action, ControlMsg, DropReason, MsgKind, NodeId, ProtocolKind, RoutingConfig,
    RoutingProtocol, Timer,
};
use crate::engine::{Engine, SimTime};
use crate::traffic::DataPacket;

#[derive(Debug, Clone)]
enum NetEvent {
    Timer {
        node: NodeId,
        timer: Timer,
    },
    Control {
        to: NodeId,
        from: NodeId,
        msg: ControlMsg,
    },
    Data {
        at: NodeId,
        from: Option<NodeId>,
        pkt: DataPacket,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub at: SimTime,
    pub node: NodeId,
    pub msg: ControlMsg,
}

pub struct TestNet {
    adjacency: Vec<BTreeSet<NodeId>>,
    nodes: Vec<Box<dyn RoutingProtocol + Send>>,
    engine: Engine<NetEvent>,
    latency: f64,
    pub transmissions: Vec<Transmission>,
    pub delivered: Vec<DataPacket>,
    pub dropped: Vec<(DataPacket, DropReason)>,
    pub loop_violations: u64,
    pub data_forwards: u64,
}

/// Hop distances from `src` by breadth-first search; unreachable nodes are absent.
pub fn bfs_hops(adjacency: &[BTreeSet<NodeId>], src: NodeId) -> BTreeMap<NodeId, u32> {
    let mut dist = BTreeMap::new();
    dist.insert(src, 0);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        for &v in &adjacency[u.index()] {
            if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(v) {
                e.insert(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Adjacency sets from an undirected edge list.
pub fn adjacency_from_edges(n: usize, edges: &[(u32, u32)]) -> Vec<BTreeSet<NodeId>> {
    let mut adj = vec![BTreeSet::new(); n];
    for &(a, b) in edges {
        if a != b {
            adj[a as usize].insert(NodeId(b));
            adj[b as usize].insert(NodeId(a));
        }
    }
    adj
}

impl TestNet {
    pub fn new(adjacency: Vec<BTreeSet<NodeId>>, cfg: &RoutingConfig, kind: ProtocolKind, seed: u64) -> Self {
        let nodes = (0..adjacency.len())
            .map(|i| build(cfg, kind, NodeId(i as u32), seed))
            .collect();
        let mut net = TestNet {
            adjacency,
            nodes,
            engine: Engine::new(),
            latency: 1e-3,
            transmissions: Vec::new(),
            delivered: Vec::new(),
            dropped: Vec::new(),
            loop_violations: 0,
            data_forwards: 0,
        };
        for i in 0..net.nodes.len() {
            let id = NodeId(i as u32);
            let actions = net.nodes[i].start(SimTime::ZERO);
            net.apply(id, actions);
        }
        net
    }

    pub fn now(&self) -> SimTime {
        self.engine.now()
    }

    pub fn node(&self, id: NodeId) -> &dyn RoutingProtocol {
        self.nodes[id.index()].as_ref()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn adjacency(&self) -> &[BTreeSet<NodeId>] {
        &self.adjacency
    }

    pub fn count(&self, kind: MsgKind) -> usize {
        self.transmissions.iter().filter(|t| t.msg.kind() == kind).count()
    }

    pub fn remove_link(&mut self, a: NodeId, b: NodeId) {
        self.adjacency[a.index()].remove(&b);
        self.adjacency[b.index()].remove(&a);
    }

    /// Hands a data packet to its source node at the current time.
    pub fn send(&mut self, src: NodeId, dst: NodeId, flow: u32, seq: u32) {
        let pkt = DataPacket {
            flow,
            seq,
            src,
            dst,
            created_at: self.now(),
            ttl: self.nodes.len() as u32,
            bytes: 64,
        };
        self.engine
            .schedule(
                self.now(),
                NetEvent::Data {
                    at: src,
                    from: None,
                    pkt,
                },
            )
            .expect("current time");
    }

    pub fn run_until(&mut self, t_end: f64) {
        let t_end = SimTime::secs(t_end);
        while let Some((now, _, ev)) = self.engine.next_before(t_end) {
            self.handle(now, ev);
        }
        self.engine.run_until(t_end, |_, _| {});
    }

    fn handle(&mut self, now: SimTime, ev: NetEvent) {
        match ev {
            NetEvent::Timer { node, timer } => {
                let actions = self.nodes[node.index()].on_timer(timer, now);
                self.apply(node, actions);
            }
            NetEvent::Control { to, from, msg } => {
                let p = &mut self.nodes[to.index()];
                p.on_frame_heard(from, now);
                let actions = p.on_control(from, &msg, now);
                self.apply(to, actions);
            }
            NetEvent::Data { at, from, pkt } => {
                if let Some(prev) = from {
                    self.nodes[at.index()].on_frame_heard(prev, now);
                }
                self.forward(at, from, pkt, now);
            }
        }
    }

    fn forward(&mut self, at: NodeId, from: Option<NodeId>, mut pkt: DataPacket, now: SimTime) {
        if pkt.dst == at {
            self.delivered.push(pkt);
            return;
        }
        if pkt.ttl == 0 {
            return;
        }
        let p = &self.nodes[at.index()];
        let Some(next) = p.route_lookup(pkt.dst, now) else {
            let originated = from.is_none() && pkt.src == at;
            let actions = self.nodes[at.index()].on_no_route(pkt, originated, now);
            self.apply(at, actions);
            return;
        };
        if p.kind() == ProtocolKind::Aodv {
            let up = p.route_entry(pkt.dst, now);
            let down = self.nodes[next.index()].route_entry(pkt.dst, now);
            if let (Some(up), Some(down)) = (up, down) {
                if !forwarding_step_ok(&up, &down) {
                    self.loop_violations += 1;
                }
            }
        }
        self.nodes[at.index()].on_forward(&pkt, from, next, now);
        self.data_forwards += 1;
        pkt.ttl -= 1;
        if self.adjacency[at.index()].contains(&next) {
            let at_time = now.after(self.latency);
            self.engine
                .schedule(
                    at_time,
                    NetEvent::Data {
                        at: next,
                        from: Some(at),
                        pkt,
                    },
                )
                .expect("future time");
        }
    }

    fn apply(&mut self, node: NodeId, actions: Vec<Action>) {
        let now = self.engine.now();
        for action in actions {
            match action {
                Action::Broadcast(msg) => {
                    self.transmissions.push(Transmission {
                        at: now,
                        node,
                        msg: msg.clone(),
                    });
                    let at = now.after(self.latency);
                    for &to in &self.adjacency[node.index()] {
                        self.engine
                            .schedule(
                                at,
                                NetEvent::Control {
                                    to,
                                    from: node,
                                    msg: msg.clone(),
                                },
                            )
                            .expect("future time");
                    }
                }
                Action::Unicast { to, msg } => {
                    self.transmissions.push(Transmission {
                        at: now,
                        node,
                        msg: msg.clone(),
                    });
                    if self.adjacency[node.index()].contains(&to) {
                        self.engine
                            .schedule(now.after(self.latency), NetEvent::Control { to, from: node, msg })
                            .expect("future time");
                    }
                }
                Action::SetTimer { after, timer } => {
                    self.engine
                        .schedule(now.after(after.max(0.0)), NetEvent::Timer { node, timer })
                        .expect("future time");
                }
                Action::Release(pkts) => {
                    for pkt in pkts {
                        self.forward(node, None, pkt, now);
                    }
                }
                Action::Drop(pkts, reason) => {
                    self.dropped.extend(pkts.into_iter().map(|p| (p, reason)));
                }
            }
        }
    }
}
