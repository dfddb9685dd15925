//! Ad hoc On-demand Distance Vector routing.
//!
//! Full-TTL RREQ flood with duplicate suppression on `(origin, rreq_id)`, RREP unicast
//! back along the reverse path, HELLO-based link sensing and RERR propagation to
//! precursors. Gratuitous RREP, local repair and expanding-ring search are not modeled.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    Action, ControlMsg, DropReason, Jitter, NodeId, ProtocolKind, Rerr, RouteEntry, RoutingProtocol, Rrep, Rreq, Timer,
};
use crate::engine::SimTime;
use crate::traffic::DataPacket;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AodvConfig {
    pub hello_interval_s: f64,
    pub allowed_hello_loss: u32,
    pub active_route_timeout_s: f64,
    pub rreq_retries: u32,
    pub net_traversal_time_s: f64,
    /// Let intermediate nodes with a fresh-enough route answer RREQs.
    pub intermediate_reply: bool,
    pub buffer_limit: usize,
    /// Upper bound on RREQ hop count.
    pub max_hops: u32,
    pub rerr_min_gap_s: f64,
}

impl Default for AodvConfig {
    fn default() -> Self {
        AodvConfig {
            hello_interval_s: 1.0,
            allowed_hello_loss: 2,
            active_route_timeout_s: 3.0,
            rreq_retries: 2,
            net_traversal_time_s: 2.8,
            intermediate_reply: true,
            buffer_limit: 64,
            max_hops: 64,
            rerr_min_gap_s: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
struct AodvRoute {
    next_hop: NodeId,
    hops: u32,
    seq: u32,
    seq_known: bool,
    valid: bool,
    expires_at: SimTime,
    precursors: BTreeSet<NodeId>,
}

impl AodvRoute {
    fn is_live(&self, now: SimTime) -> bool {
        self.valid && self.expires_at >= now
    }
}

#[derive(Debug, Clone)]
struct Discovery {
    attempt: u32,
    buffered: Vec<DataPacket>,
}

/// Counters exposed for tests and diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AodvStats {
    pub rreq_originated: u64,
    pub rreq_forwarded: u64,
    pub rrep_sent: u64,
    pub rerr_sent: u64,
    pub discoveries_failed: u64,
}

pub struct Aodv {
    me: NodeId,
    cfg: AodvConfig,
    jitter: Jitter,
    own_seq: u32,
    rreq_id: u32,
    routes: BTreeMap<NodeId, AodvRoute>,
    seen: BTreeMap<(NodeId, u32), SimTime>,
    pending: BTreeMap<NodeId, Discovery>,
    neighbors: BTreeMap<NodeId, SimTime>,
    last_rerr: BTreeMap<NodeId, SimTime>,
    stats: AodvStats,
}

/// Outcome of offering new route information to the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Offer {
    Installed,
    Refreshed,
    Rejected,
}

impl Aodv {
    pub(crate) fn new(me: NodeId, cfg: AodvConfig, jitter: Jitter) -> Self {
        Aodv {
            me,
            cfg,
            jitter,
            own_seq: 0,
            rreq_id: 0,
            routes: BTreeMap::new(),
            seen: BTreeMap::new(),
            pending: BTreeMap::new(),
            neighbors: BTreeMap::new(),
            last_rerr: BTreeMap::new(),
            stats: AodvStats::default(),
        }
    }

    pub fn stats(&self) -> &AodvStats {
        &self.stats
    }

    pub fn own_seq(&self) -> u32 {
        self.own_seq
    }

    pub fn is_discovering(&self, dest: NodeId) -> bool {
        self.pending.contains_key(&dest)
    }

    fn neighbor_hold(&self) -> f64 {
        self.cfg.allowed_hello_loss as f64 * self.cfg.hello_interval_s
    }

    fn path_discovery_time(&self) -> f64 {
        2.0 * self.cfg.net_traversal_time_s
    }

    /// Expired routes become invalid with their sequence number bumped.
    fn expire(&mut self, now: SimTime) {
        for route in self.routes.values_mut() {
            if route.valid && route.expires_at < now {
                route.valid = false;
                if route.seq_known {
                    route.seq = route.seq.wrapping_add(1);
                }
            }
        }
        self.seen.retain(|_, until| *until >= now);
    }

    /// Installs `(next_hop, hops, seq)` for `dest` if it is fresher, or equally fresh
    /// and shorter, than what the table holds.
    fn offer(
        &mut self,
        dest: NodeId,
        next_hop: NodeId,
        hops: u32,
        seq: Option<u32>,
        lifetime: f64,
        now: SimTime,
    ) -> Offer {
        let expires_at = now.after(lifetime);
        let Some(route) = self.routes.get_mut(&dest) else {
            self.routes.insert(
                dest,
                AodvRoute {
                    next_hop,
                    hops,
                    seq: seq.unwrap_or(0),
                    seq_known: seq.is_some(),
                    valid: true,
                    expires_at,
                    precursors: BTreeSet::new(),
                },
            );
            return Offer::Installed;
        };
        let live = route.is_live(now);
        let better = match seq {
            Some(s) => !route.seq_known || seq_newer(s, route.seq) || (s == route.seq && (!live || hops < route.hops)),
            // Only a direct neighbour is ever offered without a sequence number.
            None => !live || (hops < route.hops),
        };
        if better {
            route.next_hop = next_hop;
            route.hops = hops;
            if let Some(s) = seq {
                route.seq = s;
                route.seq_known = true;
            }
            route.valid = true;
            route.expires_at = route.expires_at.max(expires_at);
            if !live {
                route.expires_at = expires_at;
            }
            Offer::Installed
        } else if live && route.next_hop == next_hop && route.hops == hops && seq.is_none_or(|s| s == route.seq) {
            route.expires_at = route.expires_at.max(expires_at);
            Offer::Refreshed
        } else {
            Offer::Rejected
        }
    }

    fn touch_neighbor(&mut self, from: NodeId, now: SimTime) {
        self.neighbors.insert(from, now);
        let hold = self.neighbor_hold();
        self.offer(from, from, 1, None, hold, now);
    }

    fn live(&self, dest: NodeId, now: SimTime) -> Option<&AodvRoute> {
        self.routes.get(&dest).filter(|r| r.is_live(now))
    }

    fn originate_rreq(&mut self, dest: NodeId, attempt: u32, now: SimTime) -> Vec<Action> {
        self.own_seq = self.own_seq.wrapping_add(1);
        self.rreq_id = self.rreq_id.wrapping_add(1);
        let pdt = self.path_discovery_time();
        self.seen.insert((self.me, self.rreq_id), now.after(pdt));
        let dest_seq = self.routes.get(&dest).filter(|r| r.seq_known).map(|r| r.seq);
        self.stats.rreq_originated += 1;
        let wait = self.cfg.net_traversal_time_s * f64::from(1u32 << attempt.min(16));
        vec![
            Action::Broadcast(ControlMsg::Rreq(Rreq {
                origin: self.me,
                origin_seq: self.own_seq,
                rreq_id: self.rreq_id,
                dest,
                dest_seq,
                hop_count: 0,
            })),
            Action::SetTimer {
                after: wait,
                timer: Timer::AodvDiscovery { dest, attempt },
            },
        ]
    }

    /// Hands back buffered packets for every destination that now has a route.
    fn release_ready(&mut self, now: SimTime) -> Vec<Action> {
        let ready: Vec<NodeId> = self
            .pending
            .keys()
            .copied()
            .filter(|d| self.live(*d, now).is_some())
            .collect();
        ready
            .into_iter()
            .filter_map(|d| self.pending.remove(&d))
            .filter(|disc| !disc.buffered.is_empty())
            .map(|disc| Action::Release(disc.buffered))
            .collect()
    }

    fn handle_link_break(&mut self, lost: NodeId, now: SimTime) -> Vec<Action> {
        self.neighbors.remove(&lost);
        let mut unreachable = Vec::new();
        let mut notify = false;
        for (dest, route) in self.routes.iter_mut() {
            if route.next_hop != lost || !route.valid {
                continue;
            }
            let was_live = route.expires_at >= now;
            route.valid = false;
            if route.seq_known {
                route.seq = route.seq.wrapping_add(1);
            }
            if was_live {
                unreachable.push((*dest, route.seq));
                notify |= !route.precursors.is_empty();
            }
            route.precursors.clear();
        }
        if notify && !unreachable.is_empty() {
            self.stats.rerr_sent += 1;
            vec![Action::Broadcast(ControlMsg::Rerr(Rerr { unreachable }))]
        } else {
            Vec::new()
        }
    }

    fn check_neighbors(&mut self, now: SimTime) -> Vec<Action> {
        let hold = self.neighbor_hold();
        let lost: Vec<NodeId> = self
            .neighbors
            .iter()
            .filter(|(_, heard)| now.as_secs() - heard.as_secs() > hold)
            .map(|(n, _)| *n)
            .collect();
        lost.into_iter().flat_map(|n| self.handle_link_break(n, now)).collect()
    }

    fn on_rreq(&mut self, from: NodeId, rreq: &Rreq, now: SimTime) -> Vec<Action> {
        if rreq.origin == self.me {
            return Vec::new();
        }
        let key = (rreq.origin, rreq.rreq_id);
        if self.seen.contains_key(&key) {
            return Vec::new();
        }
        let pdt = self.path_discovery_time();
        self.seen.insert(key, now.after(pdt));

        let hops = rreq.hop_count + 1;
        let art = self.cfg.active_route_timeout_s;
        self.offer(rreq.origin, from, hops, Some(rreq.origin_seq), art, now);
        let Some(reverse_hop) = self.live(rreq.origin, now).map(|r| r.next_hop) else {
            return Vec::new();
        };

        if rreq.dest == self.me {
            if let Some(s) = rreq.dest_seq {
                if seq_newer(s, self.own_seq) {
                    self.own_seq = s;
                }
            }
            self.stats.rrep_sent += 1;
            return vec![Action::Unicast {
                to: reverse_hop,
                msg: ControlMsg::Rrep(Rrep {
                    dest: self.me,
                    dest_seq: self.own_seq,
                    hop_count: 0,
                    origin: rreq.origin,
                }),
            }];
        }

        if self.cfg.intermediate_reply {
            if let Some(route) = self.live(rreq.dest, now) {
                let fresh = route.seq_known && rreq.dest_seq.is_none_or(|s| !seq_newer(s, route.seq));
                if fresh {
                    let (seq, route_hops, fwd_hop) = (route.seq, route.hops, route.next_hop);
                    if let Some(r) = self.routes.get_mut(&rreq.dest) {
                        r.precursors.insert(reverse_hop);
                    }
                    if let Some(r) = self.routes.get_mut(&rreq.origin) {
                        r.precursors.insert(fwd_hop);
                    }
                    self.stats.rrep_sent += 1;
                    return vec![Action::Unicast {
                        to: reverse_hop,
                        msg: ControlMsg::Rrep(Rrep {
                            dest: rreq.dest,
                            dest_seq: seq,
                            hop_count: route_hops,
                            origin: rreq.origin,
                        }),
                    }];
                }
            }
        }

        if hops >= self.cfg.max_hops {
            return Vec::new();
        }
        let known = self.routes.get(&rreq.dest).filter(|r| r.seq_known).map(|r| r.seq);
        let dest_seq = match (rreq.dest_seq, known) {
            (Some(a), Some(b)) => Some(if seq_newer(b, a) { b } else { a }),
            (a, b) => a.or(b),
        };
        self.stats.rreq_forwarded += 1;
        vec![Action::Broadcast(ControlMsg::Rreq(Rreq {
            hop_count: hops,
            dest_seq,
            ..rreq.clone()
        }))]
    }

    fn on_hello(&mut self, from: NodeId, hello: &Rrep, now: SimTime) -> Vec<Action> {
        let hold = self.neighbor_hold();
        self.offer(from, from, 1, Some(hello.dest_seq), hold, now);
        self.release_ready(now)
    }

    fn on_rrep(&mut self, from: NodeId, rrep: &Rrep, now: SimTime) -> Vec<Action> {
        let hops = rrep.hop_count + 1;
        let art = self.cfg.active_route_timeout_s;
        let outcome = self.offer(rrep.dest, from, hops, Some(rrep.dest_seq), art, now);
        if rrep.origin == self.me {
            return self.release_ready(now);
        }
        if outcome == Offer::Rejected {
            return Vec::new();
        }
        let Some(reverse_hop) = self.live(rrep.origin, now).map(|r| r.next_hop) else {
            return Vec::new();
        };
        if let Some(r) = self.routes.get_mut(&rrep.dest) {
            r.precursors.insert(reverse_hop);
        }
        if let Some(r) = self.routes.get_mut(&rrep.origin) {
            r.precursors.insert(from);
            r.expires_at = r.expires_at.max(now.after(art));
        }
        self.stats.rrep_sent += 1;
        vec![Action::Unicast {
            to: reverse_hop,
            msg: ControlMsg::Rrep(Rrep {
                hop_count: hops,
                ..rrep.clone()
            }),
        }]
    }

    fn on_rerr(&mut self, from: NodeId, rerr: &Rerr, now: SimTime) -> Vec<Action> {
        let mut forward = Vec::new();
        let mut notify = false;
        for &(dest, seq) in &rerr.unreachable {
            let Some(route) = self.routes.get_mut(&dest) else {
                continue;
            };
            if route.next_hop != from || !route.is_live(now) {
                continue;
            }
            route.valid = false;
            if !route.seq_known || seq_newer(seq, route.seq) {
                route.seq = seq;
                route.seq_known = true;
            }
            notify |= !route.precursors.is_empty();
            route.precursors.clear();
            forward.push((dest, route.seq));
        }
        if notify && !forward.is_empty() {
            self.stats.rerr_sent += 1;
            vec![Action::Broadcast(ControlMsg::Rerr(Rerr { unreachable: forward }))]
        } else {
            Vec::new()
        }
    }
}

/// Sequence-number comparison with wrap-around (signed 32-bit difference).
pub fn seq_newer(a: u32, b: u32) -> bool {
    (a.wrapping_sub(b) as i32) > 0
}

impl RoutingProtocol for Aodv {
    fn node(&self) -> NodeId {
        self.me
    }

    fn kind(&self) -> ProtocolKind {
        ProtocolKind::Aodv
    }

    fn start(&mut self, _now: SimTime) -> Vec<Action> {
        let first = self.jitter.first(self.cfg.hello_interval_s);
        vec![Action::SetTimer {
            after: first,
            timer: Timer::AodvHello,
        }]
    }

    fn on_timer(&mut self, timer: Timer, now: SimTime) -> Vec<Action> {
        self.expire(now);
        match timer {
            Timer::AodvHello => {
                let mut actions = self.check_neighbors(now);
                actions.push(Action::Broadcast(ControlMsg::Rrep(Rrep {
                    dest: self.me,
                    dest_seq: self.own_seq,
                    hop_count: 0,
                    origin: self.me,
                })));
                let next = self.jitter.next(self.cfg.hello_interval_s);
                actions.push(Action::SetTimer {
                    after: next,
                    timer: Timer::AodvHello,
                });
                actions
            }
            Timer::AodvDiscovery { dest, attempt } => {
                let Some(disc) = self.pending.get(&dest) else {
                    return Vec::new();
                };
                if disc.attempt != attempt {
                    return Vec::new();
                }
                if self.live(dest, now).is_some() {
                    return self.release_ready(now);
                }
                if attempt < self.cfg.rreq_retries {
                    if let Some(d) = self.pending.get_mut(&dest) {
                        d.attempt = attempt + 1;
                    }
                    self.originate_rreq(dest, attempt + 1, now)
                } else {
                    self.stats.discoveries_failed += 1;
                    let disc = self.pending.remove(&dest).expect("pending discovery");
                    if disc.buffered.is_empty() {
                        Vec::new()
                    } else {
                        vec![Action::Drop(disc.buffered, DropReason::DiscoveryFailed)]
                    }
                }
            }
            _ => Vec::new(),
        }
    }

    fn on_control(&mut self, from: NodeId, msg: &ControlMsg, now: SimTime) -> Vec<Action> {
        self.expire(now);
        self.touch_neighbor(from, now);
        let mut actions = match msg {
            ControlMsg::Rreq(r) => self.on_rreq(from, r, now),
            ControlMsg::Rrep(r) if r.is_hello() && r.dest == from => self.on_hello(from, r, now),
            ControlMsg::Rrep(r) => self.on_rrep(from, r, now),
            ControlMsg::Rerr(r) => self.on_rerr(from, r, now),
            _ => Vec::new(),
        };
        actions.extend(self.release_ready(now));
        actions
    }

    fn on_frame_heard(&mut self, from: NodeId, now: SimTime) {
        self.expire(now);
        self.touch_neighbor(from, now);
    }

    fn route_entry(&self, dest: NodeId, now: SimTime) -> Option<RouteEntry> {
        if dest == self.me {
            return Some(RouteEntry {
                dest,
                next_hop: dest,
                metric: 0,
                seq_num: Some(self.own_seq),
                expires_at: SimTime::secs(f64::MAX),
            });
        }
        self.live(dest, now).map(|r| RouteEntry {
            dest,
            next_hop: r.next_hop,
            metric: r.hops,
            seq_num: r.seq_known.then_some(r.seq),
            expires_at: r.expires_at,
        })
    }

    fn on_no_route(&mut self, pkt: DataPacket, originated: bool, now: SimTime) -> Vec<Action> {
        self.expire(now);
        let dest = pkt.dst;
        if !originated {
            let mut actions = vec![Action::Drop(vec![pkt], DropReason::NoRoute)];
            let recent = self
                .last_rerr
                .get(&dest)
                .is_some_and(|t| now.as_secs() - t.as_secs() < self.cfg.rerr_min_gap_s);
            if !recent {
                self.last_rerr.insert(dest, now);
                let seq = self.routes.get(&dest).map(|r| r.seq).unwrap_or(0);
                self.stats.rerr_sent += 1;
                actions.push(Action::Broadcast(ControlMsg::Rerr(Rerr {
                    unreachable: vec![(dest, seq)],
                })));
            }
            return actions;
        }
        if let Some(disc) = self.pending.get_mut(&dest) {
            if disc.buffered.len() >= self.cfg.buffer_limit {
                let oldest = disc.buffered.remove(0);
                disc.buffered.push(pkt);
                return vec![Action::Drop(vec![oldest], DropReason::BufferOverflow)];
            }
            disc.buffered.push(pkt);
            return Vec::new();
        }
        self.pending.insert(
            dest,
            Discovery {
                attempt: 0,
                buffered: vec![pkt],
            },
        );
        self.originate_rreq(dest, 0, now)
    }

    fn on_forward(&mut self, pkt: &DataPacket, prev_hop: Option<NodeId>, next_hop: NodeId, now: SimTime) {
        let expiry = now.after(self.cfg.active_route_timeout_s);
        for node in [Some(pkt.dst), Some(next_hop), Some(pkt.src), prev_hop]
            .into_iter()
            .flatten()
        {
            if let Some(r) = self.routes.get_mut(&node) {
                if r.is_live(now) {
                    r.expires_at = r.expires_at.max(expiry);
                }
            }
        }
        if let Some(prev) = prev_hop {
            if let Some(r) = self.routes.get_mut(&pkt.dst) {
                r.precursors.insert(prev);
            }
        }
        if let Some(r) = self.routes.get_mut(&pkt.src) {
            if r.is_live(now) {
                r.precursors.insert(next_hop);
            }
        }
    }

    fn table(&self, now: SimTime) -> Vec<RouteEntry> {
        self.routes.keys().filter_map(|d| self.route_entry(*d, now)).collect()
    }

    fn counters(&self) -> Vec<(&'static str, u64)> {
        let s = &self.stats;
        vec![
            ("rreq_originated", s.rreq_originated),
            ("rreq_forwarded", s.rreq_forwarded),
            ("rrep_sent", s.rrep_sent),
            ("rerr_sent", s.rerr_sent),
            ("discoveries_failed", s.discoveries_failed),
        ]
    }
}
