//! Optimized Link State Routing.
//!
//! HELLO-based link sensing with the asymmetric-to-symmetric handshake, greedy MPR
//! selection, TC floods relayed only by MPRs, and hop-count shortest paths over the
//! union of symmetric links, two-hop links and the topology set.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{
    Action, ControlMsg, DropReason, Hello, Jitter, LinkStatus, NodeId, ProtocolKind, RouteEntry, RoutingProtocol, Tc,
    Timer,
};
use crate::engine::SimTime;
use crate::traffic::DataPacket;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OlsrConfig {
    pub hello_interval_s: f64,
    pub tc_interval_s: f64,
    /// Link and two-hop information is held for this many HELLO intervals.
    pub neighbor_hold_factor: f64,
    /// Topology information is held for this many TC intervals.
    pub topology_hold_factor: f64,
    pub duplicate_hold_s: f64,
    pub tc_ttl: u32,
}

impl Default for OlsrConfig {
    fn default() -> Self {
        OlsrConfig {
            hello_interval_s: 2.0,
            tc_interval_s: 5.0,
            neighbor_hold_factor: 3.0,
            topology_hold_factor: 3.0,
            duplicate_hold_s: 30.0,
            tc_ttl: 255,
        }
    }
}

/// Greedy MPR selection over `one_hop` neighbours.
///
/// `coverage[n]` lists the strict two-hop nodes reachable through neighbour `n`. First
/// every neighbour that is the only way to some two-hop node is taken, then the
/// neighbour covering the most still-uncovered nodes is added until all are covered
/// (ties go to the lower node id).
pub fn select_mprs(
    one_hop: &BTreeSet<NodeId>,
    two_hop: &BTreeSet<NodeId>,
    coverage: &BTreeMap<NodeId, BTreeSet<NodeId>>,
) -> BTreeSet<NodeId> {
    let empty = BTreeSet::new();
    let reach = |n: &NodeId| -> &BTreeSet<NodeId> { coverage.get(n).unwrap_or(&empty) };
    let mut mprs = BTreeSet::new();
    let mut uncovered: BTreeSet<NodeId> = two_hop.clone();

    for target in two_hop {
        let covering: Vec<NodeId> = one_hop.iter().copied().filter(|n| reach(n).contains(target)).collect();
        if covering.len() == 1 {
            mprs.insert(covering[0]);
        }
    }
    for m in &mprs {
        for x in reach(m) {
            uncovered.remove(x);
        }
    }

    while !uncovered.is_empty() {
        let best = one_hop
            .iter()
            .filter(|n| !mprs.contains(*n))
            .map(|n| (reach(n).intersection(&uncovered).count(), *n))
            .filter(|(count, _)| *count > 0)
            // max count, then lowest id
            .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.cmp(&a.1)));
        let Some((_, pick)) = best else {
            // Some two-hop node is unreachable through one_hop; nothing more can be covered.
            break;
        };
        mprs.insert(pick);
        for x in reach(&pick) {
            uncovered.remove(x);
        }
    }
    mprs
}

/// Breadth-first shortest paths. `one_hop` are the symmetric neighbours of `me`,
/// `edges[u]` are nodes known to be adjacent to `u` (two-hop and topology links).
/// Returns `dest → (next_hop, hops)`.
pub fn compute_routes(
    me: NodeId,
    one_hop: &BTreeSet<NodeId>,
    edges: &BTreeMap<NodeId, BTreeSet<NodeId>>,
) -> BTreeMap<NodeId, (NodeId, u32)> {
    let mut routes: BTreeMap<NodeId, (NodeId, u32)> = BTreeMap::new();
    let mut frontier = VecDeque::new();
    for &n in one_hop {
        if n != me {
            routes.insert(n, (n, 1));
            frontier.push_back(n);
        }
    }
    while let Some(u) = frontier.pop_front() {
        let (next, hops) = routes[&u];
        if let Some(adj) = edges.get(&u) {
            for &v in adj {
                if v == me || routes.contains_key(&v) {
                    continue;
                }
                routes.insert(v, (next, hops + 1));
                frontier.push_back(v);
            }
        }
    }
    routes
}

#[derive(Debug, Clone, Copy)]
struct Link {
    asym_until: SimTime,
    sym_until: Option<SimTime>,
}

impl Link {
    fn sym(&self, now: SimTime) -> bool {
        self.sym_until.is_some_and(|t| t >= now)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OlsrStats {
    pub hellos_sent: u64,
    pub tc_originated: u64,
    pub tc_forwarded: u64,
    pub mpr_recomputations: u64,
    /// Recomputations after which some two-hop node was left uncovered although reachable.
    pub coverage_violations: u64,
}

pub struct Olsr {
    me: NodeId,
    cfg: OlsrConfig,
    jitter: Jitter,
    links: BTreeMap<NodeId, Link>,
    two_hop: BTreeMap<NodeId, (BTreeSet<NodeId>, SimTime)>,
    mprs: BTreeSet<NodeId>,
    selectors: BTreeMap<NodeId, SimTime>,
    topology: BTreeMap<NodeId, (u16, BTreeSet<NodeId>, SimTime)>,
    duplicates: BTreeMap<(NodeId, u32), SimTime>,
    ansn: u16,
    advertised: BTreeSet<NodeId>,
    msg_seq: u32,
    routes: BTreeMap<NodeId, (NodeId, u32)>,
    routes_expire: SimTime,
    stats: OlsrStats,
}

fn ansn_newer(a: u16, b: u16) -> bool {
    (a.wrapping_sub(b) as i16) > 0
}

impl Olsr {
    pub(crate) fn new(me: NodeId, cfg: OlsrConfig, jitter: Jitter) -> Self {
        Olsr {
            me,
            cfg,
            jitter,
            links: BTreeMap::new(),
            two_hop: BTreeMap::new(),
            mprs: BTreeSet::new(),
            selectors: BTreeMap::new(),
            topology: BTreeMap::new(),
            duplicates: BTreeMap::new(),
            ansn: 0,
            advertised: BTreeSet::new(),
            msg_seq: 0,
            routes: BTreeMap::new(),
            routes_expire: SimTime::ZERO,
            stats: OlsrStats::default(),
        }
    }

    pub fn stats(&self) -> &OlsrStats {
        &self.stats
    }

    pub fn mpr_set(&self) -> &BTreeSet<NodeId> {
        &self.mprs
    }

    pub fn selectors(&self, now: SimTime) -> BTreeSet<NodeId> {
        self.selectors
            .iter()
            .filter(|(_, until)| **until >= now)
            .map(|(n, _)| *n)
            .collect()
    }

    pub fn symmetric_neighbors(&self, now: SimTime) -> BTreeSet<NodeId> {
        self.links.iter().filter(|(_, l)| l.sym(now)).map(|(n, _)| *n).collect()
    }

    pub fn is_symmetric(&self, n: NodeId, now: SimTime) -> bool {
        self.links.get(&n).is_some_and(|l| l.sym(now))
    }

    fn neighbor_hold(&self) -> f64 {
        self.cfg.neighbor_hold_factor * self.cfg.hello_interval_s
    }

    fn purge(&mut self, now: SimTime) {
        self.links.retain(|_, l| l.asym_until >= now || l.sym(now));
        self.two_hop.retain(|_, (_, until)| *until >= now);
        self.selectors.retain(|_, until| *until >= now);
        self.topology.retain(|_, (_, _, until)| *until >= now);
        self.duplicates.retain(|_, until| *until >= now);
    }

    /// Two-hop coverage restricted to currently symmetric neighbours.
    fn coverage(&self, now: SimTime) -> (BTreeSet<NodeId>, BTreeSet<NodeId>, BTreeMap<NodeId, BTreeSet<NodeId>>) {
        let one_hop = self.symmetric_neighbors(now);
        let mut coverage = BTreeMap::new();
        let mut two_hop = BTreeSet::new();
        for n in &one_hop {
            if let Some((reach, until)) = self.two_hop.get(n) {
                if *until < now {
                    continue;
                }
                let strict: BTreeSet<NodeId> = reach
                    .iter()
                    .copied()
                    .filter(|x| *x != self.me && !one_hop.contains(x))
                    .collect();
                two_hop.extend(strict.iter().copied());
                coverage.insert(*n, strict);
            }
        }
        (one_hop, two_hop, coverage)
    }

    fn recompute(&mut self, now: SimTime) {
        self.purge(now);
        let (one_hop, two_hop, coverage) = self.coverage(now);
        self.mprs = select_mprs(&one_hop, &two_hop, &coverage);
        self.stats.mpr_recomputations += 1;
        let covered: BTreeSet<NodeId> = self
            .mprs
            .iter()
            .filter_map(|m| coverage.get(m))
            .flatten()
            .copied()
            .collect();
        if !two_hop.is_subset(&covered) {
            self.stats.coverage_violations += 1;
        }

        let mut edges: BTreeMap<NodeId, BTreeSet<NodeId>> = coverage;
        for (origin, (_, advertised, _)) in &self.topology {
            edges.entry(*origin).or_default().extend(advertised.iter().copied());
        }
        self.routes = compute_routes(self.me, &one_hop, &edges);
        // Routes are valid until the earliest piece of state they were built from expires.
        let mut horizon = SimTime::secs(f64::MAX);
        for until in self.links.values().filter_map(|l| l.sym_until).filter(|t| *t >= now) {
            horizon = horizon.min(until);
        }
        for (_, until) in self.two_hop.values() {
            horizon = horizon.min(*until);
        }
        for (_, _, until) in self.topology.values() {
            horizon = horizon.min(*until);
        }
        self.routes_expire = horizon;
    }

    fn make_hello(&mut self, now: SimTime) -> ControlMsg {
        let neighbors = self
            .links
            .iter()
            .filter(|(_, l)| l.asym_until >= now || l.sym(now))
            .map(|(n, l)| {
                let status = if l.sym(now) {
                    if self.mprs.contains(n) {
                        LinkStatus::Mpr
                    } else {
                        LinkStatus::Sym
                    }
                } else {
                    LinkStatus::Asym
                };
                (*n, status)
            })
            .collect();
        self.stats.hellos_sent += 1;
        ControlMsg::Hello(Hello {
            sender: self.me,
            neighbors,
        })
    }

    fn make_tc(&mut self, now: SimTime) -> Option<ControlMsg> {
        let selectors = self.selectors(now);
        if selectors.is_empty() {
            return None;
        }
        if selectors != self.advertised {
            self.ansn = self.ansn.wrapping_add(1);
            self.advertised = selectors.clone();
        }
        self.msg_seq = self.msg_seq.wrapping_add(1);
        let hold = self.cfg.duplicate_hold_s;
        self.duplicates.insert((self.me, self.msg_seq), now.after(hold));
        self.stats.tc_originated += 1;
        Some(ControlMsg::Tc(Tc {
            originator: self.me,
            advertised: selectors.into_iter().collect(),
            ansn: self.ansn,
            msg_seq: self.msg_seq,
            hop_count: 0,
            ttl: self.cfg.tc_ttl,
        }))
    }

    fn on_hello(&mut self, from: NodeId, hello: &Hello, now: SimTime) {
        let hold = now.after(self.neighbor_hold());
        let listed_me = hello.neighbors.iter().find(|(n, _)| *n == self.me).map(|(_, s)| *s);
        let link = self.links.entry(from).or_insert(Link {
            asym_until: hold,
            sym_until: None,
        });
        link.asym_until = hold;
        if listed_me.is_some() {
            link.sym_until = Some(hold);
        }
        if self.is_symmetric(from, now) {
            let reach: BTreeSet<NodeId> = hello
                .neighbors
                .iter()
                .filter(|(n, s)| *n != self.me && matches!(s, LinkStatus::Sym | LinkStatus::Mpr))
                .map(|(n, _)| *n)
                .collect();
            self.two_hop.insert(from, (reach, hold));
        } else {
            self.two_hop.remove(&from);
        }
        if listed_me == Some(LinkStatus::Mpr) {
            self.selectors.insert(from, hold);
        } else {
            self.selectors.remove(&from);
        }
        self.recompute(now);
    }

    fn on_tc(&mut self, from: NodeId, tc: &Tc, now: SimTime) -> Vec<Action> {
        if tc.originator == self.me || !self.is_symmetric(from, now) {
            return Vec::new();
        }
        let key = (tc.originator, tc.msg_seq);
        if self.duplicates.contains_key(&key) {
            return Vec::new();
        }
        let dup_hold = self.cfg.duplicate_hold_s;
        self.duplicates.insert(key, now.after(dup_hold));

        let stale = self
            .topology
            .get(&tc.originator)
            .is_some_and(|(ansn, _, _)| ansn_newer(*ansn, tc.ansn));
        if !stale {
            let hold = now.after(self.cfg.topology_hold_factor * self.cfg.tc_interval_s);
            self.topology
                .insert(tc.originator, (tc.ansn, tc.advertised.iter().copied().collect(), hold));
            self.recompute(now);
        }

        let from_selector = self.selectors.get(&from).is_some_and(|until| *until >= now);
        if from_selector && tc.ttl > 1 {
            self.stats.tc_forwarded += 1;
            vec![Action::Broadcast(ControlMsg::Tc(Tc {
                hop_count: tc.hop_count + 1,
                ttl: tc.ttl - 1,
                ..tc.clone()
            }))]
        } else {
            Vec::new()
        }
    }
}

impl RoutingProtocol for Olsr {
    fn node(&self) -> NodeId {
        self.me
    }

    fn kind(&self) -> ProtocolKind {
        ProtocolKind::Olsr
    }

    fn start(&mut self, _now: SimTime) -> Vec<Action> {
        vec![
            Action::SetTimer {
                after: self.jitter.first(self.cfg.hello_interval_s),
                timer: Timer::OlsrHello,
            },
            Action::SetTimer {
                after: self.jitter.first(self.cfg.tc_interval_s),
                timer: Timer::OlsrTc,
            },
        ]
    }

    fn on_timer(&mut self, timer: Timer, now: SimTime) -> Vec<Action> {
        self.recompute(now);
        match timer {
            Timer::OlsrHello => vec![
                Action::Broadcast(self.make_hello(now)),
                Action::SetTimer {
                    after: self.jitter.next(self.cfg.hello_interval_s),
                    timer: Timer::OlsrHello,
                },
            ],
            Timer::OlsrTc => {
                let mut actions: Vec<Action> = self.make_tc(now).map(Action::Broadcast).into_iter().collect();
                actions.push(Action::SetTimer {
                    after: self.jitter.next(self.cfg.tc_interval_s),
                    timer: Timer::OlsrTc,
                });
                actions
            }
            _ => Vec::new(),
        }
    }

    fn on_control(&mut self, from: NodeId, msg: &ControlMsg, now: SimTime) -> Vec<Action> {
        self.purge(now);
        match msg {
            ControlMsg::Hello(h) => {
                self.on_hello(from, h, now);
                Vec::new()
            }
            ControlMsg::Tc(tc) => self.on_tc(from, tc, now),
            _ => Vec::new(),
        }
    }

    fn route_entry(&self, dest: NodeId, now: SimTime) -> Option<RouteEntry> {
        if dest == self.me {
            return Some(RouteEntry {
                dest,
                next_hop: dest,
                metric: 0,
                seq_num: None,
                expires_at: SimTime::secs(f64::MAX),
            });
        }
        let (next_hop, hops) = *self.routes.get(&dest)?;
        if !self.is_symmetric(next_hop, now) || self.routes_expire < now {
            return None;
        }
        Some(RouteEntry {
            dest,
            next_hop,
            metric: hops,
            seq_num: None,
            expires_at: self.routes_expire,
        })
    }

    fn on_no_route(&mut self, pkt: DataPacket, _originated: bool, _now: SimTime) -> Vec<Action> {
        vec![Action::Drop(vec![pkt], DropReason::NoRoute)]
    }

    fn table(&self, now: SimTime) -> Vec<RouteEntry> {
        self.routes.keys().filter_map(|d| self.route_entry(*d, now)).collect()
    }

    fn counters(&self) -> Vec<(&'static str, u64)> {
        let s = &self.stats;
        vec![
            ("hellos_sent", s.hellos_sent),
            ("tc_originated", s.tc_originated),
            ("tc_forwarded", s.tc_forwarded),
            ("mpr_recomputations", s.mpr_recomputations),
            ("coverage_violations", s.coverage_violations),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RngStream;

    fn ids(v: &[u32]) -> BTreeSet<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    fn node(id: u32) -> Olsr {
        Olsr::new(
            NodeId(id),
            OlsrConfig::default(),
            Jitter::new(0.0, RngStream::new(0, "t")),
        )
    }

    fn hello_of(n: &mut Olsr, now: SimTime) -> ControlMsg {
        n.make_hello(now)
    }

    #[test]
    fn star_leaf_picks_center() {
        let one = ids(&[0]);
        let two = ids(&[2, 3, 4]);
        let mut cov = BTreeMap::new();
        cov.insert(NodeId(0), ids(&[2, 3, 4]));
        assert_eq!(select_mprs(&one, &two, &cov), ids(&[0]));
    }

    #[test]
    fn empty_two_hop_gives_no_mprs() {
        assert!(select_mprs(&ids(&[1, 2, 3]), &BTreeSet::new(), &BTreeMap::new()).is_empty());
    }

    #[test]
    fn greedy_tie_prefers_lower_id() {
        let one = ids(&[5, 3]);
        let two = ids(&[9]);
        let mut cov = BTreeMap::new();
        cov.insert(NodeId(5), ids(&[9]));
        cov.insert(NodeId(3), ids(&[9]));
        assert_eq!(select_mprs(&one, &two, &cov), ids(&[3]));
    }

    #[test]
    fn routes_on_triangle_and_line() {
        let mut edges = BTreeMap::new();
        edges.insert(NodeId(1), ids(&[2]));
        edges.insert(NodeId(2), ids(&[1]));
        let tri = compute_routes(NodeId(0), &ids(&[1, 2]), &edges);
        assert!(tri.values().all(|(_, h)| *h == 1));

        let mut line = BTreeMap::new();
        line.insert(NodeId(1), ids(&[2]));
        line.insert(NodeId(2), ids(&[3]));
        let r = compute_routes(NodeId(0), &ids(&[1]), &line);
        assert_eq!(r[&NodeId(3)], (NodeId(1), 3));
        assert!(!r.contains_key(&NodeId(7)));
    }

    #[test]
    fn two_hello_exchanges_make_link_symmetric() {
        let mut a = node(0);
        let mut b = node(1);
        let t0 = SimTime::secs(0.0);
        let ha = hello_of(&mut a, t0);
        b.on_control(NodeId(0), &ha, t0);
        assert!(!b.is_symmetric(NodeId(0), t0));
        let hb = hello_of(&mut b, t0);
        a.on_control(NodeId(1), &hb, t0);
        assert!(a.is_symmetric(NodeId(1), t0));
        let t1 = SimTime::secs(2.0);
        let ha = hello_of(&mut a, t1);
        b.on_control(NodeId(0), &ha, t1);
        assert!(b.is_symmetric(NodeId(0), t1));
        assert_eq!(a.route_lookup(NodeId(1), t1), Some(NodeId(1)));
    }

    #[test]
    fn no_selectors_no_tc() {
        let mut a = node(0);
        let acts = a.on_timer(Timer::OlsrTc, SimTime::secs(5.0));
        assert!(!acts.iter().any(|x| matches!(x, Action::Broadcast(_))));
    }

    #[test]
    fn links_expire_without_hellos() {
        let mut a = node(0);
        let mut b = node(1);
        let t0 = SimTime::secs(0.0);
        let hb = hello_of(&mut b, t0);
        a.on_control(NodeId(1), &hb, t0);
        let ha = hello_of(&mut a, t0);
        b.on_control(NodeId(0), &ha, t0);
        let hb = hello_of(&mut b, t0);
        a.on_control(NodeId(1), &hb, t0);
        assert!(a.route_lookup(NodeId(1), SimTime::secs(5.0)).is_some());
        assert!(a.route_lookup(NodeId(1), SimTime::secs(6.5)).is_none());
    }
}
