//! Destination-Sequenced Distance-Vector routing.
//!
//! Periodic full dumps carry a freshly incremented even sequence number for the
//! advertising node. Broken routes get an odd sequence number and an infinite metric.
//! Metric changes trigger a short-delay incremental update.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    Action, ControlMsg, DropReason, DsdvAdvert, DsdvUpdate, Jitter, NodeId, ProtocolKind, RouteEntry, RoutingProtocol,
    Timer,
};
use crate::engine::SimTime;
use crate::traffic::DataPacket;

pub const INFINITE_METRIC: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DsdvConfig {
    pub periodic_update_s: f64,
    /// A neighbour is considered gone after this many update intervals of silence.
    pub allowed_update_loss: u32,
    pub triggered_delay_s: f64,
}

impl Default for DsdvConfig {
    fn default() -> Self {
        DsdvConfig {
            periodic_update_s: 15.0,
            allowed_update_loss: 2,
            triggered_delay_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DsdvRoute {
    next_hop: NodeId,
    metric: u32,
    seq: u32,
    changed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DsdvStats {
    pub full_dumps: u64,
    pub triggered_updates: u64,
}

pub struct Dsdv {
    me: NodeId,
    cfg: DsdvConfig,
    jitter: Jitter,
    own_seq: u32,
    table: BTreeMap<NodeId, DsdvRoute>,
    neighbors: BTreeMap<NodeId, SimTime>,
    triggered_pending: bool,
    stats: DsdvStats,
}

/// Outcome of [`merge_advert`] for a single advertised destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeOutcome {
    Adopted { metric_changed: bool },
    Kept,
}

/// The selection rule: adopt `advert` heard from `from` if it carries a newer sequence
/// number, or the same sequence number and a strictly better metric.
pub fn merge_advert(current: Option<(u32, u32)>, advert: &DsdvAdvert) -> MergeOutcome {
    let offered = advert.metric.saturating_add(1);
    match current {
        None if offered == INFINITE_METRIC => MergeOutcome::Kept,
        None => MergeOutcome::Adopted { metric_changed: true },
        Some((seq, metric)) => {
            if super::aodv::seq_newer(advert.seq, seq) || (advert.seq == seq && offered < metric) {
                MergeOutcome::Adopted {
                    metric_changed: offered != metric,
                }
            } else {
                MergeOutcome::Kept
            }
        }
    }
}

impl Dsdv {
    pub(crate) fn new(me: NodeId, cfg: DsdvConfig, jitter: Jitter) -> Self {
        let mut table = BTreeMap::new();
        table.insert(
            me,
            DsdvRoute {
                next_hop: me,
                metric: 0,
                seq: 0,
                changed: false,
            },
        );
        Dsdv {
            me,
            cfg,
            jitter,
            own_seq: 0,
            table,
            neighbors: BTreeMap::new(),
            triggered_pending: false,
            stats: DsdvStats::default(),
        }
    }

    pub fn own_seq(&self) -> u32 {
        self.own_seq
    }

    pub fn stats(&self) -> &DsdvStats {
        &self.stats
    }

    fn neighbor_timeout(&self) -> f64 {
        self.cfg.allowed_update_loss as f64 * self.cfg.periodic_update_s
    }

    fn neighbor_alive(&self, n: NodeId, now: SimTime) -> bool {
        self.neighbors
            .get(&n)
            .is_some_and(|heard| now.as_secs() - heard.as_secs() <= self.neighbor_timeout())
    }

    fn schedule_trigger(&mut self) -> Vec<Action> {
        if self.triggered_pending {
            return Vec::new();
        }
        self.triggered_pending = true;
        let delay = self.cfg.triggered_delay_s + self.jitter.small(self.cfg.triggered_delay_s);
        vec![Action::SetTimer {
            after: delay,
            timer: Timer::DsdvTriggered,
        }]
    }

    /// Marks every route through a silent neighbour as broken.
    fn purge_neighbors(&mut self, now: SimTime) -> Vec<Action> {
        let timeout = self.neighbor_timeout();
        let lost: Vec<NodeId> = self
            .neighbors
            .iter()
            .filter(|(_, heard)| now.as_secs() - heard.as_secs() > timeout)
            .map(|(n, _)| *n)
            .collect();
        let mut changed = false;
        for n in lost {
            self.neighbors.remove(&n);
            for (dest, route) in self.table.iter_mut() {
                if *dest != self.me && route.next_hop == n && route.metric != INFINITE_METRIC {
                    route.metric = INFINITE_METRIC;
                    // Odd sequence numbers mark broken routes.
                    route.seq = route.seq.wrapping_add(1) | 1;
                    route.changed = true;
                    changed = true;
                }
            }
        }
        if changed {
            self.schedule_trigger()
        } else {
            Vec::new()
        }
    }

    fn adverts(&self, only_changed: bool) -> Vec<DsdvAdvert> {
        self.table
            .iter()
            .filter(|(_, r)| !only_changed || r.changed)
            .map(|(dest, r)| DsdvAdvert {
                dest: *dest,
                seq: r.seq,
                metric: r.metric,
            })
            .collect()
    }

    fn full_dump(&mut self) -> ControlMsg {
        self.own_seq = self.own_seq.wrapping_add(2);
        if let Some(me) = self.table.get_mut(&self.me) {
            me.seq = self.own_seq;
        }
        let entries = self.adverts(false);
        for r in self.table.values_mut() {
            r.changed = false;
        }
        self.stats.full_dumps += 1;
        ControlMsg::DsdvUpdate(DsdvUpdate {
            full_dump: true,
            entries,
        })
    }

    /// Applies one received update. Returns the triggered-update timer if any metric changed.
    pub fn merge(&mut self, from: NodeId, update: &DsdvUpdate, now: SimTime) -> Vec<Action> {
        self.neighbors.insert(from, now);
        let mut trigger = false;
        for advert in &update.entries {
            if advert.dest == self.me {
                // Someone saw us as broken with a newer number: outbid it.
                if advert.seq % 2 == 1 && super::aodv::seq_newer(advert.seq, self.own_seq) {
                    self.own_seq = advert.seq.wrapping_add(1);
                    if let Some(me) = self.table.get_mut(&self.me) {
                        me.seq = self.own_seq;
                        me.changed = true;
                    }
                    trigger = true;
                }
                continue;
            }
            let current = self.table.get(&advert.dest).map(|r| (r.seq, r.metric));
            if let MergeOutcome::Adopted { metric_changed } = merge_advert(current, advert) {
                let metric = if advert.metric == INFINITE_METRIC {
                    INFINITE_METRIC
                } else {
                    advert.metric + 1
                };
                let entry = self.table.entry(advert.dest).or_insert(DsdvRoute {
                    next_hop: from,
                    metric,
                    seq: advert.seq,
                    changed: false,
                });
                entry.next_hop = from;
                entry.metric = metric;
                entry.seq = advert.seq;
                if metric_changed {
                    entry.changed = true;
                    trigger = true;
                }
            }
        }
        if trigger {
            self.schedule_trigger()
        } else {
            Vec::new()
        }
    }
}

impl RoutingProtocol for Dsdv {
    fn node(&self) -> NodeId {
        self.me
    }

    fn kind(&self) -> ProtocolKind {
        ProtocolKind::Dsdv
    }

    fn start(&mut self, _now: SimTime) -> Vec<Action> {
        vec![Action::SetTimer {
            after: self.jitter.first(self.cfg.periodic_update_s),
            timer: Timer::DsdvPeriodic,
        }]
    }

    fn on_timer(&mut self, timer: Timer, now: SimTime) -> Vec<Action> {
        let mut actions = self.purge_neighbors(now);
        match timer {
            Timer::DsdvPeriodic => {
                actions.push(Action::Broadcast(self.full_dump()));
                actions.push(Action::SetTimer {
                    after: self.jitter.next(self.cfg.periodic_update_s),
                    timer: Timer::DsdvPeriodic,
                });
            }
            Timer::DsdvTriggered => {
                self.triggered_pending = false;
                let entries = self.adverts(true);
                if !entries.is_empty() {
                    for r in self.table.values_mut() {
                        r.changed = false;
                    }
                    self.stats.triggered_updates += 1;
                    actions.push(Action::Broadcast(ControlMsg::DsdvUpdate(DsdvUpdate {
                        full_dump: false,
                        entries,
                    })));
                }
            }
            _ => {}
        }
        actions
    }

    fn on_control(&mut self, from: NodeId, msg: &ControlMsg, now: SimTime) -> Vec<Action> {
        let mut actions = self.purge_neighbors(now);
        if let ControlMsg::DsdvUpdate(update) = msg {
            actions.extend(self.merge(from, update, now));
        } else {
            self.neighbors.insert(from, now);
        }
        actions
    }

    fn on_frame_heard(&mut self, from: NodeId, now: SimTime) {
        // Only refresh neighbours we already route through; new ones are learned from updates.
        if let Some(heard) = self.neighbors.get_mut(&from) {
            *heard = now;
        }
    }

    fn route_entry(&self, dest: NodeId, now: SimTime) -> Option<RouteEntry> {
        let r = self.table.get(&dest)?;
        if dest == self.me {
            return Some(RouteEntry {
                dest,
                next_hop: dest,
                metric: 0,
                seq_num: Some(self.own_seq),
                expires_at: SimTime::secs(f64::MAX),
            });
        }
        if r.metric == INFINITE_METRIC || !self.neighbor_alive(r.next_hop, now) {
            return None;
        }
        let heard = self.neighbors[&r.next_hop];
        Some(RouteEntry {
            dest,
            next_hop: r.next_hop,
            metric: r.metric,
            seq_num: Some(r.seq),
            expires_at: heard.after(self.neighbor_timeout()),
        })
    }

    fn on_no_route(&mut self, pkt: DataPacket, _originated: bool, _now: SimTime) -> Vec<Action> {
        vec![Action::Drop(vec![pkt], DropReason::NoRoute)]
    }

    fn table(&self, now: SimTime) -> Vec<RouteEntry> {
        self.table.keys().filter_map(|d| self.route_entry(*d, now)).collect()
    }

    fn counters(&self) -> Vec<(&'static str, u64)> {
        vec![
            ("full_dumps", self.stats.full_dumps),
            ("triggered_updates", self.stats.triggered_updates),
        ]
    }
}
