//! AODV, DSDV and OLSR behind one interface.
//!
//! Protocols are event-driven state machines: every entry point returns a list of
//! [`Action`]s that the caller (the radio simulation or the ideal test network) carries out.

pub mod aodv;
pub mod dsdv;
pub mod olsr;
pub mod testnet;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{RngStream, SimTime};
use crate::traffic::DataPacket;

pub use aodv::{Aodv, AodvConfig};
pub use dsdv::{Dsdv, DsdvConfig};
pub use olsr::{Olsr, OlsrConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Aodv,
    Dsdv,
    Olsr,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 3] = [ProtocolKind::Aodv, ProtocolKind::Dsdv, ProtocolKind::Olsr];

    pub fn name(&self) -> &'static str {
        match self {
            ProtocolKind::Aodv => "aodv",
            ProtocolKind::Dsdv => "dsdv",
            ProtocolKind::Olsr => "olsr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A resolved route as exposed through the uniform interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouteEntry {
    pub dest: NodeId,
    pub next_hop: NodeId,
    pub metric: u32,
    pub seq_num: Option<u32>,
    pub expires_at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rreq {
    pub origin: NodeId,
    pub origin_seq: u32,
    pub rreq_id: u32,
    pub dest: NodeId,
    /// Last destination sequence number known to the originator, if any.
    pub dest_seq: Option<u32>,
    pub hop_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rrep {
    pub dest: NodeId,
    pub dest_seq: u32,
    pub hop_count: u32,
    pub origin: NodeId,
}

impl Rrep {
    /// AODV HELLO: a one-hop broadcast RREP advertising the sender itself.
    pub fn is_hello(&self) -> bool {
        self.dest == self.origin && self.hop_count == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rerr {
    pub unreachable: Vec<(NodeId, u32)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DsdvAdvert {
    pub dest: NodeId,
    pub seq: u32,
    /// `dsdv::INFINITE_METRIC` marks a broken route.
    pub metric: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DsdvUpdate {
    pub full_dump: bool,
    pub entries: Vec<DsdvAdvert>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinkStatus {
    Asym,
    Sym,
    /// Symmetric, and the sender picked this neighbor as one of its MPRs.
    Mpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hello {
    pub sender: NodeId,
    pub neighbors: Vec<(NodeId, LinkStatus)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tc {
    pub originator: NodeId,
    pub advertised: Vec<NodeId>,
    pub ansn: u16,
    pub msg_seq: u32,
    pub hop_count: u32,
    pub ttl: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControlMsg {
    Rreq(Rreq),
    Rrep(Rrep),
    Rerr(Rerr),
    DsdvUpdate(DsdvUpdate),
    Hello(Hello),
    Tc(Tc),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MsgKind {
    Rreq,
    Rrep,
    AodvHello,
    Rerr,
    DsdvUpdate,
    Hello,
    Tc,
}

impl ControlMsg {
    pub fn kind(&self) -> MsgKind {
        match self {
            ControlMsg::Rreq(_) => MsgKind::Rreq,
            ControlMsg::Rrep(r) if r.is_hello() => MsgKind::AodvHello,
            ControlMsg::Rrep(_) => MsgKind::Rrep,
            ControlMsg::Rerr(_) => MsgKind::Rerr,
            ControlMsg::DsdvUpdate(_) => MsgKind::DsdvUpdate,
            ControlMsg::Hello(_) => MsgKind::Hello,
            ControlMsg::Tc(_) => MsgKind::Tc,
        }
    }

    /// On-air size in bytes according to `sizes`.
    pub fn size_bytes(&self, sizes: &MsgSizes) -> u32 {
        match self {
            ControlMsg::Rreq(_) => sizes.rreq,
            ControlMsg::Rrep(_) => sizes.rrep,
            ControlMsg::Rerr(r) => sizes.rerr_base + sizes.rerr_per_dest * r.unreachable.len() as u32,
            ControlMsg::DsdvUpdate(u) => sizes.dsdv_base + sizes.dsdv_per_entry * u.entries.len() as u32,
            ControlMsg::Hello(h) => sizes.olsr_hello_base + sizes.olsr_per_address * h.neighbors.len() as u32,
            ControlMsg::Tc(t) => sizes.olsr_tc_base + sizes.olsr_per_address * t.advertised.len() as u32,
        }
    }
}

/// Control-message sizes in bytes, including IP/UDP headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MsgSizes {
    pub rreq: u32,
    pub rrep: u32,
    pub rerr_base: u32,
    pub rerr_per_dest: u32,
    pub dsdv_base: u32,
    pub dsdv_per_entry: u32,
    pub olsr_hello_base: u32,
    pub olsr_tc_base: u32,
    pub olsr_per_address: u32,
}

impl Default for MsgSizes {
    fn default() -> Self {
        MsgSizes {
            rreq: 52,
            rrep: 48,
            rerr_base: 32,
            rerr_per_dest: 8,
            dsdv_base: 28,
            dsdv_per_entry: 12,
            olsr_hello_base: 48,
            olsr_tc_base: 48,
            olsr_per_address: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Timer {
    AodvHello,
    AodvDiscovery { dest: NodeId, attempt: u32 },
    DsdvPeriodic,
    DsdvTriggered,
    OlsrHello,
    OlsrTc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum DropReason {
    NoRoute,
    DiscoveryFailed,
    BufferOverflow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Broadcast(ControlMsg),
    Unicast {
        to: NodeId,
        msg: ControlMsg,
    },
    SetTimer {
        after: f64,
        timer: Timer,
    },
    /// Buffered packets whose route is now available; the caller re-forwards them.
    Release(Vec<DataPacket>),
    Drop(Vec<DataPacket>, DropReason),
}

/// Common surface of all three protocols.
pub trait RoutingProtocol {
    fn node(&self) -> NodeId;

    fn kind(&self) -> ProtocolKind;

    /// Arms initial timers.
    fn start(&mut self, now: SimTime) -> Vec<Action>;

    fn on_timer(&mut self, timer: Timer, now: SimTime) -> Vec<Action>;

    fn on_control(&mut self, from: NodeId, msg: &ControlMsg, now: SimTime) -> Vec<Action>;

    /// Any frame (control or data) was received from `from`.
    fn on_frame_heard(&mut self, _from: NodeId, _now: SimTime) {}

    /// Next hop towards `dest`, or `None` if there is no live route.
    fn route_lookup(&self, dest: NodeId, now: SimTime) -> Option<NodeId> {
        if dest == self.node() {
            return Some(dest);
        }
        self.route_entry(dest, now).map(|e| e.next_hop)
    }

    /// The live entry for `dest`. The entry for self has metric 0 and next hop self.
    fn route_entry(&self, dest: NodeId, now: SimTime) -> Option<RouteEntry>;

    /// A data packet needs forwarding but there is no route. `originated` is true
    /// when this node is the packet's source.
    fn on_no_route(&mut self, pkt: DataPacket, originated: bool, now: SimTime) -> Vec<Action>;

    /// A data packet is being forwarded to `next_hop` (having arrived from `prev_hop`).
    fn on_forward(&mut self, _pkt: &DataPacket, _prev_hop: Option<NodeId>, _next_hop: NodeId, _now: SimTime) {}

    /// Every live entry, sorted by destination.
    fn table(&self, now: SimTime) -> Vec<RouteEntry>;

    /// Named protocol counters for diagnostics.
    fn counters(&self) -> Vec<(&'static str, u64)> {
        Vec::new()
    }
}

/// Loop-freedom check for one forwarding step from `upstream` to `downstream`, both
/// entries for the same destination: `(dest_seq, −hops)` must not decrease toward the
/// destination. Entries without a known sequence number are not comparable and pass.
pub fn forwarding_step_ok(upstream: &RouteEntry, downstream: &RouteEntry) -> bool {
    match (upstream.seq_num, downstream.seq_num) {
        (Some(up), Some(down)) => {
            if up == down {
                downstream.metric <= upstream.metric
            } else {
                aodv::seq_newer(down, up)
            }
        }
        _ => true,
    }
}

/// Protocol timers and message sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoutingConfig {
    /// Single protocol to run when the scenario does not list several.
    pub protocol: Option<ProtocolKind>,
    /// Periodic timers fire after `interval − U[0, jitter·interval)`; the first one at `U[0, jitter·interval)`.
    pub jitter_fraction: f64,
    pub aodv: AodvConfig,
    pub dsdv: DsdvConfig,
    pub olsr: OlsrConfig,
    pub msg_bytes: MsgSizes,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        RoutingConfig {
            protocol: None,
            jitter_fraction: 0.25,
            aodv: AodvConfig::default(),
            dsdv: DsdvConfig::default(),
            olsr: OlsrConfig::default(),
            msg_bytes: MsgSizes::default(),
        }
    }
}

/// Periodic-timer jitter shared by the protocols.
#[derive(Debug, Clone)]
pub(crate) struct Jitter {
    fraction: f64,
    rng: RngStream,
}

impl Jitter {
    pub(crate) fn new(fraction: f64, rng: RngStream) -> Self {
        Jitter {
            fraction: fraction.clamp(0.0, 1.0),
            rng,
        }
    }

    pub(crate) fn first(&mut self, interval: f64) -> f64 {
        self.rng.uniform(0.0, self.fraction * interval).unwrap_or(0.0)
    }

    pub(crate) fn next(&mut self, interval: f64) -> f64 {
        interval - self.rng.uniform(0.0, self.fraction * interval).unwrap_or(0.0)
    }

    pub(crate) fn small(&mut self, max: f64) -> f64 {
        self.rng.uniform(0.0, max * self.fraction.max(0.0)).unwrap_or(0.0)
    }
}

/// Instantiates the protocol for node `me`. `seed` feeds the per-node jitter stream.
pub fn build(cfg: &RoutingConfig, kind: ProtocolKind, me: NodeId, seed: u64) -> Box<dyn RoutingProtocol + Send> {
    let jitter = Jitter::new(cfg.jitter_fraction, RngStream::new(seed, format!("protocol/{}", me.0)));
    match kind {
        ProtocolKind::Aodv => Box::new(Aodv::new(me, cfg.aodv.clone(), jitter)),
        ProtocolKind::Dsdv => Box::new(Dsdv::new(me, cfg.dsdv.clone(), jitter)),
        ProtocolKind::Olsr => Box::new(Olsr::new(me, cfg.olsr.clone(), jitter)),
    }
}
