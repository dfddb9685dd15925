//! One complete network run: mobile nodes, the shared radio medium, a routing protocol
//! instance per node and CBR traffic, driven by the event engine.
//!
//! The medium is slotless and half-duplex with no carrier sense. Each node sends the
//! frames in its FIFO queue one at a time, each after a small random access delay. Reception is decided when a frame ends, from the geometry at the time it
//! started and every other frame overlapping it in time.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{Engine, EngineError, RngStream, SimTime};
use crate::metrics::{MetricsCollector, PerSecondRecord, RunLabels, RunSummary};
use crate::mobility::{distance, MobilityError, Point, Region, Trajectory};
use crate::propagation::{ChannelModelSpec, PropagationError, MIN_DISTANCE_M};
use crate::radio::{
    airtime_s, antenna_gain_dbi, try_receive, tx_energy_mj, wrap_angle_deg, AntennaPattern, BroadcastMode,
    EnergyLedger, LossReason, RadioConfig, RadioError, Reception, TransmissionAttempt,
};
use crate::routing::{
    build, forwarding_step_ok, Action, ControlMsg, DropReason, MsgKind, NodeId, ProtocolKind, RoutingConfig,
    RoutingProtocol, Timer,
};
use crate::traffic::{build_flows, DataPacket, FlowSpec, TrafficConfig, TrafficError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
}

/// When the shadow-fading term of a link is redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ShadowingMode {
    /// Once per (transmitter, receiver, waypoint leg of each) and then held.
    #[default]
    PerLink,
    /// Independently for every frame.
    PerPacket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacConfig {
    /// Unicast retransmissions after a failed reception (ideal feedback).
    pub retries: u32,
    /// Every frame waits `U[0, access_jitter_s)` before going on air, standing in for
    /// random backoff.
    pub access_jitter_s: f64,
    pub queue_limit: usize,
}

impl Default for MacConfig {
    fn default() -> Self {
        MacConfig {
            retries: 0,
            access_jitter_s: 0.01,
            queue_limit: 256,
        }
    }
}

/// Fully resolved parameters of a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_nodes: usize,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub seed: u64,
    pub region: Region,
    pub speed_mps: f64,
    pub pause_s: f64,
    pub channel_name: String,
    pub channel: ChannelModelSpec,
    pub shadowing: ShadowingMode,
    pub radio: RadioConfig,
    pub mac: MacConfig,
    pub protocol: ProtocolKind,
    pub routing: RoutingConfig,
    pub traffic: TrafficConfig,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_nodes < 2 {
            return Err(SimError::Invalid(format!(
                "n_nodes must be at least 2, got {}",
                self.n_nodes
            )));
        }
        if !(self.duration_s > self.warmup_s && self.warmup_s >= 0.0) {
            return Err(SimError::Invalid(format!(
                "duration_s ({}) must exceed warmup_s ({})",
                self.duration_s, self.warmup_s
            )));
        }
        if !(self.speed_mps > 0.0) {
            return Err(MobilityError::BadSpeed(self.speed_mps).into());
        }
        self.channel.validate()?;
        self.radio.validate()?;
        if 2 * self.traffic.n_pairs > self.n_nodes {
            return Err(TrafficError::TooFewNodes {
                pairs: self.traffic.n_pairs,
                needed: 2 * self.traffic.n_pairs,
                nodes: self.n_nodes,
            }
            .into());
        }
        Ok(())
    }

    pub fn labels(&self) -> RunLabels {
        RunLabels {
            protocol: self.protocol.name().to_string(),
            channel: self.channel_name.clone(),
            tx_power_dbm: self.radio.tx_power_dbm,
            pkt_bytes: self.traffic.pkt_bytes,
            seed: self.seed,
        }
    }
}

/// Diagnostics gathered during a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SimStats {
    pub frames_sent: BTreeMap<String, u64>,
    pub receptions: u64,
    pub losses: BTreeMap<String, u64>,
    pub data_drops: BTreeMap<String, u64>,
    pub loop_violations: u64,
    pub delivered_below_threshold: u64,
    pub duplicate_deliveries: u64,
    pub position_violations: u64,
    pub events: u64,
    pub protocol_counters: BTreeMap<String, u64>,
}

fn bump(map: &mut BTreeMap<String, u64>, key: &str, by: u64) {
    *map.entry(key.to_string()).or_default() += by;
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<PerSecondRecord>,
    pub summary: RunSummary,
    pub stats: SimStats,
    /// Radio-side energy total and the independent per-frame sum.
    pub ledger_total_mj: f64,
    pub frame_energy_sum_mj: f64,
    /// SHA-256 over every executed event `(time, seq, kind)`.
    pub event_digest: String,
    /// SHA-256 over node positions sampled once per second.
    pub mobility_digest: String,
}

#[derive(Debug, Clone)]
enum Payload {
    Control(ControlMsg),
    Data(DataPacket),
}

#[derive(Debug, Clone)]
struct Frame {
    payload: Payload,
    dest: Option<NodeId>,
    bytes: u32,
    retries_left: u32,
}

#[derive(Debug, Clone)]
struct OnAir {
    id: u64,
    node: NodeId,
    start: SimTime,
    end: SimTime,
    frame: Frame,
    /// Positions and waypoint-leg indices of all nodes when the frame started.
    positions: Vec<Point>,
    legs: Vec<u64>,
}

#[derive(Debug, Clone)]
enum SimEvent {
    ProtocolTimer { node: NodeId, timer: Timer },
    TrafficSend { flow: usize, k: u32 },
    MacAccess { node: NodeId },
    TxEnd { id: u64 },
    MobilitySample,
}

impl SimEvent {
    fn code(&self) -> u8 {
        match self {
            SimEvent::ProtocolTimer { .. } => 0,
            SimEvent::TrafficSend { .. } => 1,
            SimEvent::MacAccess { .. } => 2,
            SimEvent::TxEnd { .. } => 3,
            SimEvent::MobilitySample => 4,
        }
    }
}

struct NodeMac {
    queue: VecDeque<Frame>,
    transmitting: bool,
    access_pending: bool,
    rng: RngStream,
}

fn msg_kind_label(kind: MsgKind) -> &'static str {
    match kind {
        MsgKind::Rreq => "rreq",
        MsgKind::Rrep => "rrep",
        MsgKind::AodvHello => "aodv_hello",
        MsgKind::Rerr => "rerr",
        MsgKind::DsdvUpdate => "dsdv_update",
        MsgKind::Hello => "olsr_hello",
        MsgKind::Tc => "olsr_tc",
    }
}

fn drop_label(reason: DropReason) -> &'static str {
    match reason {
        DropReason::NoRoute => "no_route",
        DropReason::DiscoveryFailed => "discovery_failed",
        DropReason::BufferOverflow => "buffer_overflow",
    }
}

pub struct Simulation {
    cfg: SimConfig,
    engine: Engine<SimEvent>,
    trajectories: Vec<Trajectory>,
    protocols: Vec<Box<dyn RoutingProtocol + Send>>,
    macs: Vec<NodeMac>,
    flows: Vec<FlowSpec>,
    on_air: VecDeque<OnAir>,
    next_tx_id: u64,
    max_airtime: f64,
    noise_dbm: f64,
    shadow_cache: HashMap<(u32, u32, u64, u64), f64>,
    channel_rng: RngStream,
    metrics: MetricsCollector,
    energy: EnergyLedger,
    frame_energy_sum: f64,
    stats: SimStats,
    event_hash: Sha256,
    mobility_hash: Sha256,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let n = cfg.n_nodes;
        let seed = cfg.seed;
        let trajectories = (0..n)
            .map(|i| {
                Trajectory::new(
                    cfg.region,
                    cfg.speed_mps,
                    cfg.pause_s,
                    RngStream::new(seed, format!("mobility/{i}")),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let protocols = (0..n)
            .map(|i| build(&cfg.routing, cfg.protocol, NodeId(i as u32), seed))
            .collect();
        let macs = (0..n)
            .map(|i| NodeMac {
                queue: VecDeque::new(),
                transmitting: false,
                access_pending: false,
                rng: RngStream::new(seed, format!("mac/{i}")),
            })
            .collect();
        let mut traffic_rng = RngStream::new(seed, "traffic");
        let flows = build_flows(&cfg.traffic, n, SimTime::secs(cfg.duration_s), &mut traffic_rng)?;
        let noise_dbm = cfg.radio.noise_dbm();
        Ok(Simulation {
            engine: Engine::new(),
            trajectories,
            protocols,
            macs,
            flows,
            on_air: VecDeque::new(),
            next_tx_id: 0,
            max_airtime: 0.0,
            noise_dbm,
            shadow_cache: HashMap::new(),
            channel_rng: RngStream::new(seed, "channel"),
            metrics: MetricsCollector::new(cfg.duration_s),
            energy: EnergyLedger::new(n),
            frame_energy_sum: 0.0,
            stats: SimStats::default(),
            event_hash: Sha256::new(),
            mobility_hash: Sha256::new(),
            cfg,
        })
    }

    pub fn flows(&self) -> &[FlowSpec] {
        &self.flows
    }

    /// Runs to the configured horizon and summarizes.
    pub fn run(mut self) -> Result<RunOutput, SimError> {
        let t_end = SimTime::secs(self.cfg.duration_s);
        for i in 0..self.cfg.n_nodes {
            let actions = self.protocols[i].start(SimTime::ZERO);
            self.apply(NodeId(i as u32), actions)?;
        }
        for (f, flow) in self.flows.iter().enumerate() {
            if let Some(at) = flow.send_time(0) {
                self.engine.schedule(at, SimEvent::TrafficSend { flow: f, k: 0 })?;
            }
        }
        self.engine.schedule(SimTime::ZERO, SimEvent::MobilitySample)?;

        while let Some((now, seq, ev)) = self.engine.next_before(t_end) {
            self.event_hash.update(now.as_secs().to_le_bytes());
            self.event_hash.update(seq.to_le_bytes());
            self.event_hash.update([ev.code()]);
            self.handle(now, ev)?;
        }
        self.engine.run_until(t_end, |_, _| {});
        self.stats.events = self.engine.executed();
        self.stats.duplicate_deliveries = self.metrics.duplicates();
        for p in &self.protocols {
            for (name, v) in p.counters() {
                bump(&mut self.stats.protocol_counters, name, v);
            }
        }

        let ledger_total_mj = self.energy.total_mj();
        let (records, summary) = self
            .metrics
            .finalize(&self.cfg.labels(), self.cfg.warmup_s, ledger_total_mj);
        Ok(RunOutput {
            records,
            summary,
            stats: self.stats,
            ledger_total_mj,
            frame_energy_sum_mj: self.frame_energy_sum,
            event_digest: hex::encode(self.event_hash.finalize()),
            mobility_digest: hex::encode(self.mobility_hash.finalize()),
        })
    }

    fn handle(&mut self, now: SimTime, ev: SimEvent) -> Result<(), SimError> {
        match ev {
            SimEvent::ProtocolTimer { node, timer } => {
                let actions = self.protocols[node.index()].on_timer(timer, now);
                self.apply(node, actions)?;
            }
            SimEvent::TrafficSend { flow, k } => {
                let f = &self.flows[flow];
                let pkt = DataPacket {
                    flow: f.id,
                    seq: k,
                    src: f.src,
                    dst: f.dst,
                    created_at: now,
                    ttl: self.cfg.n_nodes as u32,
                    bytes: f.pkt_bytes,
                };
                let src = f.src;
                if let Some(next) = f.send_time(k + 1) {
                    self.engine.schedule(next, SimEvent::TrafficSend { flow, k: k + 1 })?;
                }
                self.metrics.record_sent(now);
                self.handle_data(src, None, pkt, now)?;
            }
            SimEvent::MacAccess { node } => {
                self.macs[node.index()].access_pending = false;
                self.start_transmission(node, now)?;
            }
            SimEvent::TxEnd { id } => self.finish_transmission(id, now)?,
            SimEvent::MobilitySample => {
                for i in 0..self.cfg.n_nodes {
                    let p = self.trajectories[i].position_at(now)?;
                    if !self.cfg.region.contains(p) {
                        self.stats.position_violations += 1;
                    }
                    self.mobility_hash.update(now.as_secs().to_le_bytes());
                    self.mobility_hash.update((i as u64).to_le_bytes());
                    self.mobility_hash.update(p.x.to_le_bytes());
                    self.mobility_hash.update(p.y.to_le_bytes());
                }
                let next = now.after(1.0);
                if next.as_secs() <= self.cfg.duration_s {
                    self.engine.schedule(next, SimEvent::MobilitySample)?;
                }
            }
        }
        Ok(())
    }

    fn handle_data(
        &mut self,
        at: NodeId,
        prev: Option<NodeId>,
        mut pkt: DataPacket,
        now: SimTime,
    ) -> Result<(), SimError> {
        if pkt.dst == at {
            self.metrics.record_delivered(pkt.flow, pkt.seq, pkt.created_at, now);
            return Ok(());
        }
        if pkt.ttl == 0 {
            bump(&mut self.stats.data_drops, "ttl", 1);
            return Ok(());
        }
        let p = &self.protocols[at.index()];
        let Some(next) = p.route_lookup(pkt.dst, now) else {
            let originated = prev.is_none() && pkt.src == at;
            let actions = self.protocols[at.index()].on_no_route(pkt, originated, now);
            return self.apply(at, actions);
        };
        if p.kind() == ProtocolKind::Aodv {
            let up = p.route_entry(pkt.dst, now);
            let down = self.protocols[next.index()].route_entry(pkt.dst, now);
            if let (Some(up), Some(down)) = (up, down) {
                if !forwarding_step_ok(&up, &down) {
                    self.stats.loop_violations += 1;
                }
            }
        }
        self.protocols[at.index()].on_forward(&pkt, prev, next, now);
        pkt.ttl -= 1;
        let bytes = pkt.bytes;
        self.enqueue(
            at,
            Frame {
                payload: Payload::Data(pkt),
                dest: Some(next),
                bytes,
                retries_left: self.cfg.radio.mac_retries,
            },
            now,
        )
    }

    fn apply(&mut self, node: NodeId, actions: Vec<Action>) -> Result<(), SimError> {
        let now = self.engine.now();
        for action in actions {
            match action {
                Action::Broadcast(msg) => {
                    let bytes = msg.size_bytes(&self.cfg.routing.msg_bytes);
                    self.enqueue(
                        node,
                        Frame {
                            payload: Payload::Control(msg),
                            dest: None,
                            bytes,
                            retries_left: 0,
                        },
                        now,
                    )?;
                }
                Action::Unicast { to, msg } => {
                    let bytes = msg.size_bytes(&self.cfg.routing.msg_bytes);
                    self.enqueue(
                        node,
                        Frame {
                            payload: Payload::Control(msg),
                            dest: Some(to),
                            bytes,
                            retries_left: self.cfg.radio.mac_retries,
                        },
                        now,
                    )?;
                }
                Action::SetTimer { after, timer } => {
                    self.engine
                        .schedule(now.after(after.max(0.0)), SimEvent::ProtocolTimer { node, timer })?;
                }
                Action::Release(pkts) => {
                    for pkt in pkts {
                        self.handle_data(node, None, pkt, now)?;
                    }
                }
                Action::Drop(pkts, reason) => {
                    bump(&mut self.stats.data_drops, drop_label(reason), pkts.len() as u64);
                }
            }
        }
        Ok(())
    }

    fn enqueue(&mut self, node: NodeId, frame: Frame, now: SimTime) -> Result<(), SimError> {
        let limit = self.cfg.mac.queue_limit;
        let mac = &mut self.macs[node.index()];
        if mac.queue.len() >= limit {
            if let Payload::Data(_) = frame.payload {
                bump(&mut self.stats.data_drops, "queue_overflow", 1);
            }
            return Ok(());
        }
        mac.queue.push_back(frame);
        self.schedule_access(node, now)
    }

    fn schedule_access(&mut self, node: NodeId, now: SimTime) -> Result<(), SimError> {
        let jitter = self.cfg.mac.access_jitter_s;
        let mac = &mut self.macs[node.index()];
        if mac.transmitting || mac.access_pending {
            return Ok(());
        }
        if mac.queue.is_empty() {
            return Ok(());
        }
        let delay = if jitter > 0.0 {
            mac.rng.uniform(0.0, jitter)?
        } else {
            0.0
        };
        mac.access_pending = true;
        self.engine.schedule(now.after(delay), SimEvent::MacAccess { node })?;
        Ok(())
    }

    fn is_sweep(&self, frame: &Frame) -> bool {
        frame.dest.is_none()
            && self.cfg.radio.pattern.is_directional()
            && self.cfg.radio.broadcast == BroadcastMode::Sweep
    }

    fn start_transmission(&mut self, node: NodeId, now: SimTime) -> Result<(), SimError> {
        let mac = &mut self.macs[node.index()];
        if mac.transmitting {
            return Ok(());
        }
        let Some(frame) = mac.queue.pop_front() else {
            return Ok(());
        };
        mac.transmitting = true;

        let airtime = airtime_s(frame.bytes, self.cfg.radio.bitrate_bps);
        let sectors = if self.is_sweep(&frame) {
            self.cfg.radio.pattern.sweep_sectors()
        } else {
            1
        };
        let mj = tx_energy_mj(self.cfg.radio.tx_power_dbm, airtime) * sectors as f64;
        self.energy.charge(node.index(), mj);
        self.frame_energy_sum += mj;
        let label = match &frame.payload {
            Payload::Control(msg) => msg_kind_label(msg.kind()),
            Payload::Data(_) => "data",
        };
        bump(&mut self.stats.frames_sent, label, 1);

        let mut positions = Vec::with_capacity(self.cfg.n_nodes);
        let mut legs = Vec::with_capacity(self.cfg.n_nodes);
        for t in &mut self.trajectories {
            positions.push(t.position_at(now)?);
            legs.push(t.leg_index_at(now)?);
        }
        let id = self.next_tx_id;
        self.next_tx_id += 1;
        self.max_airtime = self.max_airtime.max(airtime);
        let end = now.after(airtime);
        self.on_air.push_back(OnAir {
            id,
            node,
            start: now,
            end,
            frame,
            positions,
            legs,
        });
        self.engine.schedule(end, SimEvent::TxEnd { id })?;
        Ok(())
    }

    fn shadow_db(&mut self, a: usize, b: usize, legs: &[u64]) -> Result<f64, SimError> {
        let sigma = self.cfg.channel.shadow_sigma_db();
        if sigma == 0.0 {
            return Ok(0.0);
        }
        match self.cfg.shadowing {
            ShadowingMode::PerPacket => Ok(self.channel_rng.normal(0.0, sigma)?),
            ShadowingMode::PerLink => {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let key = (lo as u32, hi as u32, legs[lo], legs[hi]);
                if let Some(v) = self.shadow_cache.get(&key) {
                    return Ok(*v);
                }
                let mut rng = RngStream::new(
                    self.cfg.seed,
                    format!("channel/{}/{}/{}/{}", key.0, key.1, key.2, key.3),
                );
                let v = rng.normal(0.0, sigma)?;
                self.shadow_cache.insert(key, v);
                Ok(v)
            }
        }
    }

    /// Gain of `node`'s antenna towards `target` while sending to `dest` (`None` = broadcast).
    fn tx_gain(&self, node: usize, dest: Option<NodeId>, positions: &[Point], target: usize) -> f64 {
        let pattern = &self.cfg.radio.pattern;
        match (pattern, dest) {
            (AntennaPattern::Omni { gain_dbi }, _) => *gain_dbi,
            (AntennaPattern::Directional { .. }, Some(dest)) => {
                let from = positions[node];
                let off = from.bearing_deg(positions[target]) - from.bearing_deg(positions[dest.index()]);
                antenna_gain_dbi(pattern, wrap_angle_deg(off))
            }
            (
                AntennaPattern::Directional {
                    mainlobe_dbi,
                    sidelobe_dbi,
                    ..
                },
                None,
            ) => match self.cfg.radio.broadcast {
                // A sweep points a mainlobe at every direction at some point of the frame.
                BroadcastMode::Sweep => *mainlobe_dbi,
                BroadcastMode::Sidelobe => *sidelobe_dbi,
            },
        }
    }

    /// Gain of receiver `rx`, steered at `sender`, towards a source at `source`.
    fn rx_gain(&self, positions: &[Point], rx: usize, sender: usize, source: Point) -> f64 {
        let pattern = &self.cfg.radio.pattern;
        match pattern {
            AntennaPattern::Omni { gain_dbi } => *gain_dbi,
            AntennaPattern::Directional { .. } => {
                let me = positions[rx];
                let off = me.bearing_deg(source) - me.bearing_deg(positions[sender]);
                antenna_gain_dbi(pattern, wrap_angle_deg(off))
            }
        }
    }

    fn link_pl(&mut self, positions: &[Point], legs: &[u64], a: usize, b: usize) -> Result<f64, SimError> {
        // Co-located nodes are evaluated at the models' minimum distance.
        let d = distance(positions[a], positions[b]).max(MIN_DISTANCE_M);
        let shadow = self.shadow_db(a, b, legs)?;
        Ok(self.cfg.channel.path_loss(self.cfg.radio.freq, d, shadow)?.db())
    }

    fn finish_transmission(&mut self, id: u64, now: SimTime) -> Result<(), SimError> {
        let idx = self
            .on_air
            .iter()
            .position(|t| t.id == id)
            .ok_or_else(|| SimError::Invalid(format!("unknown transmission {id}")))?;
        let tx = self.on_air[idx].clone();
        let sender = tx.node.index();
        let receivers: Vec<usize> = match tx.frame.dest {
            Some(d) => vec![d.index()],
            None => (0..self.cfg.n_nodes).filter(|&r| r != sender).collect(),
        };
        // (node, dest) of every other frame overlapping this one in time.
        let others: Vec<(usize, Option<NodeId>)> = self
            .on_air
            .iter()
            .filter(|o| o.id != id && o.start <= tx.end && o.end >= tx.start)
            .map(|o| (o.node.index(), o.frame.dest))
            .collect();

        let mut delivered_to = Vec::new();
        let mut lost_unicast = false;
        for r in receivers {
            let pl = self.link_pl(&tx.positions, &tx.legs, sender, r)?;
            let gain = self.tx_gain(sender, tx.frame.dest, &tx.positions, r)
                + self.rx_gain(&tx.positions, r, sender, tx.positions[sender]);
            let rx_power = self.cfg.radio.tx_power_dbm - pl + gain;
            let rx_transmitting = others.iter().any(|(k, _)| *k == r);
            let mut concurrent = Vec::new();
            if !rx_transmitting && rx_power - self.noise_dbm >= self.cfg.radio.snr_threshold_db {
                for &(k, k_dest) in &others {
                    if k == sender {
                        continue;
                    }
                    let pl_k = self.link_pl(&tx.positions, &tx.legs, k, r)?;
                    let g = self.tx_gain(k, k_dest, &tx.positions, r)
                        + self.rx_gain(&tx.positions, r, sender, tx.positions[k]);
                    concurrent.push(self.cfg.radio.tx_power_dbm - pl_k + g);
                }
            }
            let attempt = TransmissionAttempt {
                tx_node: sender as u32,
                rx_node: r as u32,
                frame_bytes: tx.frame.bytes,
                start: tx.start.as_secs(),
                rx_power_dbm: rx_power,
                concurrent,
                rx_transmitting,
            };
            match try_receive(&attempt, &self.cfg.radio, self.noise_dbm) {
                Reception::Delivered { sinr_db } => {
                    if sinr_db < self.cfg.radio.snr_threshold_db {
                        self.stats.delivered_below_threshold += 1;
                    }
                    self.stats.receptions += 1;
                    delivered_to.push(r);
                }
                Reception::Lost(reason) => {
                    let key = if reason == LossReason::BelowThreshold && tx.frame.dest.is_none() {
                        // Out-of-range nodes are not counted for broadcasts.
                        None
                    } else {
                        Some(reason.label())
                    };
                    if let Some(k) = key {
                        bump(&mut self.stats.losses, k, 1);
                    }
                    lost_unicast = tx.frame.dest.is_some();
                }
            }
        }

        self.on_air.remove(idx);
        let horizon = now.as_secs() - 2.0 * self.max_airtime;
        while self.on_air.front().is_some_and(|o| o.end.as_secs() < horizon) {
            self.on_air.pop_front();
        }
        self.macs[sender].transmitting = false;

        if lost_unicast && tx.frame.retries_left > 0 {
            let mut retry = tx.frame.clone();
            retry.retries_left -= 1;
            self.macs[sender].queue.push_front(retry);
        }
        self.schedule_access(tx.node, now)?;

        for r in delivered_to {
            let to = NodeId(r as u32);
            self.protocols[r].on_frame_heard(tx.node, now);
            match &tx.frame.payload {
                Payload::Control(msg) => {
                    let actions = self.protocols[r].on_control(tx.node, msg, now);
                    self.apply(to, actions)?;
                }
                Payload::Data(pkt) => self.handle_data(to, Some(tx.node), pkt.clone(), now)?,
            }
        }
        Ok(())
    }
}

/// Convenience wrapper: build and run.
pub fn run(cfg: SimConfig) -> Result<RunOutput, SimError> {
    Simulation::new(cfg)?.run()
}
