//! Scenario documents.
//!
//! A scenario is a TOML document with the sections `[scenario]`, `[mobility]`,
//! `[radio]` (including `[radio.mac]`), `[channel.<name>]`, `[routing]`, `[traffic]`
//! and `[sweep]`. Every key is optional. Two channel profiles are built in:
//!
//! * `wifi`: 2.4 GHz free-space (Friis) loss, omnidirectional 0 dBi, 22 MHz.
//! * `mmwave`: 28 GHz RMa line-of-sight loss with h = 5 m, directional 17 dBi mainlobe,
//!   30° beamwidth, −10 dBi sidelobes, 100 MHz.
//!
//! Radio keys resolve in three layers: built-in profile, then `[radio]`, then the
//! `[channel.<name>]` table itself. Unknown keys are rejected.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::mobility::Region;
use crate::propagation::{ChannelModelSpec, CiParams, FrequencyHz, UmaCoefficients};
use crate::radio::{AntennaPattern, BroadcastMode, RadioConfig, MAX_TX_POWER_DBM};
use crate::routing::{ProtocolKind, RoutingConfig};
use crate::sim::{MacConfig, ShadowingMode, SimConfig};
use crate::traffic::TrafficConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

/// Transmit powers swept by default.
pub const DEFAULT_SWEEP_POWERS: [f64; 4] = [7.5, 10.0, 20.0, 40.0];

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default)]
    scenario: ScenarioSection,
    #[serde(default)]
    mobility: MobilitySection,
    #[serde(default)]
    radio: RadioSection,
    #[serde(default)]
    channel: BTreeMap<String, ChannelSection>,
    #[serde(default)]
    routing: RoutingConfig,
    #[serde(default)]
    traffic: Option<TrafficConfig>,
    #[serde(default)]
    sweep: SweepSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    name: Option<String>,
    duration_s: Option<f64>,
    warmup_s: Option<f64>,
    n_nodes: Option<i64>,
    seed: Option<u64>,
    replications: Option<u32>,
    protocols: Option<Vec<String>>,
    channels: Option<Vec<String>>,
    tx_powers: Option<Vec<f64>>,
    pkt_bytes: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MobilitySection {
    preset: Option<String>,
    width_m: Option<f64>,
    height_m: Option<f64>,
    speed_mps: Option<f64>,
    pause_s: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadioSection {
    tx_power_dbm: Option<f64>,
    bitrate_bps: Option<f64>,
    bandwidth_hz: Option<f64>,
    noise_figure_db: Option<f64>,
    snr_threshold_db: Option<f64>,
    pattern: Option<String>,
    gain_dbi: Option<f64>,
    mainlobe_dbi: Option<f64>,
    beamwidth_deg: Option<f64>,
    sidelobe_dbi: Option<f64>,
    broadcast: Option<BroadcastMode>,
    mac: Option<MacConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    model: Option<String>,
    freq_hz: Option<f64>,
    gt_dbi: Option<f64>,
    gr_dbi: Option<f64>,
    h_m: Option<f64>,
    ple_n: Option<f64>,
    sigma_db: Option<f64>,
    uma_coeffs: Option<String>,
    shadowing: Option<ShadowingMode>,
    bitrate_bps: Option<f64>,
    bandwidth_hz: Option<f64>,
    noise_figure_db: Option<f64>,
    snr_threshold_db: Option<f64>,
    pattern: Option<String>,
    gain_dbi: Option<f64>,
    mainlobe_dbi: Option<f64>,
    beamwidth_deg: Option<f64>,
    sidelobe_dbi: Option<f64>,
    broadcast: Option<BroadcastMode>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    powers: Option<Vec<f64>>,
}

/// A fully resolved channel profile, without the per-cell transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    pub name: String,
    pub model: ChannelModelSpec,
    pub shadowing: ShadowingMode,
    pub radio: RadioConfig,
}

/// Every knob of an experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub n_nodes: usize,
    pub seed: u64,
    pub replications: u32,
    pub protocols: Vec<ProtocolKind>,
    pub channels: Vec<ChannelProfile>,
    pub tx_powers: Vec<f64>,
    pub pkt_bytes: Vec<u32>,
    pub sweep_powers: Vec<f64>,
    pub region: Region,
    pub speed_mps: f64,
    pub pause_s: f64,
    pub mac: MacConfig,
    pub routing: RoutingConfig,
    pub traffic: TrafficConfig,
}

/// Radio keys shared by `[radio]` and `[channel.<name>]`.
struct RadioKeys<'a> {
    section: &'a str,
    bitrate_bps: Option<f64>,
    bandwidth_hz: Option<f64>,
    noise_figure_db: Option<f64>,
    snr_threshold_db: Option<f64>,
    pattern: Option<&'a str>,
    gain_dbi: Option<f64>,
    mainlobe_dbi: Option<f64>,
    beamwidth_deg: Option<f64>,
    sidelobe_dbi: Option<f64>,
    broadcast: Option<BroadcastMode>,
}

impl RadioKeys<'_> {
    fn apply(&self, radio: &mut RadioConfig) -> Result<(), ConfigError> {
        let key = |k: &str| format!("{}.{k}", self.section);
        if let Some(v) = self.bitrate_bps {
            if !(v > 0.0) {
                return Err(invalid(key("bitrate_bps"), "must be positive"));
            }
            radio.bitrate_bps = v;
        }
        if let Some(v) = self.bandwidth_hz {
            if !(v > 0.0) {
                return Err(invalid(key("bandwidth_hz"), "must be positive"));
            }
            radio.bandwidth_hz = v;
        }
        if let Some(v) = self.noise_figure_db {
            radio.noise_figure_db = v;
        }
        if let Some(v) = self.snr_threshold_db {
            radio.snr_threshold_db = v;
        }
        if let Some(v) = self.broadcast {
            radio.broadcast = v;
        }
        let (mut main, mut bw, mut side) = match radio.pattern {
            AntennaPattern::Directional {
                mainlobe_dbi,
                beamwidth_deg,
                sidelobe_dbi,
            } => (mainlobe_dbi, beamwidth_deg, sidelobe_dbi),
            AntennaPattern::Omni { .. } => (17.0, 30.0, -10.0),
        };
        let mut omni_gain = match radio.pattern {
            AntennaPattern::Omni { gain_dbi } => gain_dbi,
            AntennaPattern::Directional { .. } => 0.0,
        };
        main = self.mainlobe_dbi.unwrap_or(main);
        bw = self.beamwidth_deg.unwrap_or(bw);
        side = self.sidelobe_dbi.unwrap_or(side);
        omni_gain = self.gain_dbi.unwrap_or(omni_gain);
        let directional = match self.pattern {
            Some("omni") => false,
            Some("directional") => true,
            Some(other) => {
                return Err(invalid(
                    key("pattern"),
                    format!("expected `omni` or `directional`, got `{other}`"),
                ));
            }
            None => radio.pattern.is_directional(),
        };
        radio.pattern = if directional {
            AntennaPattern::directional(main, bw, side)
                .map_err(|e| invalid(key("beamwidth_deg/mainlobe_dbi"), e.to_string()))?
        } else {
            AntennaPattern::Omni { gain_dbi: omni_gain }
        };
        Ok(())
    }
}

fn builtin_profile(name: &str) -> Option<ChannelProfile> {
    match name {
        "wifi" => Some(ChannelProfile {
            name: name.into(),
            model: ChannelModelSpec::FriisOmni,
            shadowing: ShadowingMode::PerLink,
            radio: RadioConfig {
                freq: FrequencyHz::ghz(2.4).expect("positive"),
                tx_power_dbm: 20.0,
                bitrate_bps: 2e6,
                bandwidth_hz: 22e6,
                noise_figure_db: 7.0,
                snr_threshold_db: 10.0,
                pattern: AntennaPattern::Omni { gain_dbi: 0.0 },
                broadcast: BroadcastMode::Sweep,
                mac_retries: 0,
            },
        }),
        "mmwave" => Some(ChannelProfile {
            name: name.into(),
            model: ChannelModelSpec::RmaLos { h_m: 5.0 },
            shadowing: ShadowingMode::PerLink,
            radio: RadioConfig {
                freq: FrequencyHz::ghz(28.0).expect("positive"),
                tx_power_dbm: 20.0,
                bitrate_bps: 2e6,
                bandwidth_hz: 100e6,
                noise_figure_db: 7.0,
                snr_threshold_db: 10.0,
                pattern: AntennaPattern::Directional {
                    mainlobe_dbi: 17.0,
                    beamwidth_deg: 30.0,
                    sidelobe_dbi: -10.0,
                },
                broadcast: BroadcastMode::Sweep,
                mac_retries: 0,
            },
        }),
        _ => None,
    }
}

fn resolve_model(
    name: &str,
    sec: &ChannelSection,
    base: Option<&ChannelModelSpec>,
) -> Result<ChannelModelSpec, ConfigError> {
    let key = |k: &str| format!("channel.{name}.{k}");
    let model_name = match (&sec.model, base) {
        (Some(m), _) => m.as_str(),
        (None, Some(b)) => b.name(),
        (None, None) => return Err(invalid(key("model"), "required for a channel that is not built in")),
    };
    let same_base = base.filter(|b| b.name() == model_name);
    let spec = match model_name {
        "friis" => ChannelModelSpec::FriisOmni,
        "friis_dir" => {
            let (gt0, gr0) = match same_base {
                Some(ChannelModelSpec::FriisDirectional { gt_dbi, gr_dbi }) => (*gt_dbi, *gr_dbi),
                _ => (17.0, 17.0),
            };
            ChannelModelSpec::FriisDirectional {
                gt_dbi: sec.gt_dbi.unwrap_or(gt0),
                gr_dbi: sec.gr_dbi.unwrap_or(gr0),
            }
        }
        "rma" => {
            let h0 = match same_base {
                Some(ChannelModelSpec::RmaLos { h_m }) => *h_m,
                _ => 5.0,
            };
            let h_m = sec.h_m.unwrap_or(h0);
            if !(h_m > 0.0) {
                return Err(invalid(key("h_m"), "must be positive"));
            }
            ChannelModelSpec::RmaLos { h_m }
        }
        "ci" => {
            let (n0, s0) = match same_base {
                Some(ChannelModelSpec::Ci(p)) => (p.ple_n, p.sigma_db),
                _ => (2.0, 0.0),
            };
            let p = CiParams::new(sec.ple_n.unwrap_or(n0), sec.sigma_db.unwrap_or(s0))
                .map_err(|e| invalid(key("ple_n/sigma_db"), e.to_string()))?;
            ChannelModelSpec::Ci(p)
        }
        "uma" => {
            let coeffs = match (&sec.uma_coeffs, same_base) {
                (Some(text), _) => {
                    UmaCoefficients::parse(text).map_err(|e| invalid(key("uma_coeffs"), e.to_string()))?
                }
                (None, Some(ChannelModelSpec::UmaLos(Some(c)))) => *c,
                (None, _) => return Err(invalid(key("uma_coeffs"), "required for the uma model")),
            };
            ChannelModelSpec::UmaLos(Some(coeffs))
        }
        other => {
            return Err(invalid(
                key("model"),
                format!("unknown model `{other}` (expected friis, friis_dir, rma, ci or uma)"),
            ))
        }
    };
    Ok(spec)
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be positive, got {v}")))
    }
}

fn check_power(key: &str, p: f64) -> Result<f64, ConfigError> {
    if !p.is_finite() {
        return Err(invalid(key, "must be finite"));
    }
    if p > MAX_TX_POWER_DBM {
        return Err(invalid(
            key,
            format!("{p} dBm exceeds the {MAX_TX_POWER_DBM} dBm EIRP cap"),
        ));
    }
    Ok(p)
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let doc: Document = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::resolve(doc)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn resolve(doc: Document) -> Result<Self, ConfigError> {
        let sc = &doc.scenario;
        let duration_s = positive("scenario.duration_s", sc.duration_s.unwrap_or(200.0))?;
        let warmup_s = sc.warmup_s.unwrap_or(50.0);
        if !(warmup_s >= 0.0) {
            return Err(invalid("scenario.warmup_s", "must be non-negative"));
        }
        if duration_s <= warmup_s {
            return Err(invalid(
                "scenario.duration_s",
                format!("must exceed warmup_s ({warmup_s}), got {duration_s}"),
            ));
        }
        let n_nodes = sc.n_nodes.unwrap_or(50);
        if n_nodes < 2 {
            return Err(invalid(
                "scenario.n_nodes",
                format!("need at least 2 nodes, got {n_nodes}"),
            ));
        }
        let n_nodes = n_nodes as usize;
        let replications = sc.replications.unwrap_or(5);
        if replications == 0 {
            return Err(invalid("scenario.replications", "must be at least 1"));
        }

        let protocols = match (&sc.protocols, doc.routing.protocol) {
            (Some(list), _) => list
                .iter()
                .map(|p| {
                    ProtocolKind::parse(p)
                        .ok_or_else(|| invalid("scenario.protocols", format!("unknown protocol `{p}`")))
                })
                .collect::<Result<Vec<_>, _>>()?,
            (None, Some(p)) => vec![p],
            (None, None) => ProtocolKind::ALL.to_vec(),
        };
        if protocols.is_empty() {
            return Err(invalid("scenario.protocols", "must not be empty"));
        }

        let mob = &doc.mobility;
        let base_region = match mob.preset.as_deref() {
            None | Some("table1") => Region::TABLE1,
            Some("paper-text") => Region::PAPER_TEXT,
            Some(other) => {
                return Err(invalid(
                    "mobility.preset",
                    format!("unknown preset `{other}` (expected table1 or paper-text)"),
                ))
            }
        };
        let width = positive("mobility.width_m", mob.width_m.unwrap_or(base_region.width()))?;
        let height = positive("mobility.height_m", mob.height_m.unwrap_or(base_region.height()))?;
        let region = Region::new(width, height).map_err(|e| invalid("mobility.width_m", e.to_string()))?;
        let speed_mps = positive("mobility.speed_mps", mob.speed_mps.unwrap_or(20.0))?;
        let pause_s = mob.pause_s.unwrap_or(0.0);
        if !(pause_s >= 0.0) {
            return Err(invalid("mobility.pause_s", "must be non-negative"));
        }

        let r = &doc.radio;
        let default_power = check_power("radio.tx_power_dbm", r.tx_power_dbm.unwrap_or(20.0))?;
        let mac = r.mac.clone().unwrap_or_default();
        if !(mac.access_jitter_s >= 0.0) {
            return Err(invalid("radio.mac.access_jitter_s", "must be non-negative"));
        }
        let radio_keys = RadioKeys {
            section: "radio",
            bitrate_bps: r.bitrate_bps,
            bandwidth_hz: r.bandwidth_hz,
            noise_figure_db: r.noise_figure_db,
            snr_threshold_db: r.snr_threshold_db,
            pattern: r.pattern.as_deref(),
            gain_dbi: r.gain_dbi,
            mainlobe_dbi: r.mainlobe_dbi,
            beamwidth_deg: r.beamwidth_deg,
            sidelobe_dbi: r.sidelobe_dbi,
            broadcast: r.broadcast,
        };

        let channel_names: Vec<String> = match &sc.channels {
            Some(list) => list.clone(),
            None => vec!["wifi".into(), "mmwave".into()],
        };
        if channel_names.is_empty() {
            return Err(invalid("scenario.channels", "must not be empty"));
        }
        let mut channels = Vec::new();
        for name in &channel_names {
            let base = builtin_profile(name);
            let sec = doc.channel.get(name).cloned().unwrap_or_default();
            if base.is_none() && !doc.channel.contains_key(name) {
                return Err(invalid(
                    "scenario.channels",
                    format!("unknown channel `{name}` and no [channel.{name}] table"),
                ));
            }
            let model = resolve_model(name, &sec, base.as_ref().map(|b| &b.model))?;
            let mut radio = match &base {
                Some(b) => b.radio.clone(),
                None => builtin_profile("wifi").expect("builtin").radio,
            };
            let freq_hz = match (sec.freq_hz, &base) {
                (Some(f), _) => f,
                (None, Some(b)) => b.radio.freq.hz(),
                (None, None) => {
                    return Err(invalid(
                        format!("channel.{name}.freq_hz"),
                        "required for a channel that is not built in",
                    ))
                }
            };
            radio.freq =
                FrequencyHz::new(freq_hz).map_err(|e| invalid(format!("channel.{name}.freq_hz"), e.to_string()))?;
            radio.mac_retries = mac.retries;
            radio_keys.apply(&mut radio)?;
            let section = format!("channel.{name}");
            RadioKeys {
                section: &section,
                bitrate_bps: sec.bitrate_bps,
                bandwidth_hz: sec.bandwidth_hz,
                noise_figure_db: sec.noise_figure_db,
                snr_threshold_db: sec.snr_threshold_db,
                pattern: sec.pattern.as_deref(),
                gain_dbi: sec.gain_dbi,
                mainlobe_dbi: sec.mainlobe_dbi,
                beamwidth_deg: sec.beamwidth_deg,
                sidelobe_dbi: sec.sidelobe_dbi,
                broadcast: sec.broadcast,
            }
            .apply(&mut radio)?;
            channels.push(ChannelProfile {
                name: name.clone(),
                model,
                shadowing: sec.shadowing.or(base.map(|b| b.shadowing)).unwrap_or_default(),
                radio,
            });
        }

        let tx_powers = match &sc.tx_powers {
            Some(list) => list
                .iter()
                .map(|&p| check_power("scenario.tx_powers", p))
                .collect::<Result<Vec<_>, _>>()?,
            None => vec![default_power],
        };
        if tx_powers.is_empty() {
            return Err(invalid("scenario.tx_powers", "must not be empty"));
        }
        let sweep_powers = match &doc.sweep.powers {
            Some(list) => list
                .iter()
                .map(|&p| check_power("sweep.powers", p))
                .collect::<Result<Vec<_>, _>>()?,
            None => DEFAULT_SWEEP_POWERS.to_vec(),
        };

        let traffic = doc.traffic.clone().unwrap_or_default();
        let pkt_bytes = sc.pkt_bytes.clone().unwrap_or_else(|| vec![traffic.pkt_bytes]);
        if pkt_bytes.is_empty() || pkt_bytes.contains(&0) {
            return Err(invalid(
                "scenario.pkt_bytes",
                "must be a non-empty list of positive sizes",
            ));
        }
        if !(traffic.pkts_per_s > 0.0) {
            return Err(invalid("traffic.pkts_per_s", "must be positive"));
        }
        let [lo, hi] = traffic.start_window;
        if !(lo >= 0.0 && hi >= lo) {
            return Err(invalid(
                "traffic.start_window",
                format!("[{lo}, {hi}] is not a valid window"),
            ));
        }
        if 2 * traffic.n_pairs > n_nodes {
            return Err(invalid(
                "traffic.n_pairs",
                format!(
                    "{} pairs need {} nodes but scenario.n_nodes = {n_nodes}",
                    traffic.n_pairs,
                    2 * traffic.n_pairs
                ),
            ));
        }
        if !(doc.routing.jitter_fraction >= 0.0 && doc.routing.jitter_fraction <= 1.0) {
            return Err(invalid("routing.jitter_fraction", "must be within [0, 1]"));
        }

        Ok(ScenarioConfig {
            name: sc.name.clone().unwrap_or_else(|| "scenario".into()),
            duration_s,
            warmup_s,
            n_nodes,
            seed: sc.seed.unwrap_or(1),
            replications,
            protocols,
            channels,
            tx_powers,
            pkt_bytes,
            sweep_powers,
            region,
            speed_mps,
            pause_s,
            mac,
            routing: doc.routing,
            traffic,
        })
    }

    /// One simulation per (protocol, channel, power, packet size, replication), in that
    /// nesting order. Replication `i` uses seed `seed + i`.
    pub fn cells_with_powers(&self, powers: &[f64]) -> Vec<SimConfig> {
        let mut cells = Vec::new();
        for &protocol in &self.protocols {
            for ch in &self.channels {
                for &power in powers {
                    for &bytes in &self.pkt_bytes {
                        for rep in 0..self.replications {
                            let mut radio = ch.radio.clone();
                            radio.tx_power_dbm = power;
                            cells.push(SimConfig {
                                n_nodes: self.n_nodes,
                                duration_s: self.duration_s,
                                warmup_s: self.warmup_s,
                                seed: self.seed + rep as u64,
                                region: self.region,
                                speed_mps: self.speed_mps,
                                pause_s: self.pause_s,
                                channel_name: ch.name.clone(),
                                channel: ch.model.clone(),
                                shadowing: ch.shadowing,
                                radio,
                                mac: self.mac.clone(),
                                protocol,
                                routing: self.routing.clone(),
                                traffic: TrafficConfig {
                                    pkt_bytes: bytes,
                                    ..self.traffic.clone()
                                },
                            });
                        }
                    }
                }
            }
        }
        cells
    }

    pub fn cells(&self) -> Vec<SimConfig> {
        self.cells_with_powers(&self.tx_powers)
    }

    pub fn sweep_cells(&self) -> Vec<SimConfig> {
        self.cells_with_powers(&self.sweep_powers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(err: ConfigError) -> String {
        match err {
            ConfigError::Invalid { key, .. } => key,
            ConfigError::Parse(msg) => msg,
        }
    }

    #[test]
    fn empty_document_is_the_default_grid() {
        let cfg = ScenarioConfig::parse("").unwrap();
        assert_eq!(cfg.cells().len(), 3 * 2 * 5);
        assert_eq!(cfg.n_nodes, 50);
        assert_eq!(cfg.region, Region::TABLE1);
        assert_eq!(cfg.channels[1].model, ChannelModelSpec::RmaLos { h_m: 5.0 });
        assert!(cfg.channels[1].radio.pattern.is_directional());
    }

    #[test]
    fn single_node_rejected() {
        let err = ScenarioConfig::parse("[scenario]\nn_nodes = 1\n").unwrap_err();
        assert_eq!(key_of(err), "scenario.n_nodes");
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ScenarioConfig::parse("[radio]\ntx_pwr = 3\n").unwrap_err();
        assert!(key_of(err).contains("tx_pwr"));
    }

    #[test]
    fn power_cap() {
        let err = ScenarioConfig::parse("[scenario]\ntx_powers = [20, 50]\n").unwrap_err();
        assert_eq!(key_of(err), "scenario.tx_powers");
        let err = ScenarioConfig::parse("[sweep]\npowers = [44]\n").unwrap_err();
        assert_eq!(key_of(err), "sweep.powers");
    }

    #[test]
    fn channel_overrides_layer_on_radio() {
        let text = r#"
[scenario]
channels = ["mmwave", "ci28"]
[radio]
snr_threshold_db = 8
[channel.mmwave]
beamwidth_deg = 20
[channel.ci28]
model = "ci"
freq_hz = 28e9
ple_n = 2.5
sigma_db = 4
"#;
        let cfg = ScenarioConfig::parse(text).unwrap();
        let mm = &cfg.channels[0];
        assert_eq!(mm.radio.snr_threshold_db, 8.0);
        assert_eq!(mm.radio.pattern.sweep_sectors(), 18);
        assert_eq!(cfg.channels[1].model.shadow_sigma_db(), 4.0);
    }

    #[test]
    fn uma_needs_coefficients() {
        let text = "[scenario]\nchannels = [\"u\"]\n[channel.u]\nmodel = \"uma\"\nfreq_hz = 28e9\n";
        assert_eq!(key_of(ScenarioConfig::parse(text).unwrap_err()), "channel.u.uma_coeffs");
    }

    #[test]
    fn seeds_follow_replications() {
        let cfg = ScenarioConfig::parse(
            "[scenario]\nseed = 10\nreplications = 3\nprotocols = [\"aodv\"]\nchannels = [\"wifi\"]\n",
        )
        .unwrap();
        let seeds: Vec<u64> = cfg.cells().iter().map(|c| c.seed).collect();
        assert_eq!(seeds, vec![10, 11, 12]);
        assert_eq!(cfg.sweep_cells().len(), 12);
    }

    #[test]
    fn paper_text_region() {
        let cfg = ScenarioConfig::parse("[mobility]\npreset = \"paper-text\"\n").unwrap();
        assert_eq!((cfg.region.width(), cfg.region.height()), (300.0, 1500.0));
    }
}
