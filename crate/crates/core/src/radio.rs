//! Antenna patterns, noise and SINR, reception decisions, airtime and transmit energy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::propagation::FrequencyHz;

/// Highest permitted UE EIRP-derived transmit power.
pub const MAX_TX_POWER_DBM: f64 = 43.0;

/// Thermal noise density at 290 K.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

#[derive(Debug, Error, PartialEq)]
pub enum RadioError {
    #[error("tx power {0} dBm exceeds the {MAX_TX_POWER_DBM} dBm cap")]
    PowerAboveCap(f64),
    #[error("beamwidth must be in (0, 360) degrees, got {0}")]
    BadBeamwidth(f64),
    #[error("mainlobe gain {main} dBi is below sidelobe gain {side} dBi")]
    InvertedPattern { main: f64, side: f64 },
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AntennaPattern {
    Omni {
        gain_dbi: f64,
    },
    Directional {
        mainlobe_dbi: f64,
        beamwidth_deg: f64,
        sidelobe_dbi: f64,
    },
}

impl Default for AntennaPattern {
    fn default() -> Self {
        AntennaPattern::Omni { gain_dbi: 0.0 }
    }
}

impl AntennaPattern {
    pub fn directional(mainlobe_dbi: f64, beamwidth_deg: f64, sidelobe_dbi: f64) -> Result<Self, RadioError> {
        if !(beamwidth_deg > 0.0 && beamwidth_deg < 360.0) {
            return Err(RadioError::BadBeamwidth(beamwidth_deg));
        }
        if mainlobe_dbi < sidelobe_dbi {
            return Err(RadioError::InvertedPattern {
                main: mainlobe_dbi,
                side: sidelobe_dbi,
            });
        }
        Ok(AntennaPattern::Directional {
            mainlobe_dbi,
            beamwidth_deg,
            sidelobe_dbi,
        })
    }

    pub fn is_directional(&self) -> bool {
        matches!(self, AntennaPattern::Directional { .. })
    }

    pub fn peak_gain_dbi(&self) -> f64 {
        match *self {
            AntennaPattern::Omni { gain_dbi } => gain_dbi,
            AntennaPattern::Directional { mainlobe_dbi, .. } => mainlobe_dbi,
        }
    }

    /// Number of sectors needed to cover the full circle.
    pub fn sweep_sectors(&self) -> u32 {
        match *self {
            AntennaPattern::Omni { .. } => 1,
            AntennaPattern::Directional { beamwidth_deg, .. } => (360.0 / beamwidth_deg).ceil() as u32,
        }
    }
}

/// Wraps any angle into (-180, 180].
pub fn wrap_angle_deg(angle: f64) -> f64 {
    let mut a = angle % 360.0;
    if a > 180.0 {
        a -= 360.0;
    } else if a <= -180.0 {
        a += 360.0;
    }
    a
}

/// Gain towards a direction `off_boresight_deg` away from where the beam points.
/// The mainlobe edge (exactly half the beamwidth) counts as mainlobe.
pub fn antenna_gain_dbi(pattern: &AntennaPattern, off_boresight_deg: f64) -> f64 {
    match *pattern {
        AntennaPattern::Omni { gain_dbi } => gain_dbi,
        AntennaPattern::Directional {
            mainlobe_dbi,
            beamwidth_deg,
            sidelobe_dbi,
        } => {
            if wrap_angle_deg(off_boresight_deg).abs() <= beamwidth_deg / 2.0 {
                mainlobe_dbi
            } else {
                sidelobe_dbi
            }
        }
    }
}

pub fn noise_floor_dbm(bandwidth_hz: f64, nf_db: f64) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + 10.0 * bandwidth_hz.log10() + nf_db
}

pub fn sinr_db(rx_dbm: f64, interferers_dbm: &[f64], noise_dbm: f64) -> f64 {
    let denom: f64 = interferers_dbm.iter().map(|&i| dbm_to_mw(i)).sum::<f64>() + dbm_to_mw(noise_dbm);
    rx_dbm - mw_to_dbm(denom)
}

/// How broadcast frames leave a directional antenna.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BroadcastMode {
    /// One sector per beamwidth; every neighbour hears the mainlobe, energy is charged per sector.
    #[default]
    Sweep,
    /// A single transmission through the sidelobes.
    Sidelobe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioConfig {
    pub freq: FrequencyHz,
    pub tx_power_dbm: f64,
    pub bitrate_bps: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub snr_threshold_db: f64,
    pub pattern: AntennaPattern,
    pub broadcast: BroadcastMode,
    pub mac_retries: u32,
}

impl RadioConfig {
    pub fn validate(&self) -> Result<(), RadioError> {
        if self.tx_power_dbm > MAX_TX_POWER_DBM {
            return Err(RadioError::PowerAboveCap(self.tx_power_dbm));
        }
        if !(self.bitrate_bps > 0.0) {
            return Err(RadioError::NonPositive("bitrate_bps"));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(RadioError::NonPositive("bandwidth_hz"));
        }
        if let AntennaPattern::Directional {
            mainlobe_dbi,
            beamwidth_deg,
            sidelobe_dbi,
        } = self.pattern
        {
            AntennaPattern::directional(mainlobe_dbi, beamwidth_deg, sidelobe_dbi)?;
        }
        Ok(())
    }

    pub fn noise_dbm(&self) -> f64 {
        noise_floor_dbm(self.bandwidth_hz, self.noise_figure_db)
    }
}

/// One frame as seen by one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionAttempt {
    pub tx_node: u32,
    pub rx_node: u32,
    pub frame_bytes: u32,
    pub start: f64,
    pub rx_power_dbm: f64,
    pub concurrent: Vec<f64>,
    /// The receiver was itself on air during some part of the frame.
    pub rx_transmitting: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum LossReason {
    BelowThreshold,
    HalfDuplex,
    /// SNR alone would pass; the interference pushed SINR under threshold.
    Collision,
}

impl LossReason {
    pub fn label(&self) -> &'static str {
        match self {
            LossReason::BelowThreshold => "below_threshold",
            LossReason::HalfDuplex => "half_duplex",
            LossReason::Collision => "collision_policy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reception {
    Delivered { sinr_db: f64 },
    Lost(LossReason),
}

impl Reception {
    pub fn is_delivered(&self) -> bool {
        matches!(self, Reception::Delivered { .. })
    }
}

pub fn try_receive(a: &TransmissionAttempt, cfg: &RadioConfig, noise_dbm: f64) -> Reception {
    if a.rx_transmitting {
        return Reception::Lost(LossReason::HalfDuplex);
    }
    let sinr = sinr_db(a.rx_power_dbm, &a.concurrent, noise_dbm);
    if sinr >= cfg.snr_threshold_db {
        Reception::Delivered { sinr_db: sinr }
    } else if a.rx_power_dbm - noise_dbm >= cfg.snr_threshold_db {
        Reception::Lost(LossReason::Collision)
    } else {
        Reception::Lost(LossReason::BelowThreshold)
    }
}

pub fn airtime_s(bytes: u32, bitrate_bps: f64) -> f64 {
    8.0 * bytes as f64 / bitrate_bps
}

pub fn tx_energy_mj(tx_power_dbm: f64, airtime: f64) -> f64 {
    dbm_to_mw(tx_power_dbm) * airtime
}

/// Per-node transmit energy, in mJ.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyLedger {
    per_node: Vec<f64>,
    frames: u64,
}

impl EnergyLedger {
    pub fn new(nodes: usize) -> Self {
        EnergyLedger {
            per_node: vec![0.0; nodes],
            frames: 0,
        }
    }

    pub fn charge(&mut self, node: usize, mj: f64) {
        self.per_node[node] += mj;
        self.frames += 1;
    }

    pub fn node_mj(&self, node: usize) -> f64 {
        self.per_node[node]
    }

    pub fn total_mj(&self) -> f64 {
        self.per_node.iter().sum()
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }
}
