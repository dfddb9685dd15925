//! Path-loss models and the link-budget conversion.
//!
//! Every model works in dB with base-10 logarithms. Distances are meters, frequencies
//! are accepted in Hz; models whose coefficients are defined over GHz convert internally.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light used by every model, m/s.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Minimum distance at which any model is evaluated.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Threshold for the "mmWave band" flag.
pub const MMWAVE_BAND_START_HZ: f64 = 28.0e9;

/// `20·log10(c / 4π)`, the constant of the dB-form free-space law (≈ 147.56 dB).
pub fn friis_constant_db() -> f64 {
    20.0 * (SPEED_OF_LIGHT / (4.0 * PI)).log10()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("distance {0} m is below the model minimum of {MIN_DISTANCE_M} m")]
    TooClose(f64),
    #[error("frequency must be positive, got {0} Hz")]
    BadFrequency(f64),
    #[error("height must be positive, got {0} m")]
    BadHeight(f64),
    #[error("path-loss exponent must be positive, got {0}")]
    BadExponent(f64),
    #[error("shadow-fading std-dev must be non-negative, got {0} dB")]
    BadSigma(f64),
    #[error("UMa coefficient table is missing or incomplete")]
    MissingUmaCoefficients,
    #[error("unknown path-loss model `{0}`")]
    UnknownModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FrequencyHz(f64);

impl FrequencyHz {
    pub fn new(hz: f64) -> Result<Self, PropagationError> {
        if hz.is_finite() && hz > 0.0 {
            Ok(FrequencyHz(hz))
        } else {
            Err(PropagationError::BadFrequency(hz))
        }
    }

    pub fn ghz(ghz: f64) -> Result<Self, PropagationError> {
        Self::new(ghz * 1e9)
    }

    pub fn hz(self) -> f64 {
        self.0
    }

    pub fn as_ghz(self) -> f64 {
        self.0 / 1e9
    }

    pub fn is_mmwave(self) -> bool {
        self.0 >= MMWAVE_BAND_START_HZ
    }
}

impl fmt::Display for FrequencyHz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} GHz", self.as_ghz())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PathLossDb(pub f64);

impl PathLossDb {
    pub fn db(self) -> f64 {
        self.0
    }
}

/// Close-in reference-distance model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiParams {
    pub ple_n: f64,
    pub sigma_db: f64,
}

impl CiParams {
    pub fn new(ple_n: f64, sigma_db: f64) -> Result<Self, PropagationError> {
        if !(ple_n > 0.0) || !ple_n.is_finite() {
            return Err(PropagationError::BadExponent(ple_n));
        }
        if !(sigma_db >= 0.0) || !sigma_db.is_finite() {
            return Err(PropagationError::BadSigma(sigma_db));
        }
        Ok(CiParams { ple_n, sigma_db })
    }
}

/// `a + b·log10(d) + e·log10(fc_GHz)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UmaCoefficients {
    pub a: f64,
    pub b: f64,
    pub e: f64,
}

impl UmaCoefficients {
    /// Parses `"a,b,e"`.
    pub fn parse(text: &str) -> Result<Self, PropagationError> {
        let values: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| PropagationError::MissingUmaCoefficients)?;
        match values.as_slice() {
            [a, b, e] if values.iter().all(|v| v.is_finite()) => Ok(UmaCoefficients { a: *a, b: *b, e: *e }),
            _ => Err(PropagationError::MissingUmaCoefficients),
        }
    }
}

/// Which path-loss law a link uses.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModelSpec {
    FriisOmni,
    FriisDirectional { gt_dbi: f64, gr_dbi: f64 },
    RmaLos { h_m: f64 },
    Ci(CiParams),
    UmaLos(Option<UmaCoefficients>),
}

impl ChannelModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelModelSpec::FriisOmni => "friis",
            ChannelModelSpec::FriisDirectional { .. } => "friis_dir",
            ChannelModelSpec::RmaLos { .. } => "rma",
            ChannelModelSpec::Ci(_) => "ci",
            ChannelModelSpec::UmaLos(_) => "uma",
        }
    }

    pub fn validate(&self) -> Result<(), PropagationError> {
        match self {
            ChannelModelSpec::RmaLos { h_m } if !(*h_m > 0.0) => Err(PropagationError::BadHeight(*h_m)),
            ChannelModelSpec::Ci(p) => CiParams::new(p.ple_n, p.sigma_db).map(|_| ()),
            ChannelModelSpec::UmaLos(None) => Err(PropagationError::MissingUmaCoefficients),
            _ => Ok(()),
        }
    }

    /// Shadow-fading std-dev the caller should draw from, if any.
    pub fn shadow_sigma_db(&self) -> f64 {
        match self {
            ChannelModelSpec::Ci(p) => p.sigma_db,
            _ => 0.0,
        }
    }

    /// Mean path loss plus the caller-supplied shadowing term (only the CI model uses it).
    pub fn path_loss(&self, f: FrequencyHz, d: f64, shadow_db: f64) -> Result<PathLossDb, PropagationError> {
        match self {
            ChannelModelSpec::FriisOmni => friis_db(f, d),
            ChannelModelSpec::FriisDirectional { gt_dbi, gr_dbi } => friis_directional_db(f, d, *gt_dbi, *gr_dbi),
            ChannelModelSpec::RmaLos { h_m } => rma_los_db(f, d, *h_m),
            ChannelModelSpec::Ci(p) => ci_db(f, d, p, shadow_db),
            ChannelModelSpec::UmaLos(coeffs) => uma_los_db(f, d, coeffs.as_ref()),
        }
    }
}

fn check_distance(d: f64) -> Result<(), PropagationError> {
    if d.is_finite() && d >= MIN_DISTANCE_M {
        Ok(())
    } else {
        Err(PropagationError::TooClose(d))
    }
}

/// Free-space loss: `20·log10(f) + 20·log10(d) − 20·log10(c/4π)`.
pub fn friis_db(f: FrequencyHz, d: f64) -> Result<PathLossDb, PropagationError> {
    check_distance(d)?;
    Ok(PathLossDb(
        20.0 * f.hz().log10() + 20.0 * d.log10() - friis_constant_db(),
    ))
}

/// Free-space loss reduced by transmit and receive antenna gains.
pub fn friis_directional_db(f: FrequencyHz, d: f64, gt_dbi: f64, gr_dbi: f64) -> Result<PathLossDb, PropagationError> {
    Ok(PathLossDb(friis_db(f, d)?.db() - gt_dbi - gr_dbi))
}

/// Rural macro-cell line-of-sight loss. `h` is the height parameter in meters.
pub fn rma_los_db(fc: FrequencyHz, d: f64, h: f64) -> Result<PathLossDb, PropagationError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(PropagationError::BadHeight(h));
    }
    check_distance(d)?;
    let fc_ghz = fc.as_ghz();
    let h_pow = h.powf(1.72);
    let pl = 20.0 * (40.0 * PI * d * fc_ghz / 3.0).log10() + (0.03 * h_pow).min(10.0) * d.log10()
        - (0.044 * h_pow).min(14.77)
        + 0.002 * h.log10() * d;
    Ok(PathLossDb(pl))
}

/// Free-space loss at the 1 m reference distance.
pub fn fspl_1m_db(f: FrequencyHz) -> PathLossDb {
    PathLossDb(20.0 * (4.0 * PI * f.hz() / SPEED_OF_LIGHT).log10())
}

/// Close-in model: `FSPL(f, 1 m) + 10·n·log10(d) + shadow`.
pub fn ci_db(f: FrequencyHz, d: f64, p: &CiParams, shadow_db: f64) -> Result<PathLossDb, PropagationError> {
    check_distance(d)?;
    Ok(PathLossDb(fspl_1m_db(f).db() + 10.0 * p.ple_n * d.log10() + shadow_db))
}

pub fn uma_los_db(fc: FrequencyHz, d: f64, coeffs: Option<&UmaCoefficients>) -> Result<PathLossDb, PropagationError> {
    let c = coeffs.ok_or(PropagationError::MissingUmaCoefficients)?;
    check_distance(d)?;
    Ok(PathLossDb(c.a + c.b * d.log10() + c.e * fc.as_ghz().log10()))
}

/// Received power in dBm.
pub fn rx_power_dbm(tx_dbm: f64, pl: PathLossDb, extra_gain_dbi: f64) -> f64 {
    tx_dbm - pl.db() + extra_gain_dbi
}
