//! Experiment grids, output files and the path-loss table.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig};
use crate::metrics::{mean, write_records_csv, RunSummary};
use crate::propagation::{ChannelModelSpec, CiParams, FrequencyHz, PropagationError, UmaCoefficients, MIN_DISTANCE_M};
use crate::sim::{self, RunOutput, SimConfig, SimError};

/// Environment variable naming the output root (default `results`).
pub const OUTPUT_ENV: &str = "MANET_OUT";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run {cell}: {source}")]
    Run { cell: String, source: SimError },
    #[error("{0}")]
    Propagation(#[from] PropagationError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Stable file stem of one cell.
pub fn cell_key(c: &SimConfig) -> String {
    format!(
        "{}_{}_p{}_b{}_s{}",
        c.protocol.name(),
        c.channel_name,
        c.radio.tx_power_dbm,
        c.traffic.pkt_bytes,
        c.seed
    )
}

fn run_cell(c: &SimConfig) -> Result<RunOutput, ScenarioError> {
    sim::run(c.clone()).map_err(|source| ScenarioError::Run {
        cell: cell_key(c),
        source,
    })
}

/// Runs every cell, on the rayon pool when the `parallel` feature is enabled. Results
/// come back in cell order either way.
pub fn run_cells(cells: &[SimConfig]) -> Result<Vec<RunOutput>, ScenarioError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        cells.par_iter().map(run_cell).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_cells_sequential(cells)
    }
}

pub fn run_cells_sequential(cells: &[SimConfig]) -> Result<Vec<RunOutput>, ScenarioError> {
    cells.iter().map(run_cell).collect()
}

/// First 12 hex digits of the SHA-256 of the config document.
pub fn config_hash(text: &str) -> String {
    hex::encode(&Sha256::digest(text.as_bytes())[..6])
}

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const SUMMARY_HEADER: &str =
    "protocol,channel,tx_power_dbm,pkt_bytes,seed,avg_delivery_ratio,total_sent,total_received,total_tx_energy_mj";

pub fn summary_csv(summaries: &[RunSummary]) -> String {
    let mut out = String::new();
    writeln!(out, "{SUMMARY_HEADER}").expect("string write");
    for s in summaries {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.protocol,
            s.channel,
            s.tx_power_dbm,
            s.pkt_bytes,
            s.seed,
            opt(s.avg_delivery_ratio),
            s.total_sent,
            s.total_received,
            s.total_tx_energy_mj
        )
        .expect("string write");
    }
    out
}

/// One seed-averaged row per (protocol, channel, power, packet size).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub protocol: String,
    pub channel: String,
    pub tx_power_dbm: f64,
    pub pkt_bytes: u32,
    pub seeds: usize,
    /// Mean over seeds whose run average is defined.
    pub avg_delivery_ratio: Option<f64>,
    pub energy_per_delivered_mj: Option<f64>,
}

pub const SWEEP_HEADER: &str =
    "protocol,channel,tx_power_dbm,pkt_bytes,seeds,avg_delivery_ratio,energy_per_delivered_mj";

/// Groups consecutive summaries that differ only in seed.
pub fn seed_average(summaries: &[RunSummary]) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = Vec::new();
    let mut groups: Vec<Vec<&RunSummary>> = Vec::new();
    for s in summaries {
        match groups.last_mut() {
            Some(g)
                if g[0].protocol == s.protocol
                    && g[0].channel == s.channel
                    && g[0].tx_power_dbm == s.tx_power_dbm
                    && g[0].pkt_bytes == s.pkt_bytes =>
            {
                g.push(s)
            }
            _ => groups.push(vec![s]),
        }
    }
    for g in groups {
        let ratios: Vec<f64> = g.iter().filter_map(|s| s.avg_delivery_ratio).collect();
        let energy: f64 = g.iter().map(|s| s.total_tx_energy_mj).sum();
        let received: u64 = g.iter().map(|s| s.total_received).sum();
        rows.push(SweepRow {
            protocol: g[0].protocol.clone(),
            channel: g[0].channel.clone(),
            tx_power_dbm: g[0].tx_power_dbm,
            pkt_bytes: g[0].pkt_bytes,
            seeds: g.len(),
            avg_delivery_ratio: mean(&ratios),
            energy_per_delivered_mj: (received > 0).then(|| energy / received as f64),
        });
    }
    rows
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{SWEEP_HEADER}").expect("string write");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.protocol,
            r.channel,
            r.tx_power_dbm,
            r.pkt_bytes,
            r.seeds,
            opt(r.avg_delivery_ratio),
            opt(r.energy_per_delivered_mj)
        )
        .expect("string write");
    }
    out
}

/// Per-run CSV and JSON summary contents, keyed by file name.
pub fn run_files(cells: &[SimConfig], outputs: &[RunOutput]) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for (c, o) in cells.iter().zip(outputs) {
        let key = cell_key(c);
        let mut csv = Vec::new();
        write_records_csv(&mut csv, &c.labels(), &o.records).expect("in-memory write");
        files.push((format!("{key}.csv"), csv));
        let mut json = serde_json::to_vec_pretty(&o.summary).expect("summary serializes");
        json.push(b'\n');
        files.push((format!("{key}.json"), json));
    }
    files
}

/// Writes `files` into `<root>/<dir_name>` via a temporary sibling directory that is
/// renamed into place, replacing any previous output.
pub fn write_output_dir(root: &Path, dir_name: &str, files: &[(String, Vec<u8>)]) -> Result<PathBuf, ScenarioError> {
    fs::create_dir_all(root).map_err(io_err(root))?;
    let tmp = root.join(format!(".{dir_name}.tmp-{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(io_err(&tmp))?;
    }
    fs::create_dir_all(&tmp).map_err(io_err(&tmp))?;
    let result = (|| {
        for (name, bytes) in files {
            let path = tmp.join(name);
            fs::write(&path, bytes).map_err(io_err(&path))?;
        }
        let dest = root.join(dir_name);
        if dest.exists() {
            fs::remove_dir_all(&dest).map_err(io_err(&dest))?;
        }
        fs::rename(&tmp, &dest).map_err(io_err(&dest))?;
        Ok(dest)
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&tmp);
    }
    result
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into())
}

/// `run`: every grid cell, one CSV + JSON per cell plus `summary.csv`.
pub fn run_scenario(cfg_path: &Path, out_root: &Path) -> Result<PathBuf, ScenarioError> {
    let text = fs::read_to_string(cfg_path).map_err(io_err(cfg_path))?;
    let cfg = ScenarioConfig::parse(&text)?;
    let cells = cfg.cells();
    let outputs = run_cells(&cells)?;
    let mut files = run_files(&cells, &outputs);
    let summaries: Vec<RunSummary> = outputs.iter().map(|o| o.summary.clone()).collect();
    files.push(("summary.csv".into(), summary_csv(&summaries).into_bytes()));
    let dir = format!("{}-{}", stem_of(cfg_path), config_hash(&text));
    write_output_dir(out_root, &dir, &files)
}

/// `sweep`: the grid over the sweep powers, adding the seed-averaged `sweep.csv`.
pub fn sweep_scenario(cfg_path: &Path, out_root: &Path) -> Result<PathBuf, ScenarioError> {
    let text = fs::read_to_string(cfg_path).map_err(io_err(cfg_path))?;
    let cfg = ScenarioConfig::parse(&text)?;
    let cells = cfg.sweep_cells();
    let outputs = run_cells(&cells)?;
    let mut files = run_files(&cells, &outputs);
    let summaries: Vec<RunSummary> = outputs.iter().map(|o| o.summary.clone()).collect();
    files.push(("summary.csv".into(), summary_csv(&summaries).into_bytes()));
    files.push(("sweep.csv".into(), sweep_csv(&seed_average(&summaries)).into_bytes()));
    let dir = format!("{}-sweep-{}", stem_of(cfg_path), config_hash(&text));
    write_output_dir(out_root, &dir, &files)
}

/// Models selectable in the path-loss table. `uma` needs `uma` coefficients.
pub fn pathloss_model(name: &str, uma: Option<&UmaCoefficients>) -> Result<ChannelModelSpec, PropagationError> {
    Ok(match name {
        "friis" => ChannelModelSpec::FriisOmni,
        "friis_dir" => ChannelModelSpec::FriisDirectional {
            gt_dbi: 17.0,
            gr_dbi: 17.0,
        },
        "rma" => ChannelModelSpec::RmaLos { h_m: 5.0 },
        "ci" => ChannelModelSpec::Ci(CiParams::new(2.0, 0.0)?),
        "uma" => ChannelModelSpec::UmaLos(Some(*uma.ok_or(PropagationError::MissingUmaCoefficients)?)),
        other => return Err(PropagationError::UnknownModel(other.to_string())),
    })
}

pub const PATHLOSS_HEADER: &str = "model,freq_hz,d_m,pl_db";

/// Long-form table `model,freq_hz,d_m,pl_db`, models outermost, then frequency, then distance.
pub fn pathloss_table(
    freqs_hz: &[f64],
    dists_m: &[f64],
    models: &[String],
    uma: Option<&UmaCoefficients>,
) -> Result<String, PropagationError> {
    let mut out = String::new();
    writeln!(out, "{PATHLOSS_HEADER}").expect("string write");
    for name in models {
        let spec = pathloss_model(name, uma)?;
        for &f in freqs_hz {
            let freq = FrequencyHz::new(f)?;
            for &d in dists_m {
                if !(d >= MIN_DISTANCE_M) {
                    return Err(PropagationError::TooClose(d));
                }
                let pl = spec.path_loss(freq, d, 0.0)?;
                writeln!(out, "{name},{f},{d},{:.6}", pl.db()).expect("string write");
            }
        }
    }
    Ok(out)
}
