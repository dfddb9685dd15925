//! Per-second delivery counters, run summaries and their file formats.
//!
//! The `received` column is bucketed by the second in which a packet reached its
//! destination. The `pdr` column attributes each delivery to the second the packet was
//! sent, so it is the fraction of that second's sends that eventually arrived and
//! stays within `[0, 1]`. Seconds without sends have an empty `pdr` field and are
//! excluded from averages.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;

/// Exact header of the per-second CSV.
pub const CSV_HEADER: &str = "time_s,protocol,channel,tx_power_dbm,sent,received,pdr";

/// Packet delivery ratio, undefined when nothing was sent.
pub fn pdr(sent: u64, received: u64) -> Option<f64> {
    (sent > 0).then(|| received as f64 / sent as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerSecondRecord {
    pub t: u64,
    pub sent: u64,
    pub received: u64,
    pub pdr: Option<f64>,
}

/// Labels identifying a run in output rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLabels {
    pub protocol: String,
    pub channel: String,
    pub tx_power_dbm: f64,
    pub pkt_bytes: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub protocol: String,
    pub channel: String,
    pub tx_power_dbm: f64,
    pub pkt_bytes: u32,
    pub seed: u64,
    pub avg_delivery_ratio: Option<f64>,
    pub total_sent: u64,
    pub total_received: u64,
    pub total_tx_energy_mj: f64,
}

impl RunSummary {
    pub fn energy_per_delivered_mj(&self) -> Option<f64> {
        (self.total_received > 0).then(|| self.total_tx_energy_mj / self.total_received as f64)
    }
}

/// Running counters owned by the simulation.
#[derive(Debug, Clone)]
pub struct MetricsCollector {
    sent: Vec<u64>,
    received: Vec<u64>,
    delivered_of_sent: Vec<u64>,
    delivered: BTreeSet<(u32, u32)>,
    duplicates: u64,
}

impl MetricsCollector {
    pub fn new(duration_s: f64) -> Self {
        let n = duration_s.ceil().max(0.0) as usize;
        MetricsCollector {
            sent: vec![0; n],
            received: vec![0; n],
            delivered_of_sent: vec![0; n],
            delivered: BTreeSet::new(),
            duplicates: 0,
        }
    }

    fn slot(&self, t: SimTime) -> Option<usize> {
        let s = t.whole_second() as usize;
        (s < self.sent.len()).then_some(s)
    }

    pub fn record_sent(&mut self, at: SimTime) {
        if let Some(s) = self.slot(at) {
            self.sent[s] += 1;
        }
    }

    /// Counts a delivery of `(flow, seq)` once. Returns false for duplicates.
    pub fn record_delivered(&mut self, flow: u32, seq: u32, sent_at: SimTime, at: SimTime) -> bool {
        if !self.delivered.insert((flow, seq)) {
            self.duplicates += 1;
            return false;
        }
        if let Some(s) = self.slot(at) {
            self.received[s] += 1;
        }
        if let Some(s) = self.slot(sent_at) {
            self.delivered_of_sent[s] += 1;
        }
        true
    }

    pub fn duplicates(&self) -> u64 {
        self.duplicates
    }

    pub fn records(&self) -> Vec<PerSecondRecord> {
        (0..self.sent.len())
            .map(|s| PerSecondRecord {
                t: s as u64,
                sent: self.sent[s],
                received: self.received[s],
                pdr: pdr(self.sent[s], self.delivered_of_sent[s]),
            })
            .collect()
    }

    pub fn finalize(
        &self,
        labels: &RunLabels,
        warmup_s: f64,
        total_tx_energy_mj: f64,
    ) -> (Vec<PerSecondRecord>, RunSummary) {
        let records = self.records();
        let summary = RunSummary {
            protocol: labels.protocol.clone(),
            channel: labels.channel.clone(),
            tx_power_dbm: labels.tx_power_dbm,
            pkt_bytes: labels.pkt_bytes,
            seed: labels.seed,
            avg_delivery_ratio: average_pdr(&records, warmup_s),
            total_sent: records.iter().map(|r| r.sent).sum(),
            total_received: records.iter().map(|r| r.received).sum(),
            total_tx_energy_mj,
        };
        (records, summary)
    }
}

fn window_pdrs(records: &[PerSecondRecord], warmup_s: f64) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.t as f64 >= warmup_s)
        .filter_map(|r| r.pdr)
        .collect()
}

/// Mean per-second PDR over seconds `t ≥ warmup_s` that had sends.
pub fn average_pdr(records: &[PerSecondRecord], warmup_s: f64) -> Option<f64> {
    mean(&window_pdrs(records, warmup_s))
}

/// Population standard deviation of per-second PDR over the measurement window.
pub fn pdr_std_dev(records: &[PerSecondRecord], warmup_s: f64) -> Option<f64> {
    std_dev(&window_pdrs(records, warmup_s))
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn std_dev(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    Some((xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt())
}

pub fn write_records_csv<W: Write>(
    out: &mut W,
    labels: &RunLabels,
    records: &[PerSecondRecord],
) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        let pdr = r.pdr.map(|p| p.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t, labels.protocol, labels.channel, labels.tx_power_dbm, r.sent, r.received, pdr
        )?;
    }
    Ok(())
}

/// Parses a per-second CSV back into records (used by tests and tooling).
pub fn read_records_csv(text: &str) -> Result<Vec<PerSecondRecord>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(CSV_HEADER) => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 7 {
                return Err(format!("row {}: expected 7 columns, got {}", i + 1, cols.len()));
            }
            let num = |c: &str| c.parse::<u64>().map_err(|e| format!("row {}: {e}", i + 1));
            Ok(PerSecondRecord {
                t: num(cols[0])?,
                sent: num(cols[4])?,
                received: num(cols[5])?,
                pdr: if cols[6].is_empty() {
                    None
                } else {
                    Some(cols[6].parse::<f64>().map_err(|e| format!("row {}: {e}", i + 1))?)
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> RunLabels {
        RunLabels {
            protocol: "aodv".into(),
            channel: "wifi".into(),
            tx_power_dbm: 7.5,
            pkt_bytes: 64,
            seed: 1,
        }
    }

    #[test]
    fn pdr_arithmetic() {
        assert_eq!(pdr(40, 30), Some(0.75));
        assert_eq!(pdr(5, 5), Some(1.0));
        assert_eq!(pdr(5, 0), Some(0.0));
        assert_eq!(pdr(0, 0), None);
    }

    #[test]
    fn zero_traffic_has_no_average() {
        let m = MetricsCollector::new(10.0);
        let (records, summary) = m.finalize(&labels(), 5.0, 0.0);
        assert_eq!(records.len(), 10);
        assert!(records.iter().all(|r| r.pdr.is_none()));
        assert_eq!(summary.avg_delivery_ratio, None);
        let json = serde_json::to_string(&summary).unwrap();
        assert!(json.contains("\"avg_delivery_ratio\":null"));
    }

    #[test]
    fn late_delivery_buckets_by_arrival() {
        let mut m = MetricsCollector::new(4.0);
        m.record_sent(SimTime::secs(1.9));
        assert!(m.record_delivered(0, 0, SimTime::secs(1.9), SimTime::secs(2.1)));
        assert!(!m.record_delivered(0, 0, SimTime::secs(1.9), SimTime::secs(2.2)));
        let r = m.records();
        assert_eq!((r[1].sent, r[1].received, r[1].pdr), (1, 0, Some(1.0)));
        assert_eq!((r[2].sent, r[2].received, r[2].pdr), (0, 1, None));
        assert_eq!(m.duplicates(), 1);
    }

    #[test]
    fn average_skips_warmup_and_empty_seconds() {
        let mut m = MetricsCollector::new(4.0);
        for t in [0.5, 2.5, 3.5] {
            m.record_sent(SimTime::secs(t));
        }
        m.record_delivered(0, 0, SimTime::secs(0.5), SimTime::secs(0.6));
        m.record_delivered(0, 2, SimTime::secs(3.5), SimTime::secs(3.6));
        let (_, s) = m.finalize(&labels(), 1.0, 0.0);
        assert_eq!(s.avg_delivery_ratio, Some(0.5));
    }

    #[test]
    fn csv_round_trip() {
        let mut m = MetricsCollector::new(3.0);
        m.record_sent(SimTime::secs(1.0));
        m.record_delivered(0, 0, SimTime::secs(1.0), SimTime::secs(1.5));
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &labels(), &m.records()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(text.lines().nth(2).unwrap(), "1,aodv,wifi,7.5,1,1,1");
        assert_eq!(read_records_csv(&text).unwrap(), m.records());
    }

    #[test]
    fn std_dev_of_constant_is_zero() {
        assert_eq!(std_dev(&[0.5, 0.5, 0.5]), Some(0.0));
        assert!((std_dev(&[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-12);
    }
}
