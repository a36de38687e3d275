//! Intermittent fog-to-cloud link, ordered cloud store, reassembly and
//! bandwidth accounting.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fog::{FogError, ProcessedBatch};
use crate::signal::{SampleStream, SignalError};

#[derive(Debug, Error)]
pub enum NetsimError {
    #[error("invalid link model: {0}")]
    InvalidLink(String),
    #[error("link buffer full, retry at {retry_at_ms} ms")]
    BufferFull { retry_at_ms: f64 },
    #[error("incomplete batch range, missing {holes:?}")]
    IncompleteRange { holes: Vec<u64> },
    #[error("cloud store is empty")]
    EmptyStore,
    #[error("time span must be positive")]
    DegenerateSpan,
    #[error("reassembled stream is invalid: {0}")]
    Reassembly(String),
    #[error("trace line {line}: {message}")]
    Trace { line: usize, message: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Half-open interval `[start_ms, end_ms)` with no connectivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisconnectWindow {
    pub start_ms: f64,
    pub end_ms: f64,
}

impl DisconnectWindow {
    pub fn contains(&self, t_ms: f64) -> bool {
        self.start_ms <= t_ms && t_ms < self.end_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkModel {
    pub base_latency_ms: f64,
    /// Upper bound of the uniform extra latency.
    pub jitter_ms: f64,
    pub disconnect_windows: Vec<DisconnectWindow>,
    pub seed: u64,
    /// Packets that may wait for one outage before back-pressure. None = unbounded.
    pub max_buffered: Option<usize>,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self { base_latency_ms: 120.0, jitter_ms: 80.0, disconnect_windows: Vec::new(), seed: 0, max_buffered: None }
    }
}

impl LinkModel {
    pub fn validate(&self) -> Result<(), NetsimError> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.base_latency_ms) || !finite_nonneg(self.jitter_ms) {
            return Err(NetsimError::InvalidLink("latencies must be finite and >= 0".into()));
        }
        if self.max_buffered == Some(0) {
            return Err(NetsimError::InvalidLink("max_buffered must be >= 1".into()));
        }
        let mut prev_end = f64::NEG_INFINITY;
        for w in &self.disconnect_windows {
            if !(w.start_ms < w.end_ms) || !w.start_ms.is_finite() || !w.end_ms.is_finite() {
                return Err(NetsimError::InvalidLink(format!("window [{}, {}) is empty", w.start_ms, w.end_ms)));
            }
            if w.start_ms < prev_end {
                return Err(NetsimError::InvalidLink("windows must be sorted and non-overlapping".into()));
            }
            prev_end = w.end_ms;
        }
        Ok(())
    }

    pub fn window_at(&self, t_ms: f64) -> Option<&DisconnectWindow> {
        self.disconnect_windows.iter().find(|w| w.contains(t_ms))
    }
}

/// Draws `count` non-overlapping outages over `[0, horizon_ms)`, one per
/// equal slot, each between `min_len_ms` and `max_len_ms` long (clipped to its slot).
pub fn random_schedule(seed: u64, horizon_ms: f64, count: usize, min_len_ms: f64, max_len_ms: f64) -> Vec<DisconnectWindow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if count == 0 || horizon_ms <= 0.0 {
        return Vec::new();
    }
    let slot = horizon_ms / count as f64;
    (0..count)
        .map(|i| {
            let len = rng.gen_range(min_len_ms..=max_len_ms.max(min_len_ms)).min(slot * 0.9);
            let offset = rng.gen_range(0.0..=(slot - len));
            let start = i as f64 * slot + offset;
            DisconnectWindow { start_ms: start, end_ms: start + len }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub batch: ProcessedBatch,
    pub send_t_ms: f64,
    pub recv_t_ms: f64,
    pub size_bytes: u64,
    /// True when the packet waited for at least one outage.
    pub buffered: bool,
}

pub fn payload_size(batch: &ProcessedBatch) -> Result<u64, NetsimError> {
    Ok(serde_json::to_vec(batch)?.len() as u64)
}

pub struct Link {
    model: LinkModel,
    rng: ChaCha8Rng,
    // release times of packets currently parked behind an outage
    parked: Vec<f64>,
}

impl Link {
    pub fn new(model: LinkModel) -> Result<Self, NetsimError> {
        model.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(model.seed);
        Ok(Self { model, rng, parked: Vec::new() })
    }

    pub fn model(&self) -> &LinkModel {
        &self.model
    }

    fn latency(&mut self) -> f64 {
        let jitter = if self.model.jitter_ms > 0.0 { self.rng.gen_range(0.0..=self.model.jitter_ms) } else { 0.0 };
        self.model.base_latency_ms + jitter
    }

    /// Schedules one packet. Sends inside an outage leave at its end; packets
    /// whose arrival falls inside an outage are resent at its end.
    pub fn transmit(&mut self, batch: ProcessedBatch, send_t_ms: f64) -> Result<Delivery, NetsimError> {
        let size_bytes = payload_size(&batch)?;
        self.parked.retain(|&release| release > send_t_ms);
        let mut t = send_t_ms;
        let mut buffered = false;
        if let Some(w) = self.model.window_at(t).copied() {
            if let Some(limit) = self.model.max_buffered {
                if self.parked.len() >= limit {
                    return Err(NetsimError::BufferFull { retry_at_ms: w.end_ms });
                }
            }
            self.parked.push(w.end_ms);
            t = w.end_ms;
            buffered = true;
        }
        loop {
            let arrival = t + self.latency();
            match self.model.window_at(arrival) {
                Some(w) => {
                    t = w.end_ms;
                    buffered = true;
                }
                None => return Ok(Delivery { batch, send_t_ms, recv_t_ms: arrival, size_bytes, buffered }),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub batch_id: u64,
    pub send_t_ms: f64,
    pub recv_t_ms: Option<f64>,
    pub size_bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PacketTrace {
    pub entries: Vec<TraceEntry>,
}

impl PacketTrace {
    pub fn record_send(&mut self, batch_id: u64, send_t_ms: f64, size_bytes: u64) {
        self.entries.push(TraceEntry { batch_id, send_t_ms, recv_t_ms: None, size_bytes });
    }

    /// Marks the oldest undelivered entry for `batch_id`. Returns false if none is open.
    pub fn record_delivery(&mut self, batch_id: u64, recv_t_ms: f64) -> bool {
        match self.entries.iter_mut().find(|e| e.batch_id == batch_id && e.recv_t_ms.is_none()) {
            Some(e) => {
                e.recv_t_ms = Some(recv_t_ms);
                true
            }
            None => false,
        }
    }

    pub fn sent_count(&self) -> usize {
        self.entries.len()
    }

    pub fn delivered_count(&self) -> usize {
        self.entries.iter().filter(|e| e.recv_t_ms.is_some()).count()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), NetsimError> {
        let mut wtr = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| NetsimError::Trace { line: 0, message: e.to_string() };
        wtr.write_record(["batch_id", "send_t_ms", "recv_t_ms", "size_bytes"]).map_err(csv_err)?;
        for e in &self.entries {
            let recv = e.recv_t_ms.map(|t| format!("{t:.3}")).unwrap_or_default();
            wtr.write_record([e.batch_id.to_string(), format!("{:.3}", e.send_t_ms), recv, e.size_bytes.to_string()])
                .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, NetsimError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut entries = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let bad = |message: String| NetsimError::Trace { line, message };
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if rec.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", rec.len())));
            }
            let num = |k: usize| rec[k].trim().parse::<f64>().map_err(|e| bad(format!("field {}: {e}", k + 1)));
            let recv_t_ms = if rec[2].trim().is_empty() { None } else { Some(num(2)?) };
            entries.push(TraceEntry {
                batch_id: rec[0].trim().parse().map_err(|e| bad(format!("batch_id: {e}")))?,
                send_t_ms: num(1)?,
                recv_t_ms,
                size_bytes: rec[3].trim().parse().map_err(|e| bad(format!("size_bytes: {e}")))?,
            });
        }
        Ok(Self { entries })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreOutcome {
    Inserted,
    Duplicate,
}

/// Batches keyed by send label; iteration is in ascending key order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CloudStore {
    entries: BTreeMap<u64, ProcessedBatch>,
    duplicates: Vec<u64>,
}

impl CloudStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Last write wins on a repeated key, which is flagged.
    pub fn store(&mut self, batch: ProcessedBatch) -> StoreOutcome {
        let key = batch.batch_id();
        match self.entries.insert(key, batch) {
            None => StoreOutcome::Inserted,
            Some(_) => {
                self.duplicates.push(key);
                StoreOutcome::Duplicate
            }
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.keys().copied()
    }

    pub fn batches(&self) -> impl Iterator<Item = &ProcessedBatch> {
        self.entries.values()
    }

    pub fn get(&self, batch_id: u64) -> Option<&ProcessedBatch> {
        self.entries.get(&batch_id)
    }

    pub fn duplicates(&self) -> &[u64] {
        &self.duplicates
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn holes(&self, lo: u64, hi: u64) -> Vec<u64> {
        (lo..=hi).filter(|k| !self.entries.contains_key(k)).collect()
    }

    fn concat(&self, fs_hz: f64) -> Result<SampleStream, NetsimError> {
        let mut samples = Vec::new();
        for b in self.entries.values() {
            samples.extend(b.record.to_samples().map_err(|e: FogError| NetsimError::Reassembly(e.to_string()))?);
        }
        SampleStream::new(fs_hz, samples).map_err(|e: SignalError| NetsimError::Reassembly(e.to_string()))
    }

    /// Concatenates the stored batches; keys must form one contiguous range.
    pub fn reassemble(&self, fs_hz: f64) -> Result<SampleStream, NetsimError> {
        let (lo, hi) = match (self.entries.keys().next(), self.entries.keys().next_back()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => return Err(NetsimError::EmptyStore),
        };
        let holes = self.holes(lo, hi);
        if !holes.is_empty() {
            return Err(NetsimError::IncompleteRange { holes });
        }
        self.concat(fs_hz)
    }

    /// Like [`reassemble`](Self::reassemble) but requires exactly batches `0..count`.
    pub fn reassemble_expecting(&self, count: u64, fs_hz: f64) -> Result<SampleStream, NetsimError> {
        if count == 0 {
            return Err(NetsimError::EmptyStore);
        }
        let holes = self.holes(0, count - 1);
        if !holes.is_empty() {
            return Err(NetsimError::IncompleteRange { holes });
        }
        if self.entries.keys().any(|&k| k >= count) {
            return Err(NetsimError::Reassembly(format!("store holds batch ids beyond {}", count - 1)));
        }
        self.concat(fs_hz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub packet_count: u64,
    pub delivered_count: u64,
    pub span_s: f64,
    pub avg_size_bytes: f64,
    pub total_bytes: u64,
    pub bytes_per_s: f64,
    pub bits_per_s: f64,
    pub loss_pct: f64,
}

impl BandwidthReport {
    pub fn from_totals(packet_count: u64, delivered_count: u64, total_bytes: u64, span_s: f64) -> Result<Self, NetsimError> {
        if !(span_s > 0.0) || !span_s.is_finite() {
            return Err(NetsimError::DegenerateSpan);
        }
        let bytes_per_s = total_bytes as f64 / span_s;
        let avg_size_bytes = if packet_count == 0 { 0.0 } else { total_bytes as f64 / packet_count as f64 };
        let loss_pct = if packet_count == 0 {
            0.0
        } else {
            (packet_count - delivered_count.min(packet_count)) as f64 / packet_count as f64 * 100.0
        };
        Ok(Self {
            packet_count,
            delivered_count,
            span_s,
            avg_size_bytes,
            total_bytes,
            bytes_per_s,
            bits_per_s: bytes_per_s * 8.0,
            loss_pct,
        })
    }

    pub fn kilobytes_per_s(&self) -> f64 {
        self.bytes_per_s / 1000.0
    }
}

/// Throughput over the trace. The span is last receive minus first send
/// unless `span_override_s` is given.
pub fn bandwidth(trace: &PacketTrace, span_override_s: Option<f64>) -> Result<BandwidthReport, NetsimError> {
    let total: u64 = trace.entries.iter().map(|e| e.size_bytes).sum();
    let span_s = match span_override_s {
        Some(s) => s,
        None => {
            let first_send = trace.entries.iter().map(|e| e.send_t_ms).fold(f64::INFINITY, f64::min);
            let last_recv = trace.entries.iter().filter_map(|e| e.recv_t_ms).fold(f64::NEG_INFINITY, f64::max);
            (last_recv - first_send) / 1000.0
        }
    };
    BandwidthReport::from_totals(trace.sent_count() as u64, trace.delivered_count() as u64, total, span_s)
}
