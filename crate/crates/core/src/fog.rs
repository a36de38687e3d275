//! The fog node: batching, per-batch analysis, local persistence, alerting
//! and the offline/online mode switch.
//!
//! Every produced batch is appended to the local store, whatever the mode.
//! In online mode stored batches are also queued for the cloud until
//! acknowledged.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{analyze, AnalysisConfig};
use crate::delineation::VerdictReport;
use crate::hrv::{HrvMeasures, VitalReason, VitalStatus};
use crate::signal::{EcgSample, SampleStream, SignalError};

#[derive(Debug, Error)]
pub enum FogError {
    #[error("sequence gap: expected counter {expected}, got {actual}")]
    SequenceGap { expected: u64, actual: u64 },
    #[error("invalid fog config: {0}")]
    InvalidConfig(String),
    #[error("batch {0} is malformed: {1}")]
    MalformedBatch(u64, String),
    #[error("local store: {0}")]
    Io(#[from] std::io::Error),
    #[error("local store line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Offline,
    Online,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FogConfig {
    pub batch_size: usize,
    pub fs_hz: f64,
    /// Serial link rate between acquisition board and fog node; recorded only.
    pub serial_baud_bps: u32,
    pub initial_mode: Mode,
}

impl Default for FogConfig {
    fn default() -> Self {
        Self { batch_size: 1500, fs_hz: 200.0, serial_baud_bps: 115_200, initial_mode: Mode::Offline }
    }
}

impl FogConfig {
    pub fn validate(&self) -> Result<(), FogError> {
        if self.batch_size < 2 {
            return Err(FogError::InvalidConfig("batch_size must be >= 2".into()));
        }
        if !(self.fs_hz > 0.0) || !self.fs_hz.is_finite() {
            return Err(FogError::InvalidConfig("fs_hz must be > 0".into()));
        }
        Ok(())
    }

    /// Signal time covered by one batch (7.5 s at the defaults).
    pub fn nominal_send_period_s(&self) -> f64 {
        self.batch_size as f64 / self.fs_hz
    }
}

/// A full batch of samples as three parallel lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub batch_id: u64,
    pub counters: Vec<u64>,
    pub timestamps: Vec<u64>,
    pub samples: Vec<u16>,
}

impl BatchRecord {
    pub fn from_samples(batch_id: u64, samples: &[EcgSample]) -> Self {
        Self {
            batch_id,
            counters: samples.iter().map(|s| s.counter).collect(),
            timestamps: samples.iter().map(|s| s.timestamp_ms).collect(),
            samples: samples.iter().map(|s| s.value).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_samples(&self) -> Result<Vec<EcgSample>, FogError> {
        if self.counters.len() != self.samples.len() || self.timestamps.len() != self.samples.len() {
            return Err(FogError::MalformedBatch(self.batch_id, "list lengths differ".into()));
        }
        Ok(self
            .counters
            .iter()
            .zip(&self.timestamps)
            .zip(&self.samples)
            .map(|((&counter, &timestamp_ms), &value)| EcgSample { counter, timestamp_ms, value })
            .collect())
    }

    pub fn to_stream(&self, fs_hz: f64) -> Result<SampleStream, FogError> {
        SampleStream::new(fs_hz, self.to_samples()?).map_err(|e: SignalError| FogError::MalformedBatch(self.batch_id, e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    /// HRV measures and interval verdict available.
    Analyzed,
    /// HRV measures available, intervals could not be summarized.
    HrvOnly,
    /// No plausible peaks; samples are stored and forwarded regardless.
    Unanalyzable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessedBatch {
    #[serde(flatten)]
    pub record: BatchRecord,
    pub hrv: Option<HrvMeasures>,
    pub verdict: Option<VerdictReport>,
    pub vital: Option<VitalStatus>,
    pub quality: Quality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality_note: Option<String>,
    pub produced_at_ms: f64,
}

impl ProcessedBatch {
    pub fn batch_id(&self) -> u64 {
        self.record.batch_id
    }
}

/// Append-only log of processed batches, optionally mirrored to JSON lines.
#[derive(Debug, Default)]
pub struct LocalStore {
    batches: Vec<ProcessedBatch>,
    sink: Option<BufWriter<File>>,
}

impl LocalStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_jsonl(path: impl AsRef<Path>) -> Result<Self, FogError> {
        Ok(Self { batches: Vec::new(), sink: Some(BufWriter::new(File::create(path)?)) })
    }

    pub fn append(&mut self, batch: ProcessedBatch) -> Result<&ProcessedBatch, FogError> {
        if let Some(w) = self.sink.as_mut() {
            serde_json::to_writer(&mut *w, &batch).map_err(|e| FogError::Json { line: self.batches.len() + 1, source: e })?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        self.batches.push(batch);
        Ok(self.batches.last().expect("just pushed"))
    }

    pub fn batches(&self) -> &[ProcessedBatch] {
        &self.batches
    }

    pub fn get(&self, batch_id: u64) -> Option<&ProcessedBatch> {
        self.batches.iter().find(|b| b.batch_id() == batch_id)
    }

    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<(), FogError> {
        let mut w = BufWriter::new(File::create(path)?);
        for (i, b) in self.batches.iter().enumerate() {
            serde_json::to_writer(&mut w, b).map_err(|e| FogError::Json { line: i + 1, source: e })?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<ProcessedBatch>, FogError> {
        let reader = BufReader::new(File::open(path)?);
        let mut out = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| FogError::Json { line: i + 1, source: e })?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PendingEntry {
    batch_id: u64,
    sent: bool,
}

#[derive(Debug)]
pub struct FogState {
    pub mode: Mode,
    pending: VecDeque<PendingEntry>,
    pub local_store: LocalStore,
}

/// Pure mode transition. Returns the new mode and whether a flush of the
/// pending queue is requested.
pub fn transition(mode: Mode, vital: &VitalStatus) -> (Mode, bool) {
    match (mode, vital.is_abnormal()) {
        (Mode::Offline, true) => (Mode::Online, true),
        (m, _) => (m, false),
    }
}

impl FogState {
    pub fn new(mode: Mode, local_store: LocalStore) -> Self {
        Self { mode, pending: VecDeque::new(), local_store }
    }

    /// Applies the vital status; returns true when the node just went online.
    pub fn transition(&mut self, vital: &VitalStatus) -> bool {
        let (mode, flush) = transition(self.mode, vital);
        self.mode = mode;
        flush
    }

    /// Manual return to offline mode. Pending batches stay queued.
    pub fn go_offline(&mut self) {
        self.mode = Mode::Offline;
    }

    pub fn go_online(&mut self) {
        self.mode = Mode::Online;
    }

    pub fn pending_ids(&self) -> Vec<u64> {
        self.pending.iter().map(|p| p.batch_id).collect()
    }

    /// Pending batches not yet handed to the link. Empty while offline.
    pub fn take_unsent(&mut self) -> Vec<ProcessedBatch> {
        if self.mode == Mode::Offline {
            return Vec::new();
        }
        let mut out = Vec::new();
        for entry in self.pending.iter_mut().filter(|p| !p.sent) {
            if let Some(b) = self.local_store.get(entry.batch_id) {
                entry.sent = true;
                out.push(b.clone());
            }
        }
        out
    }

    /// Marks a batch as delivered. Returns false if it was not pending.
    pub fn acknowledge(&mut self, batch_id: u64) -> bool {
        match self.pending.iter().position(|p| p.batch_id == batch_id) {
            Some(i) => {
                self.pending.remove(i);
                true
            }
            None => false,
        }
    }

    /// Returns an in-flight batch to the unsent set, e.g. after back-pressure.
    pub fn requeue(&mut self, batch_id: u64) {
        if let Some(p) = self.pending.iter_mut().find(|p| p.batch_id == batch_id) {
            p.sent = false;
        }
    }
}

pub struct FogNode {
    cfg: FogConfig,
    analysis: AnalysisConfig,
    state: FogState,
    open: Vec<EcgSample>,
    expected_counter: u64,
    next_batch_id: u64,
}

impl FogNode {
    pub fn new(cfg: FogConfig, analysis: AnalysisConfig, store: LocalStore) -> Result<Self, FogError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            analysis,
            state: FogState::new(cfg.initial_mode, store),
            open: Vec::with_capacity(cfg.batch_size),
            expected_counter: 0,
            next_batch_id: 0,
        })
    }

    pub fn config(&self) -> &FogConfig {
        &self.cfg
    }

    pub fn state(&self) -> &FogState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut FogState {
        &mut self.state
    }

    pub fn open_len(&self) -> usize {
        self.open.len()
    }

    /// Adds one sample to the open batch; returns the batch once full.
    pub fn ingest(&mut self, sample: EcgSample) -> Result<Option<BatchRecord>, FogError> {
        if sample.counter != self.expected_counter {
            return Err(FogError::SequenceGap { expected: self.expected_counter, actual: sample.counter });
        }
        self.expected_counter += 1;
        self.open.push(sample);
        if self.open.len() < self.cfg.batch_size {
            return Ok(None);
        }
        let record = BatchRecord::from_samples(self.next_batch_id, &self.open);
        self.next_batch_id += 1;
        self.open.clear();
        Ok(Some(record))
    }

    /// Restarts the sequence at `counter`, discarding the partial batch.
    /// Returns the number of discarded samples.
    pub fn restart_sequence(&mut self, counter: u64) -> usize {
        let dropped = self.open.len();
        self.open.clear();
        self.expected_counter = counter;
        dropped
    }

    /// Analyses a batch, appends it to the local store and queues it for the cloud.
    pub fn process_batch(&mut self, record: BatchRecord, now_ms: f64) -> Result<&ProcessedBatch, FogError> {
        let stream = record.to_stream(self.cfg.fs_hz)?;
        let (hrv, verdict, vital, quality, quality_note) = match analyze(&stream, &self.analysis, 1) {
            Ok(a) => {
                let quality = if a.verdict.is_some() { Quality::Analyzed } else { Quality::HrvOnly };
                let note = a.interval_error.map(|e| e.to_string());
                (Some(a.hrv), a.verdict, Some(a.vital), quality, note)
            }
            Err(e) => (None, None, None, Quality::Unanalyzable, Some(e.to_string())),
        };
        let batch = ProcessedBatch { record, hrv, verdict, vital, quality, quality_note, produced_at_ms: now_ms };
        self.state.pending.push_back(PendingEntry { batch_id: batch.batch_id(), sent: false });
        self.state.local_store.append(batch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SinkKind {
    Log,
    WebhookStub,
    SmsStub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub batch_id: u64,
    pub reasons: Vec<VitalReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertRecord {
    pub batch_id: u64,
    pub reasons: Vec<VitalReason>,
    pub sink: SinkKind,
    pub delivered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub trait AlertSink {
    fn kind(&self) -> SinkKind;
    fn deliver(&mut self, alert: &Alert) -> Result<(), String>;
}

/// In-memory sink standing in for the log, webhook and SMS channels.
#[derive(Debug, Clone)]
pub struct StubSink {
    kind: SinkKind,
    failing: bool,
    pub delivered: Vec<Alert>,
}

impl StubSink {
    pub fn new(kind: SinkKind) -> Self {
        Self { kind, failing: false, delivered: Vec::new() }
    }

    pub fn failing(kind: SinkKind) -> Self {
        Self { kind, failing: true, delivered: Vec::new() }
    }
}

impl AlertSink for StubSink {
    fn kind(&self) -> SinkKind {
        self.kind
    }

    fn deliver(&mut self, alert: &Alert) -> Result<(), String> {
        if self.failing {
            return Err(format!("{:?} sink unavailable", self.kind));
        }
        self.delivered.push(alert.clone());
        Ok(())
    }
}

/// Sends one alert per sink for an abnormal status. Sink failures are
/// recorded, never propagated.
pub fn dispatch_alerts(vital: &VitalStatus, batch_id: u64, sinks: &mut [Box<dyn AlertSink>]) -> Vec<AlertRecord> {
    if !vital.is_abnormal() {
        return Vec::new();
    }
    let alert = Alert { batch_id, reasons: vital.reasons.clone() };
    sinks
        .iter_mut()
        .map(|sink| {
            let result = sink.deliver(&alert);
            AlertRecord {
                batch_id,
                reasons: alert.reasons.clone(),
                sink: sink.kind(),
                delivered: result.is_ok(),
                error: result.err(),
            }
        })
        .collect()
}
