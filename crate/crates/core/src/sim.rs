//! Deterministic end-to-end run: source stream, fog node, link, cloud store.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::AnalysisConfig;
use crate::fog::{dispatch_alerts, AlertRecord, AlertSink, FogConfig, FogError, FogNode, LocalStore, Mode, ProcessedBatch, SinkKind, StubSink};
use crate::netsim::{bandwidth, BandwidthReport, CloudStore, Delivery, Link, LinkModel, NetsimError, PacketTrace};
use crate::signal::{EcgSample, SampleStream};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Fog(#[from] FogError),
    #[error(transparent)]
    Netsim(#[from] NetsimError),
    #[error("source sample rate {source_hz} Hz differs from fog rate {fog_hz} Hz")]
    RateMismatch { source_hz: f64, fog_hz: f64 },
}

/// Simulation time, advanced only by events.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VirtualClock {
    now_ms: f64,
}

impl VirtualClock {
    pub fn now_ms(&self) -> f64 {
        self.now_ms
    }

    /// Moves forward to `t_ms`; earlier times leave the clock unchanged.
    pub fn advance_to(&mut self, t_ms: f64) {
        if t_ms > self.now_ms {
            self.now_ms = t_ms;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub fog: FogConfig,
    pub analysis: AnalysisConfig,
    pub link: LinkModel,
    pub sinks: Vec<SinkKind>,
    /// Sinks that reject every alert, for exercising failure isolation.
    pub failing_sinks: Vec<SinkKind>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            fog: FogConfig { initial_mode: Mode::Online, ..Default::default() },
            analysis: AnalysisConfig::default(),
            link: LinkModel::default(),
            sinks: vec![SinkKind::Log, SinkKind::WebhookStub, SinkKind::SmsStub],
            failing_sinks: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub source_samples: u64,
    /// Source samples that fill whole batches.
    pub batched_samples: u64,
    pub unbatched_tail_samples: u64,
    pub expected_batches: u64,
    pub sent_batches: u64,
    pub delivered_batches: u64,
    pub duplicate_deliveries: u64,
    pub reassembled_samples: u64,
    pub missing_samples: u64,
    pub reordered_samples: u64,
    pub mismatched_samples: u64,
    /// Deliveries that arrived before a batch sent earlier.
    pub arrival_inversions: u64,
    pub identical: bool,
}

#[derive(Debug)]
pub struct SimulationOutcome {
    pub trace: PacketTrace,
    pub cloud: CloudStore,
    pub alerts: Vec<AlertRecord>,
    pub bandwidth: Option<BandwidthReport>,
    pub diff: DiffReport,
    /// Cloud batches concatenated in key order.
    pub reassembled: Vec<EcgSample>,
    pub local_store_len: usize,
    pub sequence_restarts: u64,
    pub final_mode: Mode,
    pub end_ms: f64,
}

enum EventKind {
    Deliver(Box<Delivery>),
    Flush,
}

struct Event {
    t_ms: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed so the max-heap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other.t_ms.total_cmp(&self.t_ms).then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Runner {
    node: FogNode,
    link: Link,
    sinks: Vec<Box<dyn AlertSink>>,
    events: BinaryHeap<Event>,
    seq: u64,
    clock: VirtualClock,
    trace: PacketTrace,
    cloud: CloudStore,
    alerts: Vec<AlertRecord>,
    arrivals: Vec<u64>,
}

impl Runner {
    fn push(&mut self, t_ms: f64, kind: EventKind) {
        self.seq += 1;
        self.events.push(Event { t_ms, seq: self.seq, kind });
    }

    fn flush(&mut self, now_ms: f64) -> Result<(), SimError> {
        let mut retry_at: Option<f64> = None;
        for batch in self.node.state_mut().take_unsent() {
            let id = batch.batch_id();
            match self.link.transmit(batch, now_ms) {
                Ok(d) => {
                    self.trace.record_send(id, d.send_t_ms, d.size_bytes);
                    self.push(d.recv_t_ms, EventKind::Deliver(Box::new(d)));
                }
                Err(NetsimError::BufferFull { retry_at_ms }) => {
                    self.node.state_mut().requeue(id);
                    retry_at = Some(retry_at_ms);
                }
                Err(e) => return Err(e.into()),
            }
        }
        if let Some(t) = retry_at {
            self.push(t, EventKind::Flush);
        }
        Ok(())
    }

    fn run_until(&mut self, t_ms: f64) -> Result<(), SimError> {
        while self.events.peek().is_some_and(|e| e.t_ms <= t_ms) {
            let ev = self.events.pop().expect("peeked");
            self.clock.advance_to(ev.t_ms);
            match ev.kind {
                EventKind::Deliver(d) => {
                    let id = d.batch.batch_id();
                    self.trace.record_delivery(id, d.recv_t_ms);
                    self.node.state_mut().acknowledge(id);
                    self.arrivals.push(id);
                    self.cloud.store(d.batch);
                }
                EventKind::Flush => self.flush(ev.t_ms)?,
            }
        }
        self.clock.advance_to(t_ms);
        Ok(())
    }

    fn on_batch(&mut self, batch: &ProcessedBatch) -> Result<(), SimError> {
        if let Some(vital) = &batch.vital {
            self.alerts.extend(dispatch_alerts(vital, batch.batch_id(), &mut self.sinks));
            self.node.state_mut().transition(vital);
        }
        self.flush(self.clock.now_ms())
    }
}

/// Feeds `source` through the fog node and link on a virtual clock, then
/// drains every outstanding delivery.
pub fn simulate(source: &SampleStream, cfg: &SimulationConfig) -> Result<SimulationOutcome, SimError> {
    if (source.fs_hz() - cfg.fog.fs_hz).abs() > 1e-9 {
        return Err(SimError::RateMismatch { source_hz: source.fs_hz(), fog_hz: cfg.fog.fs_hz });
    }
    let sinks: Vec<Box<dyn AlertSink>> = cfg
        .sinks
        .iter()
        .map(|&k| -> Box<dyn AlertSink> {
            if cfg.failing_sinks.contains(&k) {
                Box::new(StubSink::failing(k))
            } else {
                Box::new(StubSink::new(k))
            }
        })
        .collect();
    let mut r = Runner {
        node: FogNode::new(cfg.fog, cfg.analysis.clone(), LocalStore::in_memory())?,
        link: Link::new(cfg.link.clone())?,
        sinks,
        events: BinaryHeap::new(),
        seq: 0,
        clock: VirtualClock::default(),
        trace: PacketTrace::default(),
        cloud: CloudStore::new(),
        alerts: Vec::new(),
        arrivals: Vec::new(),
    };
    let mut sequence_restarts = 0;
    for s in source.samples() {
        r.run_until(s.timestamp_ms as f64)?;
        let emitted = match r.node.ingest(*s) {
            Err(FogError::SequenceGap { actual, .. }) => {
                sequence_restarts += 1;
                r.node.restart_sequence(actual);
                r.node.ingest(*s)?
            }
            other => other?,
        };
        if let Some(record) = emitted {
            let batch = r.node.process_batch(record, r.clock.now_ms())?.clone();
            r.on_batch(&batch)?;
        }
    }
    r.run_until(f64::INFINITY)?;
    let end_ms = r
        .trace
        .entries
        .iter()
        .filter_map(|e| e.recv_t_ms)
        .fold(source.samples().last().map_or(0.0, |s| s.timestamp_ms as f64), f64::max);

    let batch_size = cfg.fog.batch_size as u64;
    let reassembled: Vec<EcgSample> = r.cloud.batches().flat_map(|b| b.record.to_samples().unwrap_or_default()).collect();
    let diff = diff_report(source.samples(), &reassembled, batch_size, &r.trace, &r.cloud, &r.arrivals);
    let bandwidth = bandwidth(&r.trace, None).ok();
    Ok(SimulationOutcome {
        bandwidth,
        diff,
        reassembled,
        local_store_len: r.node.state().local_store.len(),
        sequence_restarts,
        final_mode: r.node.state().mode,
        end_ms,
        trace: r.trace,
        cloud: r.cloud,
        alerts: r.alerts,
    })
}

fn diff_report(
    source: &[EcgSample],
    reassembled: &[EcgSample],
    batch_size: u64,
    trace: &PacketTrace,
    cloud: &CloudStore,
    arrivals: &[u64],
) -> DiffReport {
    let source_samples = source.len() as u64;
    let expected_batches = source_samples / batch_size;
    let batched_samples = expected_batches * batch_size;
    let batched = &source[..batched_samples as usize];

    let by_counter: BTreeMap<u64, &EcgSample> = reassembled.iter().map(|s| (s.counter, s)).collect();
    let mut missing = 0;
    let mut mismatched = 0;
    for s in batched {
        match by_counter.get(&s.counter) {
            None => missing += 1,
            Some(r) if *r != s => mismatched += 1,
            Some(_) => {}
        }
    }
    let reordered = reassembled.windows(2).filter(|w| w[1].counter <= w[0].counter).count() as u64;
    let arrival_inversions = arrivals.windows(2).filter(|w| w[1] < w[0]).count() as u64;
    let identical = reassembled == batched;
    DiffReport {
        source_samples,
        batched_samples,
        unbatched_tail_samples: source_samples - batched_samples,
        expected_batches,
        sent_batches: trace.sent_count() as u64,
        delivered_batches: cloud.len() as u64,
        duplicate_deliveries: cloud.duplicates().len() as u64,
        reassembled_samples: reassembled.len() as u64,
        missing_samples: missing,
        reordered_samples: reordered,
        mismatched_samples: mismatched,
        arrival_inversions,
        identical,
    }
}
