//! Browser bindings for the fog ECG pipeline.
//!
//! Each exported function takes a JSON request and returns a JSON response,
//! so the page needs no generated type bindings.

use fogecg_core::analysis::{analyze, AnalysisConfig};
use fogecg_core::delineation::{BeatMeasurement, VerdictReport};
use fogecg_core::hrv::{moving_average, threshold_sweep, HrvMeasures, PeakDetectionConfig, SweepCandidate, VitalStatus};
use fogecg_core::netsim::{BandwidthReport, DisconnectWindow, LinkModel, TraceEntry};
use fogecg_core::signal::{synthesize, AdcConfig, EcgSynthParams};
use fogecg_core::sim::{simulate, DiffReport, SimulationConfig};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct AnalyzeResponse {
    fs_hz: f64,
    values: Vec<u16>,
    peaks: Vec<usize>,
    rejected: Vec<usize>,
    hrv: HrvMeasures,
    vital: VitalStatus,
    beats: Vec<BeatMeasurement>,
    verdict: Option<VerdictReport>,
    note: Option<String>,
}

#[derive(Serialize)]
struct SweepResponse {
    fs_hz: f64,
    values: Vec<u16>,
    moving_average: Vec<f64>,
    candidates: Vec<SweepCandidate>,
    chosen_threshold_pct: Option<f64>,
}

#[derive(Deserialize)]
#[serde(default)]
struct LinkRequest {
    duration_s: f64,
    base_latency_ms: f64,
    jitter_ms: f64,
    /// Outages in seconds.
    disconnects: Vec<(f64, f64)>,
    seed: u64,
}

impl Default for LinkRequest {
    fn default() -> Self {
        let link = LinkModel::default();
        Self { duration_s: 120.0, base_latency_ms: link.base_latency_ms, jitter_ms: link.jitter_ms, disconnects: Vec::new(), seed: 0 }
    }
}

#[derive(Serialize)]
struct LinkResponse {
    trace: Vec<TraceEntry>,
    diff: DiffReport,
    bandwidth: Option<BandwidthReport>,
    outages_ms: Vec<DisconnectWindow>,
}

fn parse<T: for<'de> Deserialize<'de>>(json: &str) -> Result<T, String> {
    serde_json::from_str(json).map_err(|e| format!("bad request: {e}"))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Synthesizes an ECG from `EcgSynthParams` JSON and runs the full analysis.
pub fn analyze_synthetic_json(request: &str) -> Result<String, String> {
    let params: EcgSynthParams = parse(request)?;
    let ecg = synthesize(&params, &AdcConfig::default()).map_err(|e| e.to_string())?;
    let a = analyze(&ecg.stream, &AnalysisConfig::default(), 4).map_err(|e| e.to_string())?;
    to_json(&AnalyzeResponse {
        fs_hz: params.fs_hz,
        values: ecg.stream.samples().iter().map(|s| s.value).collect(),
        peaks: a.peaks.peak_indices,
        rejected: a.peaks.rejected_indices,
        hrv: a.hrv,
        vital: a.vital,
        beats: a.intervals.map(|b| b.beats).unwrap_or_default(),
        verdict: a.verdict,
        note: a.interval_error.map(|e| e.to_string()),
    })
}

/// Runs every threshold of the peak sweep on a synthetic ECG.
pub fn threshold_sweep_json(request: &str) -> Result<String, String> {
    let params: EcgSynthParams = parse(request)?;
    let ecg = synthesize(&params, &AdcConfig::default()).map_err(|e| e.to_string())?;
    let cfg = PeakDetectionConfig::default();
    let candidates = threshold_sweep(&ecg.stream, &cfg).map_err(|e| e.to_string())?;
    let chosen_threshold_pct = fogecg_core::hrv::detect_peaks(&ecg.stream, &cfg).ok().map(|p| p.chosen_threshold_pct);
    to_json(&SweepResponse {
        fs_hz: params.fs_hz,
        values: ecg.stream.samples().iter().map(|s| s.value).collect(),
        moving_average: moving_average(&ecg.stream.values(), cfg.window_samples(params.fs_hz)),
        candidates,
        chosen_threshold_pct,
    })
}

/// Pushes a synthetic recording through the fog node and an intermittent link.
pub fn simulate_link_json(request: &str) -> Result<String, String> {
    let req: LinkRequest = parse(request)?;
    let ecg = synthesize(&EcgSynthParams { duration_s: req.duration_s, ..Default::default() }, &AdcConfig::default())
        .map_err(|e| e.to_string())?;
    let link = LinkModel {
        base_latency_ms: req.base_latency_ms,
        jitter_ms: req.jitter_ms,
        disconnect_windows: req
            .disconnects
            .iter()
            .map(|&(a, b)| DisconnectWindow { start_ms: a * 1000.0, end_ms: b * 1000.0 })
            .collect(),
        seed: req.seed,
        max_buffered: None,
    };
    let outages_ms = link.disconnect_windows.clone();
    let out = simulate(&ecg.stream, &SimulationConfig { link, ..Default::default() }).map_err(|e| e.to_string())?;
    to_json(&LinkResponse { trace: out.trace.entries, diff: out.diff, bandwidth: out.bandwidth, outages_ms })
}

#[wasm_bindgen]
pub fn analyze_synthetic(request: &str) -> Result<String, JsError> {
    analyze_synthetic_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sweep_thresholds(request: &str) -> Result<String, JsError> {
    threshold_sweep_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate_link(request: &str) -> Result<String, JsError> {
    simulate_link_json(request).map_err(|e| JsError::new(&e))
}
