//! R-peak detection with a dynamic threshold sweep, time-domain HRV measures
//! and the vital-sign check that drives the offline to online switch.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::SampleStream;

#[derive(Debug, Error, PartialEq)]
pub enum HrvError {
    #[error("stream has {have} samples, detection needs at least {need}")]
    InsufficientData { have: usize, need: usize },
    #[error("no threshold in the sweep yields a plausible heart rate")]
    NoPlausiblePeaks,
    #[error("at least two accepted peaks are required, got {0}")]
    InsufficientBeats(usize),
    #[error("invalid peak detection config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakDetectionConfig {
    pub ma_window_s: f64,
    /// Percentages by which the moving average is raised, tried in order.
    pub threshold_sweep_pct: Vec<f64>,
    pub bpm_min: f64,
    pub bpm_max: f64,
    /// A peak arriving earlier than this fraction (percent) below the running
    /// mean RR is rejected as uncertain.
    pub outlier_rr_pct: f64,
}

impl Default for PeakDetectionConfig {
    fn default() -> Self {
        Self {
            ma_window_s: 0.75,
            threshold_sweep_pct: vec![
                5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0, 110.0, 120.0,
                150.0, 200.0,
            ],
            bpm_min: 40.0,
            bpm_max: 180.0,
            outlier_rr_pct: 30.0,
        }
    }
}

impl PeakDetectionConfig {
    pub fn validate(&self) -> Result<(), HrvError> {
        let bad = |m: &str| Err(HrvError::InvalidConfig(m.into()));
        if !(self.ma_window_s > 0.0) {
            return bad("ma_window_s must be > 0");
        }
        if self.threshold_sweep_pct.is_empty() {
            return bad("threshold sweep must not be empty");
        }
        if self.threshold_sweep_pct.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return bad("sweep percentages must be finite and >= 0");
        }
        if !(self.bpm_min > 0.0 && self.bpm_min < self.bpm_max) {
            return bad("need 0 < bpm_min < bpm_max");
        }
        if !(self.outlier_rr_pct >= 0.0) {
            return bad("outlier_rr_pct must be >= 0");
        }
        Ok(())
    }

    /// Moving-average window length in samples (odd, centred).
    pub fn window_samples(&self, fs_hz: f64) -> usize {
        let half = ((self.ma_window_s * fs_hz) / 2.0).floor() as usize;
        2 * half + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakList {
    pub peak_indices: Vec<usize>,
    /// Candidate peaks discarded as uncertain.
    pub rejected_indices: Vec<usize>,
    pub rr_ms: Vec<f64>,
    pub chosen_threshold_pct: f64,
}

impl PeakList {
    /// Builds a list from accepted indices alone.
    pub fn from_indices(peak_indices: Vec<usize>, fs_hz: f64) -> Self {
        let rr_ms = intervals_ms(&peak_indices, fs_hz);
        Self { peak_indices, rejected_indices: Vec::new(), rr_ms, chosen_threshold_pct: f64::NAN }
    }
}

/// Outcome of a single sweep entry, kept for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCandidate {
    pub threshold_pct: f64,
    pub accepted: Vec<usize>,
    pub rejected: Vec<usize>,
    pub bpm: Option<f64>,
    pub rrsd_ms: Option<f64>,
    pub plausible: bool,
}

/// Centred moving average; the window shrinks at the stream edges.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    moving_sums(values, window)
        .into_iter()
        .map(|(sum, n)| sum / n as f64)
        .collect()
}

fn moving_sums(values: &[f64], window: usize) -> Vec<(f64, usize)> {
    let half = window / 2;
    let n = values.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in values {
        acc += v;
        prefix.push(acc);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo], hi - lo)
        })
        .collect()
}

fn intervals_ms(indices: &[usize], fs_hz: f64) -> Vec<f64> {
    indices.windows(2).map(|w| (w[1] - w[0]) as f64 * 1000.0 / fs_hz).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Regions where the signal exceeds the raised moving average; returns the
/// argmax of each region.
fn candidate_peaks(values: &[f64], sums: &[(f64, usize)], raise_pct: f64) -> Vec<usize> {
    // v > (sum / n) * (1 + p/100)  <=>  v * n * 100 > sum * (100 + p);
    // exact in f64 for integer codes and integral percentages
    let factor = 100.0 + raise_pct;
    let mut peaks = Vec::new();
    let mut region: Option<usize> = None;
    for (i, (&v, &(sum, n))) in values.iter().zip(sums).enumerate() {
        let above = v * n as f64 * 100.0 > sum * factor;
        match (above, region) {
            (true, None) => region = Some(i),
            (true, Some(best)) if v > values[best] => region = Some(i),
            (false, Some(best)) => {
                peaks.push(best);
                region = None;
            }
            _ => {}
        }
    }
    if let Some(best) = region {
        peaks.push(best);
    }
    peaks
}

/// Splits candidates into accepted and uncertain peaks.
///
/// The running reference starts at the median candidate RR and tracks the
/// mean of in-band accepted RRs. A peak closer to the last accepted one than
/// `(1 - pct/100)` of the reference is rejected. Long gaps are kept but do
/// not update the reference.
fn reject_outliers(candidates: &[usize], fs_hz: f64, pct: f64) -> (Vec<usize>, Vec<usize>) {
    if candidates.len() < 3 {
        return (candidates.to_vec(), Vec::new());
    }
    let band = pct / 100.0;
    let mut reference = median(&intervals_ms(candidates, fs_hz));
    let (mut sum, mut count) = (0.0, 0usize);
    let mut accepted = vec![candidates[0]];
    let mut rejected = Vec::new();
    for &idx in &candidates[1..] {
        let last = *accepted.last().expect("seeded with first candidate");
        let rr = (idx - last) as f64 * 1000.0 / fs_hz;
        if rr < (1.0 - band) * reference {
            rejected.push(idx);
            continue;
        }
        accepted.push(idx);
        if rr <= (1.0 + band) * reference {
            sum += rr;
            count += 1;
            reference = sum / count as f64;
        }
    }
    (accepted, rejected)
}

/// Evaluates every sweep percentage without choosing a winner.
pub fn threshold_sweep(stream: &SampleStream, cfg: &PeakDetectionConfig) -> Result<Vec<SweepCandidate>, HrvError> {
    cfg.validate()?;
    let fs = stream.fs_hz();
    let window = cfg.window_samples(fs);
    let need = 2 * window;
    if stream.len() < need {
        return Err(HrvError::InsufficientData { have: stream.len(), need });
    }
    let values = stream.values();
    let sums = moving_sums(&values, window);
    Ok(cfg
        .threshold_sweep_pct
        .iter()
        .map(|&pct| {
            let candidates = candidate_peaks(&values, &sums, pct);
            let (accepted, rejected) = reject_outliers(&candidates, fs, cfg.outlier_rr_pct);
            let rr = intervals_ms(&accepted, fs);
            let (bpm, rrsd_ms) = if rr.is_empty() {
                (None, None)
            } else {
                (Some(60_000.0 / mean(&rr)), Some(population_std(&rr)))
            };
            let plausible = bpm.is_some_and(|b| b >= cfg.bpm_min && b <= cfg.bpm_max);
            SweepCandidate { threshold_pct: pct, accepted, rejected, bpm, rrsd_ms, plausible }
        })
        .collect())
}

/// Detects R peaks by sweeping raised moving-average thresholds.
///
/// The winning percentage has the smallest RR standard deviation among those
/// with a plausible heart rate. Ties go to the entry with fewer rejected peaks,
/// then to the earlier sweep entry.
pub fn detect_peaks(stream: &SampleStream, cfg: &PeakDetectionConfig) -> Result<PeakList, HrvError> {
    let sweep = threshold_sweep(stream, cfg)?;
    const TIE_MS: f64 = 1e-9;
    let best = sweep
        .into_iter()
        .filter(|c| c.plausible)
        .reduce(|best, c| {
            let (b, n) = (best.rrsd_ms.unwrap_or(f64::INFINITY), c.rrsd_ms.unwrap_or(f64::INFINITY));
            if n < b - TIE_MS || ((n - b).abs() <= TIE_MS && c.rejected.len() < best.rejected.len()) {
                c
            } else {
                best
            }
        })
        .ok_or(HrvError::NoPlausiblePeaks)?;
    let rr_ms = intervals_ms(&best.accepted, stream.fs_hz());
    Ok(PeakList {
        peak_indices: best.accepted,
        rejected_indices: best.rejected,
        rr_ms,
        chosen_threshold_pct: best.threshold_pct,
    })
}

/// The five per-batch HRV parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrvMeasures {
    pub bpm: f64,
    pub ibi_ms: f64,
    pub sdnn_ms: f64,
    pub rmssd_ms: f64,
    pub pnn50_pct: f64,
    /// Set when only one RR interval was available; rmssd and pnn50 are then 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub single_interval: bool,
}

impl HrvMeasures {
    pub fn from_rr(rr_ms: &[f64]) -> Result<Self, HrvError> {
        if rr_ms.is_empty() {
            return Err(HrvError::InsufficientBeats(rr_ms.len().min(1)));
        }
        let ibi_ms = mean(rr_ms);
        let sdnn_ms = population_std(rr_ms);
        let diffs: Vec<f64> = rr_ms.windows(2).map(|w| w[1] - w[0]).collect();
        let (rmssd_ms, pnn50_pct) = if diffs.is_empty() {
            (0.0, 0.0)
        } else {
            let rmssd = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
            let over = diffs.iter().filter(|d| d.abs() > 50.0).count();
            (rmssd, 100.0 * over as f64 / diffs.len() as f64)
        };
        Ok(Self {
            bpm: 60_000.0 / ibi_ms,
            ibi_ms,
            sdnn_ms,
            rmssd_ms,
            pnn50_pct,
            single_interval: diffs.is_empty(),
        })
    }

    pub fn value(&self, m: Measure) -> f64 {
        match m {
            Measure::Bpm => self.bpm,
            Measure::IbiMs => self.ibi_ms,
            Measure::SdnnMs => self.sdnn_ms,
            Measure::RmssdMs => self.rmssd_ms,
            Measure::Pnn50Pct => self.pnn50_pct,
        }
    }
}

pub fn compute_measures(peaks: &PeakList) -> Result<HrvMeasures, HrvError> {
    if peaks.peak_indices.len() < 2 || peaks.rr_ms.is_empty() {
        return Err(HrvError::InsufficientBeats(peaks.peak_indices.len()));
    }
    HrvMeasures::from_rr(&peaks.rr_ms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Bpm,
    IbiMs,
    SdnnMs,
    RmssdMs,
    Pnn50Pct,
}

impl Measure {
    pub const ALL: [Measure; 5] = [Measure::Bpm, Measure::IbiMs, Measure::SdnnMs, Measure::RmssdMs, Measure::Pnn50Pct];
}

/// Inclusive bounds; `None` leaves that side open.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl Bounds {
    pub const UNBOUNDED: Bounds = Bounds { lo: None, hi: None };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo: Some(lo), hi: Some(hi) }
    }

    pub fn check(&self, v: f64) -> Option<BoundViolation> {
        match (self.lo, self.hi) {
            (Some(lo), _) if v < lo => Some(BoundViolation::Below(lo)),
            (_, Some(hi)) if v > hi => Some(BoundViolation::Above(hi)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundViolation {
    Below(f64),
    Above(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VitalBounds {
    pub bpm: Bounds,
    pub ibi_ms: Bounds,
    pub sdnn_ms: Bounds,
    pub rmssd_ms: Bounds,
    pub pnn50_pct: Bounds,
}

impl Default for VitalBounds {
    fn default() -> Self {
        Self {
            bpm: Bounds::new(50.0, 120.0),
            ibi_ms: Bounds::UNBOUNDED,
            sdnn_ms: Bounds::UNBOUNDED,
            rmssd_ms: Bounds::UNBOUNDED,
            pnn50_pct: Bounds::UNBOUNDED,
        }
    }
}

impl VitalBounds {
    pub fn get(&self, m: Measure) -> Bounds {
        match m {
            Measure::Bpm => self.bpm,
            Measure::IbiMs => self.ibi_ms,
            Measure::SdnnMs => self.sdnn_ms,
            Measure::RmssdMs => self.rmssd_ms,
            Measure::Pnn50Pct => self.pnn50_pct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VitalState {
    Normal,
    Abnormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitalReason {
    pub measure: Measure,
    pub value: f64,
    pub violated: BoundViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitalStatus {
    pub state: VitalState,
    pub reasons: Vec<VitalReason>,
}

impl VitalStatus {
    pub fn normal() -> Self {
        Self { state: VitalState::Normal, reasons: Vec::new() }
    }

    pub fn is_abnormal(&self) -> bool {
        self.state == VitalState::Abnormal
    }
}

pub fn assess_vitals(m: &HrvMeasures, bounds: &VitalBounds) -> VitalStatus {
    let reasons: Vec<VitalReason> = Measure::ALL
        .iter()
        .filter_map(|&measure| {
            let value = m.value(measure);
            bounds.get(measure).check(value).map(|violated| VitalReason { measure, value, violated })
        })
        .collect();
    let state = if reasons.is_empty() { VitalState::Normal } else { VitalState::Abnormal };
    VitalStatus { state, reasons }
}
