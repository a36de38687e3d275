//! Per-beat PR/QRS/QT measurement and classification against normal ranges.
//!
//! Fiducials are located in fixed windows around each accepted R peak. Wave
//! boundaries are where the absolute slope, walking outward from a wave
//! extremum, falls back below a fraction of a reference slope: the beat's
//! steepest QRS slope for QRS onset/offset, and the wave's own steepest slope
//! for P onset and T offset. Crossings are interpolated between samples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hrv::PeakList;
use crate::signal::SampleStream;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DelineationError {
    #[error("at least two accepted peaks are required, got {0}")]
    InsufficientBeats(usize),
    #[error("period {period} has no confident beats for {parameter}")]
    EmptyPeriod { period: usize, parameter: Parameter },
    #[error("n_periods must be >= 1")]
    NoPeriods,
    #[error("invalid range for {0}: lower bound must be below upper bound")]
    InvalidRange(Parameter),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parameter {
    #[serde(rename = "RR")]
    Rr,
    #[serde(rename = "PR")]
    Pr,
    #[serde(rename = "QRS")]
    Qrs,
    #[serde(rename = "QT")]
    Qt,
}

impl Parameter {
    pub const ALL: [Parameter; 4] = [Parameter::Rr, Parameter::Qt, Parameter::Pr, Parameter::Qrs];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::Rr => "RR",
            Parameter::Pr => "PR",
            Parameter::Qrs => "QRS",
            Parameter::Qt => "QT",
        }
    }
}

impl std::fmt::Display for Parameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Parameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "RR" => Ok(Parameter::Rr),
            "PR" => Ok(Parameter::Pr),
            "QRS" => Ok(Parameter::Qrs),
            "QT" => Ok(Parameter::Qt),
            other => Err(format!("unknown parameter {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DelineationConfig {
    pub slope_fraction: f64,
    /// Q is searched in (R - q_search_ms, R); S in (R, R + s_search_ms).
    pub q_search_ms: f64,
    pub s_search_ms: f64,
    /// P peak search window, as offsets before R.
    pub p_window_ms: (f64, f64),
    /// T peak search window, as offsets after R.
    pub t_window_ms: (f64, f64),
    /// Walk limits for the outward slope search, relative to R.
    pub qrs_walk_ms: f64,
    pub p_walk_ms: f64,
    pub t_walk_ms: f64,
    /// A P or T window is ambiguous if another local maximum further than
    /// `competitor_sep_ms` from the peak reaches this fraction of its prominence.
    pub competitor_ratio: f64,
    pub competitor_sep_ms: f64,
}

impl Default for DelineationConfig {
    fn default() -> Self {
        Self {
            slope_fraction: 0.1,
            q_search_ms: 60.0,
            s_search_ms: 60.0,
            p_window_ms: (250.0, 80.0),
            t_window_ms: (80.0, 400.0),
            qrs_walk_ms: 250.0,
            p_walk_ms: 450.0,
            t_walk_ms: 550.0,
            competitor_ratio: 0.7,
            competitor_sep_ms: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatMeasurement {
    pub r_index: usize,
    pub r_time_ms: f64,
    /// Interval to the previous accepted beat; absent for the first beat.
    pub rr_ms: Option<f64>,
    pub pr_ms: Option<f64>,
    pub qrs_ms: Option<f64>,
    pub qt_ms: Option<f64>,
    pub confidence: Confidence,
}

impl BeatMeasurement {
    pub fn get(&self, p: Parameter) -> Option<f64> {
        match p {
            Parameter::Rr => self.rr_ms,
            Parameter::Pr => self.pr_ms,
            Parameter::Qrs => self.qrs_ms,
            Parameter::Qt => self.qt_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatIntervals {
    pub beats: Vec<BeatMeasurement>,
}

impl BeatIntervals {
    pub fn confident(&self) -> impl Iterator<Item = &BeatMeasurement> {
        self.beats.iter().filter(|b| b.confidence == Confidence::High)
    }

    pub fn excluded_count(&self) -> usize {
        self.beats.len() - self.confident().count()
    }

    /// Mean of one parameter over confident beats.
    pub fn mean(&self, p: Parameter) -> Option<f64> {
        mean_of(self.confident(), p)
    }
}

fn mean_of<'a>(beats: impl Iterator<Item = &'a BeatMeasurement>, p: Parameter) -> Option<f64> {
    let (sum, n) = beats.filter_map(|b| b.get(p)).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn slope(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| match i {
            _ if n < 2 => 0.0,
            0 => values[1] - values[0],
            _ if i == n - 1 => values[n - 1] - values[n - 2],
            _ => 0.5 * (values[i + 1] - values[i - 1]),
        })
        .collect()
}

/// Walks from `start` towards `stop` (exclusive). Once |slope| has reached the
/// threshold, returns the interpolated position where it falls back below.
fn boundary(d: &[f64], start: usize, stop: isize, thr: f64) -> Option<f64> {
    let step: isize = if stop >= start as isize { 1 } else { -1 };
    let mut seen = false;
    let mut i = start as isize;
    while i != stop {
        let a = d[i as usize].abs();
        if a >= thr {
            seen = true;
        } else if seen {
            let prev = d[(i - step) as usize].abs();
            let frac = (prev - thr) / (prev - a);
            return Some((i - step) as f64 + step as f64 * frac);
        }
        i += step;
    }
    None
}

fn argmax(values: &[f64], lo: usize, hi: usize) -> usize {
    (lo..=hi).fold(lo, |best, i| if values[i] > values[best] { i } else { best })
}

fn argmin(values: &[f64], lo: usize, hi: usize) -> usize {
    (lo..=hi).fold(lo, |best, i| if values[i] < values[best] { i } else { best })
}

fn max_abs(d: &[f64], lo: usize, hi: usize) -> f64 {
    d[lo..=hi].iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// True when a second local maximum competes with the chosen peak.
fn ambiguous_peak(values: &[f64], lo: usize, hi: usize, peak: usize, sep: usize, ratio: f64) -> bool {
    let floor = values[lo..=hi].iter().copied().fold(f64::INFINITY, f64::min);
    let prominence = values[peak] - floor;
    if prominence <= 0.0 {
        return true;
    }
    (lo.max(1)..=hi.min(values.len() - 2))
        .filter(|&i| i.abs_diff(peak) > sep)
        .filter(|&i| values[i] >= values[i - 1] && values[i] >= values[i + 1])
        .any(|i| values[i] - floor >= ratio * prominence)
}

struct Fiducials {
    qrs_on: f64,
    qrs_off: f64,
    p_on: f64,
    t_off: f64,
}

fn locate(values: &[f64], d: &[f64], r: usize, fs: f64, cfg: &DelineationConfig) -> Option<Fiducials> {
    let n = values.len() as isize;
    let at = |ms: f64| (ms * fs / 1000.0).round() as isize;
    let r_i = r as isize;
    let idx = |off_ms: f64| -> Option<usize> {
        let i = r_i + at(off_ms);
        (0..n).contains(&i).then_some(i as usize)
    };

    // every window and walk limit must lie inside the stream
    idx(-cfg.p_walk_ms.max(cfg.qrs_walk_ms))?;
    idx(cfg.t_walk_ms.max(cfg.qrs_walk_ms))?;

    let q_lo = idx(-cfg.q_search_ms)? + 1;
    let s_hi = idx(cfg.s_search_ms)? - 1;
    if q_lo > r - 1 || s_hi < r + 1 {
        return None;
    }
    let q = argmin(values, q_lo, r - 1);
    let s = argmin(values, r + 1, s_hi);
    let qrs_thr = cfg.slope_fraction * max_abs(d, q_lo, s_hi);
    let qrs_on = boundary(d, q, r_i - at(cfg.qrs_walk_ms), qrs_thr)?;
    let qrs_off = boundary(d, s, r_i + at(cfg.qrs_walk_ms), qrs_thr)?;

    let sep = at(cfg.competitor_sep_ms) as usize;

    let (p_lo, p_hi) = (idx(-cfg.p_window_ms.0)?, idx(-cfg.p_window_ms.1)?);
    let p = argmax(values, p_lo, p_hi);
    if ambiguous_peak(values, p_lo, p_hi, p, sep, cfg.competitor_ratio) {
        return None;
    }
    let p_thr = cfg.slope_fraction * max_abs(d, p_lo, p_hi);
    let p_on = boundary(d, p, r_i - at(cfg.p_walk_ms), p_thr)?;

    let (t_lo, t_hi) = (idx(cfg.t_window_ms.0)?, idx(cfg.t_window_ms.1)?);
    let t = argmax(values, t_lo, t_hi);
    if ambiguous_peak(values, t_lo, t_hi, t, sep, cfg.competitor_ratio) {
        return None;
    }
    let t_thr = cfg.slope_fraction * max_abs(d, t_lo, t_hi);
    let t_off = boundary(d, t, r_i + at(cfg.t_walk_ms), t_thr)?;

    Some(Fiducials { qrs_on, qrs_off, p_on, t_off })
}

/// Measures PR, QRS and QT for every accepted peak.
///
/// Beats whose search windows leave the stream, whose P or T peak is
/// ambiguous, or whose intervals are inconsistent are kept with
/// `Confidence::Low` and excluded from summary means.
pub fn delineate(
    stream: &SampleStream,
    peaks: &PeakList,
    cfg: &DelineationConfig,
) -> Result<BeatIntervals, DelineationError> {
    if peaks.peak_indices.len() < 2 {
        return Err(DelineationError::InsufficientBeats(peaks.peak_indices.len()));
    }
    let fs = stream.fs_hz();
    let period = 1000.0 / fs;
    let values = stream.values();
    let d = slope(&values);
    let t0 = stream.samples().first().map(|s| s.timestamp_ms).unwrap_or(0) as f64;

    let beats = peaks
        .peak_indices
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let rr_ms = (k > 0).then(|| (r - peaks.peak_indices[k - 1]) as f64 * period);
            let r_time_ms = t0 + r as f64 * period;
            let mut beat = BeatMeasurement {
                r_index: r,
                r_time_ms,
                rr_ms,
                pr_ms: None,
                qrs_ms: None,
                qt_ms: None,
                confidence: Confidence::Low,
            };
            if r >= values.len() {
                return beat;
            }
            if let Some(f) = locate(&values, &d, r, fs, cfg) {
                let pr = (f.qrs_on - f.p_on) * period;
                let qrs = (f.qrs_off - f.qrs_on) * period;
                let qt = (f.t_off - f.qrs_on) * period;
                beat.pr_ms = Some(pr);
                beat.qrs_ms = Some(qrs);
                beat.qt_ms = Some(qt);
                let consistent = pr > 0.0 && qrs > 0.0 && qt > qrs && rr_ms.is_none_or(|rr| pr < rr);
                if consistent {
                    beat.confidence = Confidence::High;
                }
            }
            beat
        })
        .collect();
    Ok(BeatIntervals { beats })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodMeans {
    pub rr_ms: f64,
    pub pr_ms: f64,
    pub qrs_ms: f64,
    pub qt_ms: f64,
}

impl PeriodMeans {
    pub fn get(&self, p: Parameter) -> f64 {
        match p {
            Parameter::Rr => self.rr_ms,
            Parameter::Pr => self.pr_ms,
            Parameter::Qrs => self.qrs_ms,
            Parameter::Qt => self.qt_ms,
        }
    }
}

/// Sizes of `n_periods` contiguous groups over `n` beats; the remainder goes
/// to the last group.
pub fn period_sizes(n: usize, n_periods: usize) -> Vec<usize> {
    if n_periods == 0 {
        return Vec::new();
    }
    let base = n / n_periods;
    let mut sizes = vec![base; n_periods];
    sizes[n_periods - 1] += n - base * n_periods;
    sizes
}

pub fn summarize_periods(b: &BeatIntervals, n_periods: usize) -> Result<Vec<PeriodMeans>, DelineationError> {
    if n_periods == 0 {
        return Err(DelineationError::NoPeriods);
    }
    let mut start = 0;
    period_sizes(b.beats.len(), n_periods)
        .into_iter()
        .enumerate()
        .map(|(period, size)| {
            let group = &b.beats[start..start + size];
            start += size;
            let mean = |parameter: Parameter| {
                mean_of(group.iter().filter(|x| x.confidence == Confidence::High), parameter)
                    .ok_or(DelineationError::EmptyPeriod { period: period + 1, parameter })
            };
            Ok(PeriodMeans {
                rr_ms: mean(Parameter::Rr)?,
                pr_ms: mean(Parameter::Pr)?,
                qrs_ms: mean(Parameter::Qrs)?,
                qt_ms: mean(Parameter::Qt)?,
            })
        })
        .collect()
}

/// Inclusive millisecond range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsRange {
    pub lo: f64,
    pub hi: f64,
}

impl MsRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalRanges {
    pub rr_ms: MsRange,
    pub qt_ms: MsRange,
    pub pr_ms: MsRange,
    pub qrs_ms: MsRange,
}

impl Default for NormalRanges {
    fn default() -> Self {
        Self {
            rr_ms: MsRange::new(600.0, 1200.0),
            qt_ms: MsRange::new(320.0, 440.0),
            pr_ms: MsRange::new(120.0, 200.0),
            qrs_ms: MsRange::new(80.0, 100.0),
        }
    }
}

impl NormalRanges {
    pub fn get(&self, p: Parameter) -> MsRange {
        match p {
            Parameter::Rr => self.rr_ms,
            Parameter::Pr => self.pr_ms,
            Parameter::Qrs => self.qrs_ms,
            Parameter::Qt => self.qt_ms,
        }
    }

    pub fn validate(&self) -> Result<(), DelineationError> {
        for p in Parameter::ALL {
            let r = self.get(p);
            if !(r.lo < r.hi) {
                return Err(DelineationError::InvalidRange(p));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeartStatus {
    Healthy,
    OutOfRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeViolation {
    pub parameter: Parameter,
    /// 1-based period number.
    pub period: usize,
    pub value: f64,
    pub range: MsRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeartVerdict {
    pub status: HeartStatus,
    pub violations: Vec<RangeViolation>,
}

impl HeartVerdict {
    pub fn is_healthy(&self) -> bool {
        self.status == HeartStatus::Healthy
    }
}

pub fn classify(period_means: &[PeriodMeans], ranges: &NormalRanges) -> HeartVerdict {
    let violations: Vec<RangeViolation> = period_means
        .iter()
        .enumerate()
        .flat_map(|(i, m)| {
            Parameter::ALL.into_iter().filter_map(move |p| {
                let range = ranges.get(p);
                let value = m.get(p);
                (!range.contains(value)).then_some(RangeViolation { parameter: p, period: i + 1, value, range })
            })
        })
        .collect();
    let status = if violations.is_empty() { HeartStatus::Healthy } else { HeartStatus::OutOfRange };
    HeartVerdict { status, violations }
}

/// JSON view of a verdict together with the period means it was made from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub periods: Vec<PeriodMeans>,
    #[serde(flatten)]
    pub verdict: HeartVerdict,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hrv::{detect_peaks, PeakDetectionConfig};
    use crate::signal::{synthesize, AdcConfig, EcgSynthParams};
    use proptest::prelude::*;

    fn beat(rr: f64, pr: f64, qrs: f64, qt: f64) -> BeatMeasurement {
        BeatMeasurement {
            r_index: 0,
            r_time_ms: 0.0,
            rr_ms: Some(rr),
            pr_ms: Some(pr),
            qrs_ms: Some(qrs),
            qt_ms: Some(qt),
            confidence: Confidence::High,
        }
    }

    fn means(rr: f64, qt: f64, pr: f64, qrs: f64) -> PeriodMeans {
        PeriodMeans { rr_ms: rr, pr_ms: pr, qrs_ms: qrs, qt_ms: qt }
    }

    fn analyse(p: &EcgSynthParams) -> BeatIntervals {
        let ecg = synthesize(p, &AdcConfig::default()).unwrap();
        let peaks = detect_peaks(&ecg.stream, &PeakDetectionConfig::default()).unwrap();
        delineate(&ecg.stream, &peaks, &DelineationConfig::default()).unwrap()
    }

    #[test]
    fn noiseless_means_track_annotations() {
        let p = EcgSynthParams { rr_ms: 800.0, pr_ms: 160.0, qrs_ms: 90.0, qt_ms: 380.0, duration_s: 20.0, ..Default::default() };
        let b = analyse(&p);
        assert!(b.confident().count() >= 20);
        for (param, want) in [(Parameter::Pr, 160.0), (Parameter::Qrs, 90.0), (Parameter::Qt, 380.0), (Parameter::Rr, 800.0)] {
            let got = b.mean(param).unwrap();
            assert!((got - want).abs() <= 10.0, "{param}: {got} vs {want}");
        }
    }

    #[test]
    fn buried_t_wave_is_flagged() {
        let p = EcgSynthParams { noise_std: 0.3, seed: 3, duration_s: 30.0, ..Default::default() };
        let ecg = synthesize(&p, &AdcConfig::default()).unwrap();
        // delineate at the annotated R positions so detection errors do not interfere
        let idx = ecg.annotations.iter().map(|a| (a.r_time_ms / 5.0).round() as usize).collect();
        let peaks = PeakList::from_indices(idx, 200.0);
        let b = delineate(&ecg.stream, &peaks, &DelineationConfig::default()).unwrap();
        assert!(b.excluded_count() > 0);
    }

    #[test]
    fn edge_beats_are_low_confidence() {
        let p = EcgSynthParams { duration_s: 8.0, ..Default::default() };
        let b = analyse(&p);
        assert_eq!(b.beats.first().unwrap().confidence, Confidence::Low);
        assert_eq!(b.beats.last().unwrap().confidence, Confidence::Low);
        assert!(b.beats[0].rr_ms.is_none());
    }

    #[test]
    fn one_peak_is_insufficient() {
        let s = SampleStream::from_values(200.0, 0, &[0; 400]).unwrap();
        let peaks = PeakList::from_indices(vec![200], 200.0);
        assert_eq!(
            delineate(&s, &peaks, &DelineationConfig::default()),
            Err(DelineationError::InsufficientBeats(1))
        );
    }

    #[test]
    fn periods_of_constant_beats() {
        let b = BeatIntervals { beats: vec![beat(800.0, 150.0, 90.0, 380.0); 8] };
        let m = summarize_periods(&b, 4).unwrap();
        assert_eq!(m.len(), 4);
        assert!(m.iter().all(|p| p.rr_ms == 800.0));
    }

    #[test]
    fn periods_split_contiguously() {
        let mut beats = vec![beat(700.0, 150.0, 90.0, 380.0); 4];
        beats.extend(vec![beat(900.0, 150.0, 90.0, 380.0); 4]);
        let m = summarize_periods(&BeatIntervals { beats }, 2).unwrap();
        assert_eq!((m[0].rr_ms, m[1].rr_ms), (700.0, 900.0));
    }

    #[test]
    fn remainder_goes_to_last_period() {
        assert_eq!(period_sizes(9, 4), vec![2, 2, 2, 3]);
        assert_eq!(period_sizes(8, 4), vec![2, 2, 2, 2]);
        let beats = (0..9).map(|i| beat(700.0 + i as f64, 150.0, 90.0, 380.0)).collect();
        let m = summarize_periods(&BeatIntervals { beats }, 4).unwrap();
        assert_eq!(m[3].rr_ms, (706.0 + 707.0 + 708.0) / 3.0);
    }

    #[test]
    fn empty_period_is_named() {
        let mut beats = vec![beat(800.0, 150.0, 90.0, 380.0); 4];
        beats[2].confidence = Confidence::Low;
        beats[3].confidence = Confidence::Low;
        let err = summarize_periods(&BeatIntervals { beats }, 2).unwrap_err();
        assert_eq!(err, DelineationError::EmptyPeriod { period: 2, parameter: Parameter::Rr });
        assert_eq!(summarize_periods(&BeatIntervals { beats: vec![] }, 0), Err(DelineationError::NoPeriods));
    }

    #[test]
    fn classify_reference_rows() {
        let r = NormalRanges::default();
        assert!(classify(&[means(810.0, 332.0, 120.0, 85.0)], &r).is_healthy());
        let v = classify(&[means(810.0, 332.0, 115.0, 85.0)], &r);
        assert_eq!(v.status, HeartStatus::OutOfRange);
        assert_eq!(
            v.violations,
            vec![RangeViolation { parameter: Parameter::Pr, period: 1, value: 115.0, range: MsRange::new(120.0, 200.0) }]
        );
        assert!(classify(&[means(600.0, 332.0, 150.0, 85.0)], &r).is_healthy());
    }

    #[test]
    fn verdict_json_shape() {
        let periods = vec![means(810.0, 332.0, 115.0, 85.0)];
        let verdict = classify(&periods, &NormalRanges::default());
        let json = serde_json::to_value(VerdictReport { periods, verdict }).unwrap();
        assert_eq!(json["status"], "out_of_range");
        assert_eq!(json["violations"][0]["parameter"], "PR");
        assert_eq!(json["periods"][0]["rr_ms"], 810.0);
    }

    #[test]
    fn translation_equivariance() {
        let p = EcgSynthParams { duration_s: 12.0, ..Default::default() };
        let ecg = synthesize(&p, &AdcConfig::default()).unwrap();
        let values: Vec<u16> = ecg.stream.samples().iter().map(|s| s.value).collect();
        let idx: Vec<usize> = ecg.annotations.iter().map(|a| (a.r_time_ms / 5.0).round() as usize).collect();
        let base = delineate(&ecg.stream, &PeakList::from_indices(idx.clone(), 200.0), &DelineationConfig::default()).unwrap();
        let k = 37;
        let mut shifted = vec![values[0]; k];
        shifted.extend(&values);
        let s2 = SampleStream::from_values(200.0, 0, &shifted).unwrap();
        let idx2 = idx.iter().map(|i| i + k).collect();
        let moved = delineate(&s2, &PeakList::from_indices(idx2, 200.0), &DelineationConfig::default()).unwrap();
        for (a, b) in base.beats.iter().zip(&moved.beats) {
            if a.confidence == Confidence::High {
                assert_eq!(b.confidence, Confidence::High);
                for p in [Parameter::Pr, Parameter::Qrs, Parameter::Qt] {
                    assert!((a.get(p).unwrap() - b.get(p).unwrap()).abs() < 1e-9, "{p}");
                }
                assert_eq!(a.r_index + k, b.r_index);
            }
        }
    }

    proptest! {
        #[test]
        fn widening_ranges_keeps_healthy(
            rr in 500.0f64..1300.0, qt in 300.0f64..460.0, pr in 100.0f64..220.0, qrs in 70.0f64..110.0,
            grow in 0.0f64..50.0,
        ) {
            let m = [means(rr, qt, pr, qrs)];
            let narrow = NormalRanges::default();
            let g = |r: MsRange| MsRange::new(r.lo - grow, r.hi + grow);
            let wide = NormalRanges { rr_ms: g(narrow.rr_ms), qt_ms: g(narrow.qt_ms), pr_ms: g(narrow.pr_ms), qrs_ms: g(narrow.qrs_ms) };
            let v = classify(&m, &narrow);
            if v.is_healthy() {
                prop_assert!(classify(&m, &wide).is_healthy());
            }
            prop_assert_eq!(v.is_healthy(), v.violations.is_empty());
        }

        #[test]
        fn single_period_is_global_mean(rrs in proptest::collection::vec(600.0f64..1200.0, 1..30)) {
            let beats: Vec<_> = rrs.iter().map(|&rr| beat(rr, 150.0, 90.0, 380.0)).collect();
            let b = BeatIntervals { beats };
            let m = summarize_periods(&b, 1).unwrap();
            prop_assert!((m[0].rr_ms - b.mean(Parameter::Rr).unwrap()).abs() < 1e-9);
        }
    }
}
