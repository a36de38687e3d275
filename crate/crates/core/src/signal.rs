//! ECG sample streams: synthesis, ADC quantization and CSV persistence.
//!
//! The synthetic source stands in for the analog front end. Each beat is the
//! sum of five Gaussian bumps (P, Q, R, S, T). Bump centres are placed from the
//! requested PR/QRS/QT durations, and the generator reports those durations as
//! ground-truth annotations for the downstream detectors.
//!
//! Wave boundaries follow one convention throughout: a boundary is the point
//! on the outer flank of a bump where its slope has decayed to
//! [`BOUNDARY_SLOPE_FRACTION`] of a reference slope. For P and T the reference
//! is the bump's own steepest slope. For the QRS complex the reference is the
//! steepest slope of the R wave, so the onset sits on the outer flank of Q and
//! the offset on the outer flank of S.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fraction of the reference slope that marks a wave boundary.
pub const BOUNDARY_SLOPE_FRACTION: f64 = 0.1;

/// QRS duration at which the Q/R/S widths of a [`WaveProfile`] apply as given.
pub const REFERENCE_QRS_MS: f64 = 100.0;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("invalid synthesis parameter: {0}")]
    InvalidParams(String),
    #[error("invalid ADC configuration: {0}")]
    InvalidAdc(String),
    #[error("invalid stream: {0}")]
    InvalidStream(String),
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Height (normalized units, signed) and Gaussian width (ms) of one wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub amplitude: f64,
    pub width_ms: f64,
}

/// Per-wave amplitude profile of a synthetic beat.
///
/// Q, R and S widths are specified at a 100 ms QRS and scale linearly with the
/// requested QRS duration, so the complex keeps its shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveProfile {
    pub p: Wave,
    pub q: Wave,
    pub r: Wave,
    pub s: Wave,
    pub t: Wave,
}

impl Default for WaveProfile {
    fn default() -> Self {
        Self {
            p: Wave { amplitude: 0.15, width_ms: 15.0 },
            q: Wave { amplitude: -0.15, width_ms: 20.0 / 3.0 },
            r: Wave { amplitude: 1.0, width_ms: 10.0 },
            s: Wave { amplitude: -0.15, width_ms: 20.0 / 3.0 },
            t: Wave { amplitude: 0.3, width_ms: 35.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EcgSynthParams {
    pub fs_hz: f64,
    pub rr_ms: f64,
    pub pr_ms: f64,
    pub qrs_ms: f64,
    pub qt_ms: f64,
    pub profile: WaveProfile,
    /// Isoelectric level added to every sample, so Q and S stay above code 0.
    pub baseline: f64,
    pub noise_std: f64,
    pub duration_s: f64,
    pub seed: u64,
}

impl Default for EcgSynthParams {
    fn default() -> Self {
        Self {
            fs_hz: 200.0,
            rr_ms: 800.0,
            pr_ms: 160.0,
            qrs_ms: 90.0,
            qt_ms: 380.0,
            profile: WaveProfile::default(),
            baseline: 0.18,
            noise_std: 0.0,
            duration_s: 60.0,
            seed: 0,
        }
    }
}

impl EcgSynthParams {
    pub fn validate(&self) -> Result<(), SignalError> {
        let bad = |m: &str| Err(SignalError::InvalidParams(m.to_string()));
        let all = [
            self.fs_hz,
            self.rr_ms,
            self.pr_ms,
            self.qrs_ms,
            self.qt_ms,
            self.baseline,
            self.noise_std,
            self.duration_s,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if self.fs_hz <= 0.0 {
            return bad("fs_hz must be > 0");
        }
        if self.duration_s < 0.0 {
            return bad("duration_s must be >= 0");
        }
        if self.rr_ms <= 0.0 || self.pr_ms <= 0.0 || self.qrs_ms <= 0.0 || self.qt_ms <= 0.0 {
            return bad("interval durations must be > 0");
        }
        if self.pr_ms >= self.rr_ms {
            return bad("pr_ms must be < rr_ms");
        }
        if self.qt_ms >= self.rr_ms {
            return bad("qt_ms must be < rr_ms");
        }
        if self.qrs_ms >= self.qt_ms {
            return bad("qrs_ms must be < qt_ms");
        }
        // the T wave of one beat must end before the P wave of the next begins
        if self.pr_ms + self.qt_ms >= self.rr_ms {
            return bad("pr_ms + qt_ms must be < rr_ms");
        }
        if self.noise_std < 0.0 {
            return bad("noise_std must be >= 0");
        }
        let p = &self.profile;
        for (name, w) in [("P", p.p), ("Q", p.q), ("R", p.r), ("S", p.s), ("T", p.t)] {
            if !(w.width_ms > 0.0) || !w.amplitude.is_finite() || w.amplitude == 0.0 {
                return Err(SignalError::InvalidParams(format!(
                    "{name} wave needs a non-zero amplitude and positive width"
                )));
            }
        }
        self.layout().map(|_| ())
    }

    /// Solves the boundary offsets (in widths) for every wave.
    fn layout(&self) -> Result<BeatLayout, SignalError> {
        let scale = self.qrs_ms / REFERENCE_QRS_MS;
        let p = &self.profile;
        let (sq, sr, ss) = (p.q.width_ms * scale, p.r.width_ms * scale, p.s.width_ms * scale);
        let peak = (-0.5f64).exp();
        let r_slope = p.r.amplitude.abs() / sr;
        let own = BOUNDARY_SLOPE_FRACTION * peak;
        let k_p = outer_flank_root(own).ok_or_else(|| invalid("P boundary unsolvable"))?;
        let k_t = outer_flank_root(own).ok_or_else(|| invalid("T boundary unsolvable"))?;
        let k_q = outer_flank_root(BOUNDARY_SLOPE_FRACTION * r_slope * peak * sq / p.q.amplitude.abs())
            .ok_or_else(|| invalid("Q wave too shallow for the R-referenced boundary rule"))?;
        let k_s = outer_flank_root(BOUNDARY_SLOPE_FRACTION * r_slope * peak * ss / p.s.amplitude.abs())
            .ok_or_else(|| invalid("S wave too shallow for the R-referenced boundary rule"))?;
        let layout = BeatLayout { k_p, k_q, k_s, k_t, sq, sr, ss };
        // Q and S extrema must sit strictly inside the complex, either side of R
        let half = self.qrs_ms / 2.0;
        if k_q * sq >= half || k_s * ss >= half {
            return Err(invalid("Q/S widths too large for the requested QRS duration"));
        }
        Ok(layout)
    }
}

fn invalid(m: &str) -> SignalError {
    SignalError::InvalidParams(m.to_string())
}

struct BeatLayout {
    k_p: f64,
    k_q: f64,
    k_s: f64,
    k_t: f64,
    sq: f64,
    sr: f64,
    ss: f64,
}

/// Outer root (u > 1) of `u * exp(-u^2 / 2) = c`, by bisection.
///
/// The normalized slope of a unit Gaussian peaks at `exp(-1/2)` for u = 1 and
/// decays monotonically beyond it.
fn outer_flank_root(c: f64) -> Option<f64> {
    let f = |u: f64| u * (-0.5 * u * u).exp() - c;
    if !(c > 0.0) || f(1.0) <= 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (1.0, 1.0);
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcConfig {
    pub bits: u8,
    pub full_scale: f64,
}

impl Default for AdcConfig {
    fn default() -> Self {
        Self { bits: 10, full_scale: 1.2 }
    }
}

impl AdcConfig {
    pub fn validate(&self) -> Result<(), SignalError> {
        if !(1..=16).contains(&self.bits) {
            return Err(SignalError::InvalidAdc(format!("bits must be in 1..=16, got {}", self.bits)));
        }
        if !(self.full_scale > 0.0) || !self.full_scale.is_finite() {
            return Err(SignalError::InvalidAdc("full_scale must be > 0".into()));
        }
        Ok(())
    }

    pub fn max_code(&self) -> u16 {
        ((1u32 << self.bits) - 1) as u16
    }
}

/// Maps a normalized analog value to an ADC code. Rounds half-up and saturates.
pub fn quantize(analog: f64, cfg: &AdcConfig) -> u16 {
    let max = cfg.max_code() as f64;
    let scaled = (analog / cfg.full_scale * max + 0.5).floor();
    if scaled.is_nan() || scaled <= 0.0 {
        0
    } else if scaled >= max {
        cfg.max_code()
    } else {
        scaled as u16
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EcgSample {
    pub counter: u64,
    pub timestamp_ms: u64,
    pub value: u16,
}

/// An ordered run of samples with strictly consecutive counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStream {
    fs_hz: f64,
    samples: Vec<EcgSample>,
}

impl SampleStream {
    pub fn new(fs_hz: f64, samples: Vec<EcgSample>) -> Result<Self, SignalError> {
        if !(fs_hz > 0.0) || !fs_hz.is_finite() {
            return Err(SignalError::InvalidStream("fs_hz must be > 0".into()));
        }
        for (i, w) in samples.windows(2).enumerate() {
            if w[1].counter != w[0].counter + 1 {
                return Err(SignalError::InvalidStream(format!(
                    "counter gap at position {}: {} follows {}",
                    i + 1,
                    w[1].counter,
                    w[0].counter
                )));
            }
            if w[1].timestamp_ms < w[0].timestamp_ms {
                return Err(SignalError::InvalidStream(format!(
                    "timestamp decreases at position {}",
                    i + 1
                )));
            }
        }
        Ok(Self { fs_hz, samples })
    }

    /// Builds a stream from raw codes, numbering counters from `first_counter`.
    pub fn from_values(fs_hz: f64, first_counter: u64, values: &[u16]) -> Result<Self, SignalError> {
        let samples = values
            .iter()
            .enumerate()
            .map(|(i, &value)| {
                let counter = first_counter + i as u64;
                EcgSample { counter, timestamp_ms: counter_timestamp_ms(counter, fs_hz), value }
            })
            .collect();
        Self::new(fs_hz, samples)
    }

    pub fn fs_hz(&self) -> f64 {
        self.fs_hz
    }

    pub fn samples(&self) -> &[EcgSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<EcgSample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.value as f64).collect()
    }

    pub fn sample_period_ms(&self) -> f64 {
        1000.0 / self.fs_hz
    }
}

pub fn counter_timestamp_ms(counter: u64, fs_hz: f64) -> u64 {
    (counter as f64 * 1000.0 / fs_hz).round() as u64
}

/// Ground truth for one synthesized beat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatAnnotation {
    pub beat_index: usize,
    pub r_time_ms: f64,
    pub pr_ms: f64,
    pub qrs_ms: f64,
    pub qt_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEcg {
    pub stream: SampleStream,
    pub annotations: Vec<BeatAnnotation>,
}

/// Noise-free analog waveform plus annotations, before quantization.
pub fn synthesize_analog(params: &EcgSynthParams) -> Result<(Vec<f64>, Vec<BeatAnnotation>), SignalError> {
    params.validate()?;
    let layout = params.layout()?;
    let n = (params.duration_s * params.fs_hz).round() as usize;
    let period = 1000.0 / params.fs_hz;
    let duration_ms = n as f64 * period;
    let p = &params.profile;

    // R peaks at rr/2 + k*rr; one extra beat either side covers waves that
    // spill across the stream edges
    let mut beats = Vec::new();
    let mut k: i64 = -1;
    loop {
        let r = params.rr_ms * (0.5 + k as f64);
        if r >= duration_ms + params.rr_ms {
            break;
        }
        beats.push(r);
        k += 1;
    }

    let mut analog = vec![params.baseline; n];
    for &r in &beats {
        let onset = r - params.qrs_ms / 2.0;
        let offset = onset + params.qrs_ms;
        let waves = [
            (p.p.amplitude, onset - params.pr_ms + layout.k_p * p.p.width_ms, p.p.width_ms),
            (p.q.amplitude, onset + layout.k_q * layout.sq, layout.sq),
            (p.r.amplitude, r, layout.sr),
            (p.s.amplitude, offset - layout.k_s * layout.ss, layout.ss),
            (p.t.amplitude, onset + params.qt_ms - layout.k_t * p.t.width_ms, p.t.width_ms),
        ];
        for (amp, centre, width) in waves {
            // beyond 8 widths the bump is below 1e-13
            let lo = ((centre - 8.0 * width) / period).floor().max(0.0) as usize;
            let hi = (((centre + 8.0 * width) / period).ceil().max(0.0) as usize).min(n);
            for (i, a) in analog.iter_mut().enumerate().take(hi).skip(lo) {
                let z = (i as f64 * period - centre) / width;
                *a += amp * (-0.5 * z * z).exp();
            }
        }
    }

    let annotations = beats
        .iter()
        .filter(|&&r| r >= 0.0 && r < duration_ms)
        .enumerate()
        .map(|(beat_index, &r_time_ms)| BeatAnnotation {
            beat_index,
            r_time_ms,
            pr_ms: params.pr_ms,
            qrs_ms: params.qrs_ms,
            qt_ms: params.qt_ms,
        })
        .collect();
    Ok((analog, annotations))
}

/// Synthesizes a quantized ECG stream with its beat annotations.
pub fn synthesize(params: &EcgSynthParams, adc: &AdcConfig) -> Result<SyntheticEcg, SignalError> {
    adc.validate()?;
    let (mut analog, annotations) = synthesize_analog(params)?;
    if params.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let normal = Normal::new(0.0, params.noise_std)
            .map_err(|e| SignalError::InvalidParams(e.to_string()))?;
        for a in analog.iter_mut() {
            *a += normal.sample(&mut rng);
        }
    }
    let values: Vec<u16> = analog.iter().map(|&a| quantize(a, adc)).collect();
    let stream = SampleStream::from_values(params.fs_hz, 0, &values)?;
    Ok(SyntheticEcg { stream, annotations })
}

const CSV_HEADER: [&str; 3] = ["counter", "timestamp_ms", "value"];

pub fn write_csv_to<W: Write>(stream: &SampleStream, writer: W) -> Result<(), SignalError> {
    write_samples_csv_to(&stream.samples, writer)
}

/// Writes samples in the stream CSV format without checking continuity.
pub fn write_samples_csv_to<W: Write>(samples: &[EcgSample], writer: W) -> Result<(), SignalError> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{}", CSV_HEADER.join(","))?;
    for s in samples {
        writeln!(w, "{},{},{}", s.counter, s.timestamp_ms, s.value)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(stream: &SampleStream, path: impl AsRef<Path>) -> Result<(), SignalError> {
    write_csv_to(stream, File::create(path)?)
}

/// Parses the `counter,timestamp_ms,value` format. `fs_hz` is not stored in
/// the file, so the caller supplies it.
pub fn read_csv_from<R: Read>(reader: R, fs_hz: f64) -> Result<SampleStream, SignalError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| SignalError::Format { line: 1, message: e.to_string() })?
        .clone();
    let mut cols = [usize::MAX; 3];
    for (slot, name) in cols.iter_mut().zip(CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| SignalError::Format { line: 1, message: format!("missing column `{name}`") })?;
    }

    let mut samples: Vec<EcgSample> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| SignalError::Format {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize, name: &str| -> Result<&str, SignalError> {
            record
                .get(idx)
                .map(str::trim)
                .ok_or_else(|| SignalError::Format { line, message: format!("missing `{name}` field") })
        };
        let parse_u64 = |idx: usize, name: &str| -> Result<u64, SignalError> {
            let raw = field(idx, name)?;
            raw.parse::<u64>().map_err(|_| SignalError::Format {
                line,
                message: format!("`{name}` is not a non-negative integer: {raw:?}"),
            })
        };
        let counter = parse_u64(cols[0], "counter")?;
        let timestamp_ms = parse_u64(cols[1], "timestamp_ms")?;
        let raw = field(cols[2], "value")?;
        let value = raw.parse::<u16>().map_err(|_| SignalError::Format {
            line,
            message: format!("`value` is not an integer ADC code: {raw:?}"),
        })?;
        if let Some(prev) = samples.last() {
            if counter != prev.counter + 1 {
                return Err(SignalError::Format {
                    line,
                    message: format!("counter {counter} does not follow {}", prev.counter),
                });
            }
            if timestamp_ms < prev.timestamp_ms {
                return Err(SignalError::Format { line, message: "timestamp decreases".into() });
            }
        }
        samples.push(EcgSample { counter, timestamp_ms, value });
    }
    SampleStream::new(fs_hz, samples)
}

pub fn load_csv(path: impl AsRef<Path>, fs_hz: f64) -> Result<SampleStream, SignalError> {
    read_csv_from(File::open(path)?, fs_hz)
}

pub fn write_annotations(annotations: &[BeatAnnotation], path: impl AsRef<Path>) -> Result<(), SignalError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, annotations)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<BeatAnnotation>, SignalError> {
    Ok(serde_json::from_reader(File::open(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(rr: f64, duration_s: f64) -> EcgSynthParams {
        EcgSynthParams { rr_ms: rr, duration_s, ..Default::default() }
    }

    #[test]
    fn sample_count_is_duration_times_rate() {
        let ecg = synthesize(&params(800.0, 8.0), &AdcConfig::default()).unwrap();
        assert_eq!(ecg.stream.len(), 1600);
        assert_eq!(ecg.stream.samples()[1].timestamp_ms, 5);
        assert_eq!(ecg.stream.samples()[1599].counter, 1599);
    }

    #[test]
    fn beat_count_matches_generator_placement() {
        // oracle: count multiples of rr (offset by rr/2) inside [0, 8000) ms
        let expected = (0..).map(|k| 400.0 + 800.0 * k as f64).take_while(|&t| t < 8000.0).count();
        let ecg = synthesize(&params(800.0, 8.0), &AdcConfig::default()).unwrap();
        assert_eq!(ecg.annotations.len(), expected);
        assert_eq!(expected, 10);
    }

    #[test]
    fn seeded_synthesis_is_deterministic() {
        let p = EcgSynthParams { noise_std: 0.05, seed: 42, duration_s: 5.0, ..Default::default() };
        let a = synthesize(&p, &AdcConfig::default()).unwrap();
        let b = synthesize(&p, &AdcConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = synthesize(&EcgSynthParams { seed: 43, ..p }, &AdcConfig::default()).unwrap();
        assert_ne!(a.stream, c.stream);
    }

    #[test]
    fn annotated_r_is_local_maximum() {
        let ecg = synthesize(&params(750.0, 10.0), &AdcConfig::default()).unwrap();
        let values = ecg.stream.values();
        let fs = ecg.stream.fs_hz();
        let half = (375.0 * fs / 1000.0) as usize;
        for a in &ecg.annotations {
            let r = (a.r_time_ms * fs / 1000.0).round() as usize;
            let lo = r.saturating_sub(half);
            let hi = (r + half).min(values.len() - 1);
            let argmax = (lo..=hi).max_by(|&i, &j| values[i].total_cmp(&values[j]).then(j.cmp(&i))).unwrap();
            assert!(argmax.abs_diff(r) <= 1, "beat {} max at {argmax}, annotated {r}", a.beat_index);
        }
    }

    #[test]
    fn rejects_invalid_params() {
        for p in [
            EcgSynthParams { fs_hz: 0.0, ..Default::default() },
            EcgSynthParams { duration_s: -1.0, ..Default::default() },
            EcgSynthParams { pr_ms: 900.0, ..Default::default() },
            EcgSynthParams { qt_ms: 800.0, ..Default::default() },
            EcgSynthParams { pr_ms: 200.0, qt_ms: 620.0, rr_ms: 800.0, ..Default::default() },
            EcgSynthParams { noise_std: -0.1, ..Default::default() },
            EcgSynthParams { qrs_ms: 0.0, ..Default::default() },
        ] {
            assert!(matches!(synthesize(&p, &AdcConfig::default()), Err(SignalError::InvalidParams(_))), "{p:?}");
        }
        assert!(matches!(
            synthesize(&EcgSynthParams::default(), &AdcConfig { bits: 0, full_scale: 1.0 }),
            Err(SignalError::InvalidAdc(_))
        ));
    }

    #[test]
    fn zero_duration_gives_empty_stream() {
        let ecg = synthesize(&params(800.0, 0.0), &AdcConfig::default()).unwrap();
        assert!(ecg.stream.is_empty());
        assert!(ecg.annotations.is_empty());
    }

    #[test]
    fn flank_root_matches_definition() {
        let c = 0.1 * (-0.5f64).exp();
        let u = outer_flank_root(c).unwrap();
        assert!((u * (-0.5 * u * u).exp() - c).abs() < 1e-12);
        assert!(u > 2.7 && u < 2.8);
        assert!(outer_flank_root(0.7).is_none());
    }

    #[test]
    fn quantize_reference_points() {
        let adc = AdcConfig { bits: 10, full_scale: 1.2 };
        assert_eq!(quantize(1.2, &adc), 1023);
        assert_eq!(quantize(0.0, &adc), 0);
        assert_eq!(quantize(0.6, &adc), 512);
        assert_eq!(quantize(-3.0, &adc), 0);
        assert_eq!(quantize(5.0, &adc), 1023);
        assert_eq!(quantize(f64::NAN, &adc), 0);
        let adc16 = AdcConfig { bits: 16, full_scale: 1.0 };
        assert_eq!(quantize(1.0, &adc16), u16::MAX);
    }

    #[test]
    fn csv_header_only_is_empty_stream() {
        let s = read_csv_from("counter,timestamp_ms,value\n".as_bytes(), 200.0).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn csv_gap_reports_line() {
        let data = "counter,timestamp_ms,value\n0,0,10\n1,5,11\n3,15,12\n";
        match read_csv_from(data.as_bytes(), 200.0) {
            Err(SignalError::Format { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn csv_bad_value_and_missing_column() {
        let data = "counter,timestamp_ms,value\n0,0,10\n1,5,1.5\n";
        assert!(matches!(read_csv_from(data.as_bytes(), 200.0), Err(SignalError::Format { line: 3, .. })));
        let data = "counter,value\n0,10\n";
        assert!(matches!(read_csv_from(data.as_bytes(), 200.0), Err(SignalError::Format { line: 1, .. })));
        let data = "counter,timestamp_ms,value\n0,0,-4\n";
        assert!(matches!(read_csv_from(data.as_bytes(), 200.0), Err(SignalError::Format { line: 2, .. })));
    }

    #[test]
    fn csv_1500_rows() {
        let values: Vec<u16> = (0..1500).map(|i| (i % 1024) as u16).collect();
        let s = SampleStream::from_values(200.0, 0, &values).unwrap();
        let mut buf = Vec::new();
        write_csv_to(&s, &mut buf).unwrap();
        let back = read_csv_from(buf.as_slice(), 200.0).unwrap();
        assert_eq!(back.len(), 1500);
        assert_eq!(back.samples()[1499].counter, 1499);
    }

    proptest! {
        #[test]
        fn csv_round_trip(first in 0u64..1_000_000, values in proptest::collection::vec(0u16..1024, 0..400)) {
            let s = SampleStream::from_values(200.0, first, &values).unwrap();
            let mut buf = Vec::new();
            write_csv_to(&s, &mut buf).unwrap();
            prop_assert_eq!(read_csv_from(buf.as_slice(), 200.0).unwrap(), s);
        }

        #[test]
        fn quantizer_is_monotone(a in -2.0f64..2.0, b in -2.0f64..2.0, bits in 1u8..=16) {
            let adc = AdcConfig { bits, full_scale: 1.2 };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(quantize(lo, &adc) <= quantize(hi, &adc));
            prop_assert!(quantize(hi, &adc) <= adc.max_code());
        }
    }
}
