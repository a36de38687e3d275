//! One pass of peak detection, HRV, delineation and classification over a stream.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delineation::{
    classify, delineate, summarize_periods, BeatIntervals, DelineationConfig, DelineationError, NormalRanges,
    VerdictReport,
};
use crate::hrv::{assess_vitals, compute_measures, detect_peaks, HrvError, HrvMeasures, PeakDetectionConfig, PeakList, VitalBounds, VitalStatus};
use crate::signal::SampleStream;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub peak: PeakDetectionConfig,
    pub delineation: DelineationConfig,
    pub ranges: NormalRanges,
    pub vital_bounds: VitalBounds,
}

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Hrv(#[from] HrvError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub peaks: PeakList,
    pub hrv: HrvMeasures,
    pub vital: VitalStatus,
    pub intervals: Option<BeatIntervals>,
    pub verdict: Option<VerdictReport>,
    /// Why intervals or the verdict are missing, if they are.
    pub interval_error: Option<DelineationError>,
}

/// Runs the full per-stream analysis. Peak or HRV failures are errors;
/// delineation failures only leave the interval fields empty.
pub fn analyze(stream: &SampleStream, cfg: &AnalysisConfig, n_periods: usize) -> Result<Analysis, AnalysisError> {
    let peaks = detect_peaks(stream, &cfg.peak)?;
    let hrv = compute_measures(&peaks)?;
    let vital = assess_vitals(&hrv, &cfg.vital_bounds);
    let mut out = Analysis { peaks, hrv, vital, intervals: None, verdict: None, interval_error: None };
    match delineate(stream, &out.peaks, &cfg.delineation) {
        Ok(intervals) => {
            match summarize_periods(&intervals, n_periods) {
                Ok(periods) => {
                    let verdict = classify(&periods, &cfg.ranges);
                    out.verdict = Some(VerdictReport { periods, verdict });
                }
                Err(e) => out.interval_error = Some(e),
            }
            out.intervals = Some(intervals);
        }
        Err(e) => out.interval_error = Some(e),
    }
    Ok(out)
}
