use std::path::Path;

use anyhow::{Context, Result};
use fogecg_core::analysis::AnalysisConfig;
use fogecg_core::delineation::{DelineationConfig, NormalRanges};
use fogecg_core::fog::FogConfig;
use fogecg_core::hrv::{PeakDetectionConfig, VitalBounds};
use fogecg_core::netsim::LinkModel;
use fogecg_core::signal::{AdcConfig, EcgSynthParams};
use fogecg_core::sim::SimulationConfig;
use serde::{Deserialize, Serialize};

/// Every tunable default, overridable section by section from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub synth: EcgSynthParams,
    pub adc: AdcConfig,
    pub peak: PeakDetectionConfig,
    pub delineation: DelineationConfig,
    pub ranges: NormalRanges,
    pub vital_bounds: VitalBounds,
    pub fog: FogConfig,
    pub link: LinkModel,
}

impl Default for FileConfig {
    fn default() -> Self {
        let sim = SimulationConfig::default();
        Self {
            synth: EcgSynthParams::default(),
            adc: AdcConfig::default(),
            peak: sim.analysis.peak,
            delineation: sim.analysis.delineation,
            ranges: sim.analysis.ranges,
            vital_bounds: sim.analysis.vital_bounds,
            fog: sim.fog,
            link: sim.link,
        }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            peak: self.peak.clone(),
            delineation: self.delineation,
            ranges: self.ranges,
            vital_bounds: self.vital_bounds,
        }
    }

    pub fn simulation(&self) -> SimulationConfig {
        SimulationConfig { fog: self.fog, analysis: self.analysis(), link: self.link.clone(), ..Default::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_override() {
        let cfg: FileConfig = toml::from_str(
            "[peak]\nma_window_s = 0.5\n[link]\nbase_latency_ms = 10\n[delineation]\np_window_ms = [240, 80]\n",
        )
        .unwrap();
        assert_eq!(cfg.peak.ma_window_s, 0.5);
        assert_eq!(cfg.peak.bpm_min, PeakDetectionConfig::default().bpm_min);
        assert_eq!(cfg.link.base_latency_ms, 10.0);
        assert_eq!(cfg.delineation.p_window_ms, (240.0, 80.0));
        assert_eq!(cfg.fog, FileConfig::default().fog);
    }

    #[test]
    fn unknown_section_rejected() {
        assert!(toml::from_str::<FileConfig>("[nope]\nx = 1\n").is_err());
    }
}
