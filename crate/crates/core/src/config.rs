//! Every tunable of the pipeline in one place.

use crate::cnn::CnnHyper;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::mlp::MlpHyper;
use crate::segment::SegmentConfig;
use crate::tracks::{TrackerConfig, VocalActivityConfig};

/// Spectrogram used for pitch and energy tracking.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AnalysisConfig {
    /// Audio is downsampled to this rate before analysis.
    pub sample_rate: u32,
    pub win_s: f64,
    pub hop_s: f64,
    pub n_dft: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            sample_rate: 8000,
            win_s: 0.04,
            hop_s: 0.01,
            n_dft: 1024,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !crate::dsp::ACCEPTED_RATES.contains(&self.sample_rate) {
            return Err(Error::invalid(alloc::format!("analysis rate {} not supported", self.sample_rate)));
        }
        if !(self.win_s > 0.0) || !(self.hop_s > 0.0) || self.n_dft < 2 {
            return Err(Error::invalid("analysis window, hop and DFT size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ClassifyConfig {
    /// Frames with `p_taan ≥ threshold` are taan.
    pub threshold: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig { threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BootstrapConfig {
    pub em_max_iter: usize,
    pub em_tol: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            em_max_iter: 100,
            em_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EvalConfig {
    /// Sum overlaps of all detections toward the 50% retrieval rule.
    pub cumulative_overlap: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            cumulative_overlap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PipelineConfig {
    pub analysis: AnalysisConfig,
    pub tracker: TrackerConfig,
    pub vocal_activity: VocalActivityConfig,
    pub features: FeatureConfig,
    pub mlp: MlpHyper,
    pub cnn: CnnHyper,
    pub classify: ClassifyConfig,
    pub segment: SegmentConfig,
    pub bootstrap: BootstrapConfig,
    pub eval: EvalConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.analysis.validate()?;
        self.tracker.validate()?;
        self.vocal_activity.validate()?;
        self.features.validate()?;
        self.mlp.validate()?;
        self.cnn.validate()?;
        self.segment.validate()?;
        if !(0.0..=1.0).contains(&self.classify.threshold) {
            return Err(Error::invalid("classification threshold must lie in [0, 1]"));
        }
        if !(self.bootstrap.em_tol >= 0.0) {
            return Err(Error::invalid("EM tolerance must be non-negative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_documented() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(c.tracker.f_min_hz, 80.0);
        assert_eq!(c.tracker.f_max_hz, 600.0);
        assert_eq!(c.vocal_activity.median_len, 5);
        assert_eq!(c.features.peak_lo_bin, 2);
        assert_eq!(c.features.peak_hi_bin, 25);
        assert_eq!(c.features.smoothing_s, 5.0);
        assert_eq!((c.mlp.hidden, c.mlp.lr, c.mlp.epochs, c.mlp.batch), (300, 0.05, 200, 32));
        assert_eq!((c.cnn.epochs, c.cnn.lr, c.cnn.lr_halve_every), (60, 0.1, 10));
        assert_eq!((c.segment.half_width_s, c.segment.rel_threshold), (5.0, 0.3));
        assert_eq!((c.segment.max_vocal_gap_s, c.segment.max_instrumental_gap_s), (20.0, 50.0));
        assert_eq!(c.classify.threshold, 0.5);
    }
}
