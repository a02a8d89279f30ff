//! Pipeline configuration, read from JSON. Every field has a default, so
//! `{}` is a valid file once `paths.input` is supplied.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{DivaError, Result};
use crate::vae::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimWindow {
    pub lo: f64,
    pub hi: f64,
}

impl Default for TrimWindow {
    fn default() -> Self {
        Self {
            lo: 600.0,
            hi: 1750.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DespikeConfig {
    pub enabled: bool,
    pub window: usize,
    pub z_threshold: f64,
}

impl Default for DespikeConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            window: 5,
            z_threshold: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseFloorConfig {
    /// Peaks count as significant above `multiplier ×` the median pure-noise
    /// peak area.
    pub multiplier: f64,
    /// Number of simulated pure-noise derivative spectra.
    pub simulations: usize,
}

impl Default for NoiseFloorConfig {
    fn default() -> Self {
        Self {
            multiplier: 3.0,
            simulations: 64,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// Input CSV of raw spectra.
    pub input: Option<PathBuf>,
    /// Output directory, created when missing.
    pub out_dir: Option<PathBuf>,
    /// Checkpoint to analyze with; when absent the `analyze` and `report`
    /// commands look for `model.ckpt` in the output directory.
    pub model: Option<PathBuf>,
}

/// A wavenumber with a user-supplied assignment, e.g. 1521 → "carotenoids".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub wavenumber: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seeds the split, initialization, shuffles and sampling noise.
    /// Overrides `train.seed`.
    pub seed: u64,
    pub trim: TrimWindow,
    pub despike: DespikeConfig,
    /// Rigid wavenumber shift applied before trimming, cm⁻¹.
    pub calibration_offset: f64,
    /// Average replicates sharing condition and location before
    /// normalization.
    pub average_replicates: bool,
    pub train_fraction: f64,
    pub train: TrainConfig,
    pub top_k: usize,
    /// Also feed test spectra into the cluster medians.
    pub include_test_in_medians: bool,
    pub noise_floor: NoiseFloorConfig,
    pub annotations: Vec<Annotation>,
    /// Largest distance, cm⁻¹, at which an annotation is attached to a peak.
    pub annotation_tolerance: f64,
    pub paths: Paths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trim: TrimWindow::default(),
            despike: DespikeConfig::default(),
            calibration_offset: 0.0,
            average_replicates: false,
            train_fraction: 0.9,
            train: TrainConfig::default(),
            top_k: 5,
            include_test_in_medians: false,
            noise_floor: NoiseFloorConfig::default(),
            annotations: Vec::new(),
            annotation_tolerance: 3.0,
            paths: Paths::default(),
        }
    }
}

fn bad(msg: impl Into<String>) -> DivaError {
    DivaError::InvalidConfig(msg.into())
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.train.seed = cfg.seed;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DivaError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.trim.lo < self.trim.hi) {
            return Err(bad(format!(
                "trim window [{}, {}] is empty",
                self.trim.lo, self.trim.hi
            )));
        }
        if self.despike.enabled
            && (self.despike.window < 3 || self.despike.window.is_multiple_of(2))
        {
            return Err(bad(format!(
                "despike window must be odd and >= 3, got {}",
                self.despike.window
            )));
        }
        if self.despike.enabled && !(self.despike.z_threshold > 0.0) {
            return Err(bad("despike z_threshold must be positive"));
        }
        if !self.calibration_offset.is_finite() {
            return Err(bad("calibration_offset must be finite"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(bad(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        self.train.validate()?;
        if self.train.seed != self.seed {
            return Err(bad("train.seed must equal seed"));
        }
        if self.top_k == 0 {
            return Err(bad("top_k must be at least 1"));
        }
        if !(self.noise_floor.multiplier > 0.0) || self.noise_floor.simulations == 0 {
            return Err(bad(
                "noise_floor needs a positive multiplier and at least one simulation",
            ));
        }
        if !(self.annotation_tolerance >= 0.0) {
            return Err(bad("annotation_tolerance must be non-negative"));
        }
        if let Some(a) = self
            .annotations
            .iter()
            .find(|a| !a.wavenumber.is_finite() || a.label.is_empty())
        {
            return Err(bad(format!("bad annotation {a:?}")));
        }
        Ok(())
    }

    /// The annotation nearest to `position` within the tolerance.
    pub fn annotation_for(&self, position: f64) -> Option<&str> {
        self.annotations
            .iter()
            .filter(|a| (a.wavenumber - position).abs() <= self.annotation_tolerance)
            .min_by(|a, b| {
                (a.wavenumber - position)
                    .abs()
                    .total_cmp(&(b.wavenumber - position).abs())
            })
            .map(|a| a.label.as_str())
    }

    pub fn input_path(&self) -> Result<&Path> {
        self.paths
            .input
            .as_deref()
            .ok_or_else(|| bad("paths.input is not set"))
    }

    pub fn out_dir(&self) -> &Path {
        self.paths.out_dir.as_deref().unwrap_or(Path::new("."))
    }

    pub fn model_path(&self) -> PathBuf {
        self.paths
            .model
            .clone()
            .unwrap_or_else(|| self.out_dir().join(crate::io::pipeline::MODEL_FILE))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = PipelineConfig::from_json("{}").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!((cfg.trim.lo, cfg.trim.hi), (600.0, 1750.0));
        assert_eq!((cfg.train.epochs, cfg.train.batch_size), (3000, 40));
        assert_eq!(cfg.train.learning_rate, 1e-3);
        assert_eq!(cfg.top_k, 5);
        assert!(!cfg.average_replicates && !cfg.include_test_in_medians);
        cfg.validate().unwrap();
    }

    #[test]
    fn seed_drives_training_seed() {
        let cfg = PipelineConfig::from_json(r#"{"seed": 9, "train": {"epochs": 4}}"#).unwrap();
        assert_eq!(cfg.train.seed, 9);
        assert_eq!(cfg.train.batch_size, 40);
        assert_eq!(cfg.clone().with_seed(3).train.seed, 3);
        let mut off = cfg;
        off.train.seed = 1;
        assert!(off.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut cfg = PipelineConfig::default().with_seed(5);
        cfg.annotations.push(Annotation {
            wavenumber: 1521.0,
            label: "carotenoids".into(),
        });
        cfg.paths.input = Some("data/raw.csv".into());
        assert_eq!(PipelineConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(PipelineConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"top_k": -1}"#).is_err());
        for text in [
            r#"{"trim": {"lo": 900, "hi": 800}}"#,
            r#"{"despike": {"window": 4}}"#,
            r#"{"train_fraction": 1.0}"#,
            r#"{"top_k": 0}"#,
            r#"{"train": {"epochs": 0}}"#,
        ] {
            assert!(
                PipelineConfig::from_json(text).unwrap().validate().is_err(),
                "{text}"
            );
        }
    }

    #[test]
    fn annotation_lookup() {
        let cfg = PipelineConfig {
            annotations: vec![
                Annotation {
                    wavenumber: 1150.0,
                    label: "a".into(),
                },
                Annotation {
                    wavenumber: 1155.0,
                    label: "b".into(),
                },
            ],
            ..PipelineConfig::default()
        };
        assert_eq!(cfg.annotation_for(1151.0), Some("a"));
        assert_eq!(cfg.annotation_for(1154.0), Some("b"));
        assert_eq!(cfg.annotation_for(1170.0), None);
    }
}
