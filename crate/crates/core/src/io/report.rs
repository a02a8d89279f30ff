//! The JSON peak report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use crate::error::{DivaError, Result};
use crate::latent::SeparationRow;
use crate::noise::NoiseFloor;
use crate::vae::EpochLoss;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedPeak {
    /// Interpolated positive-to-negative crossing, cm⁻¹.
    pub position: f64,
    pub rounded_index: usize,
    pub area: f64,
    pub above_noise_floor: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    /// Spectra whose latent means fed the median.
    pub members: usize,
    pub latent_median: Vec<f64>,
    pub peaks: Vec<ReportedPeak>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub first: EpochLoss,
    pub last: EpochLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub seed: u64,
    pub model_checksum: String,
    pub normalization_factor: f64,
    /// Length of the derivative spectra the model consumes.
    pub feature_count: usize,
    pub train_count: usize,
    pub test_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingSummary>,
    pub noise_floor: NoiseFloor,
    pub conditions: Vec<ConditionReport>,
    pub separation: Vec<SeparationRow>,
    pub config: PipelineConfig,
}

impl PeakReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| DivaError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DivaError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn condition(&self, label: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.condition == label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PeakReport {
        PeakReport {
            seed: 11,
            model_checksum: "ab".repeat(32),
            normalization_factor: 3625.123456789012,
            feature_count: 1150,
            train_count: 144,
            test_count: 16,
            training: Some(TrainingSummary {
                epochs: 2,
                first: EpochLoss {
                    recon: 0.1,
                    kl: 1.0 / 3.0,
                    elbo: 0.1 + 1.0 / 3.0,
                },
                last: EpochLoss {
                    recon: 0.01,
                    kl: 2e-9,
                    elbo: 0.010000002,
                },
            }),
            noise_floor: NoiseFloor {
                sigma_estimate: 0.0013,
                median_noise_area: 0.0041,
                multiplier: 3.0,
                threshold: 0.0123,
            },
            conditions: vec![ConditionReport {
                condition: "high_light".into(),
                members: 36,
                latent_median: vec![-1.2345678901234567e-5, 0.1],
                peaks: vec![
                    ReportedPeak {
                        position: 1521.0042,
                        rounded_index: 921,
                        area: 0.5844,
                        above_noise_floor: true,
                        annotation: Some("carotenoids".into()),
                    },
                    ReportedPeak {
                        position: 742.3,
                        rounded_index: 142,
                        area: f64::MIN_POSITIVE,
                        above_noise_floor: false,
                        annotation: None,
                    },
                ],
            }],
            separation: vec![SeparationRow {
                first: "a".into(),
                second: "b".into(),
                inter_median_distance: 0.7,
                pooled_intra_mad: 0.1,
            }],
            config: PipelineConfig::default(),
        }
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let r = sample();
        let text = r.to_json();
        let back = PeakReport::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json(), text);
        assert!(!text.contains("\"annotation\": null"));
        assert_eq!(r.condition("high_light").unwrap().peaks.len(), 2);
        assert!(r.condition("x").is_none());
    }
}
