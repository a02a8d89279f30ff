//! Noise floor for peak areas.
//!
//! White noise of standard deviation σ on the intensity axis is estimated
//! from second differences, whose noise part has variance 6σ². Pure-noise
//! derivative spectra at that level are then simulated and run through the
//! peak detector. The median of their peak areas, times a multiplier, is the
//! floor a real peak has to clear.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{DivaError, Result};
use crate::peaks;
use crate::spectrum::{Spectrum, WavenumberGrid};
use crate::stats::{mad_about, median};

const MAD_TO_SIGMA: f64 = 1.4826;
const STREAM_SALT: u64 = 0x6e6f_6973_6566_6c72;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseFloor {
    pub sigma_estimate: f64,
    pub median_noise_area: f64,
    pub multiplier: f64,
    pub threshold: f64,
}

/// Robust white-noise σ of one spectrum.
pub fn sigma_of(values: &[f64]) -> f64 {
    if values.len() < 3 {
        return 0.0;
    }
    let mut d2: Vec<f64> = values
        .windows(3)
        .map(|w| w[2] - 2.0 * w[1] + w[0])
        .collect();
    let center = median(&mut d2);
    MAD_TO_SIGMA * mad_about(&d2, center) / 6f64.sqrt()
}

/// Median of the per-spectrum estimates.
pub fn estimate_sigma(ds: &[Spectrum]) -> f64 {
    let mut each: Vec<f64> = ds.iter().map(|s| sigma_of(s.intensities())).collect();
    if each.is_empty() {
        0.0
    } else {
        median(&mut each)
    }
}

/// Simulates `simulations` white-noise intensity spectra of σ `sigma` on
/// `grid`, differentiates them and collects every peak area.
pub fn noise_floor(
    grid: &WavenumberGrid,
    sigma: f64,
    simulations: usize,
    multiplier: f64,
    seed: u64,
) -> Result<NoiseFloor> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(DivaError::InvalidConfig(format!(
            "noise sigma must be finite and >= 0, got {sigma}"
        )));
    }
    let mid = grid.midpoints()?;
    let step = grid.step();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ STREAM_SALT);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut areas = Vec::new();
    let mut x = vec![0.0; grid.len()];
    for _ in 0..simulations {
        for v in x.iter_mut() {
            *v = sigma * normal.sample(&mut rng);
        }
        let d: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]) / step).collect();
        areas.extend(
            peaks::detect(mid.values(), &d)
                .records
                .iter()
                .map(|r| r.area),
        );
    }
    let median_noise_area = if areas.is_empty() {
        0.0
    } else {
        median(&mut areas)
    };
    Ok(NoiseFloor {
        sigma_estimate: sigma,
        median_noise_area,
        multiplier,
        threshold: multiplier * median_noise_area,
    })
}
