//! Synthetic Raman spectra with known peaks, used as ground truth for the
//! whole workflow.
//!
//! A spectrum is a polynomial fluorescence baseline (optionally with a broad
//! Gaussian hump), plus Lorentzian or Gaussian lines, plus white Gaussian
//! noise and single-sample cosmic-ray spikes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{DivaError, Result};
use crate::peaks::reference;
use crate::spectrum::{differentiate, Spectrum, SpectrumMeta, WavenumberGrid};

/// Replicates sharing one acquisition location.
pub const REPLICATES_PER_LOCATION: u32 = 5;

/// Peak positions of the light-stress corpus, cm⁻¹.
pub const LIGHT_STRESS_CENTERS: [f64; 5] = [742.0, 1150.0, 1180.0, 1318.0, 1521.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakShape {
    Gaussian,
    Lorentzian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSpec {
    pub center: f64,
    pub amplitude: f64,
    /// HWHM for Lorentzian lines, σ for Gaussian ones.
    pub width: f64,
    pub shape: PeakShape,
}

impl PeakSpec {
    pub fn lorentzian(center: f64, amplitude: f64, width: f64) -> Self {
        Self {
            center,
            amplitude,
            width,
            shape: PeakShape::Lorentzian,
        }
    }

    pub fn gaussian(center: f64, amplitude: f64, width: f64) -> Self {
        Self {
            center,
            amplitude,
            width,
            shape: PeakShape::Gaussian,
        }
    }

    pub fn eval(&self, v: f64) -> f64 {
        let x = (v - self.center) / self.width;
        match self.shape {
            PeakShape::Lorentzian => self.amplitude / (1.0 + x * x),
            PeakShape::Gaussian => self.amplitude * (-0.5 * x * x).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hump {
    pub center: f64,
    pub amplitude: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    /// Polynomial coefficients, constant term first, in `t ∈ [0, 1]` across
    /// the grid.
    pub coefficients: Vec<f64>,
    #[serde(default)]
    pub hump: Option<Hump>,
}

impl BaselineSpec {
    pub fn eval(&self, grid: &WavenumberGrid) -> Vec<f64> {
        let (lo, span) = (grid.first(), grid.span());
        grid.values()
            .iter()
            .map(|&v| {
                let t = (v - lo) / span;
                let poly = self
                    .coefficients
                    .iter()
                    .rev()
                    .fold(0.0, |acc, c| acc * t + c);
                let hump = self.hump.as_ref().map_or(0.0, |h| {
                    let x = (v - h.center) / h.width;
                    h.amplitude * (-0.5 * x * x).exp()
                });
                poly + hump
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub label: String,
    pub peaks: Vec<PeakSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub grid: WavenumberGrid,
    pub conditions: Vec<ConditionSpec>,
    pub baseline: BaselineSpec,
    pub noise_sigma: f64,
    pub spike_probability: f64,
    pub spike_amplitude: f64,
    pub replicates_per_condition: u32,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DivaError::InvalidConfig(m));
        if self.conditions.is_empty() {
            return bad("at least one condition is required".into());
        }
        if self.replicates_per_condition == 0 {
            return bad("replicates_per_condition must be at least 1".into());
        }
        if !(self.noise_sigma >= 0.0) {
            return bad(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            ));
        }
        if !(0.0..=1.0).contains(&self.spike_probability) {
            return bad(format!(
                "spike_probability {} outside [0, 1]",
                self.spike_probability
            ));
        }
        if !(self.spike_amplitude > 0.0) {
            return bad("spike_amplitude must be positive".into());
        }
        if self.baseline.coefficients.len() > 5 {
            return bad("baseline polynomial degree exceeds 4".into());
        }
        if let Some(h) = &self.baseline.hump {
            if h.width < 200.0 {
                return bad(format!("baseline hump width {} is below 200 cm-1", h.width));
            }
        }
        if self.baseline.eval(&self.grid).iter().any(|&b| b < 0.0) {
            return bad("baseline is negative somewhere on the grid".into());
        }
        for (i, c) in self.conditions.iter().enumerate() {
            if c.label.is_empty() || c.label.contains([':', ',']) {
                return bad(format!("invalid condition label {:?}", c.label));
            }
            if self.conditions[..i].iter().any(|o| o.label == c.label) {
                return bad(format!("duplicate condition label {:?}", c.label));
            }
            for p in &c.peaks {
                if !(p.center >= self.grid.first() && p.center <= self.grid.last()) {
                    return bad(format!("peak at {} lies outside the grid", p.center));
                }
                if !(p.width > 0.0 && p.amplitude > 0.0) {
                    return bad(format!(
                        "peak at {} needs positive width and amplitude",
                        p.center
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn condition(&self, label: &str) -> Result<&ConditionSpec> {
        self.conditions
            .iter()
            .find(|c| c.label == label)
            .ok_or_else(|| DivaError::UnknownLabel(label.to_string()))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.conditions.iter().map(|c| c.label.as_str())
    }
}

/// Baseline plus peaks, no noise or spikes.
pub fn noiseless(cfg: &SynthConfig, label: &str) -> Result<Vec<f64>> {
    let cond = cfg.condition(label)?;
    let mut values = cfg.baseline.eval(&cfg.grid);
    for (v, &w) in values.iter_mut().zip(cfg.grid.values()) {
        *v += cond.peaks.iter().map(|p| p.eval(w)).sum::<f64>();
    }
    Ok(values)
}

/// One spectrum for `label`, drawing noise and spikes from `rng`.
pub fn gen_spectrum(
    cfg: &SynthConfig,
    label: &str,
    replicate_id: u32,
    rng: &mut impl Rng,
) -> Result<Spectrum> {
    let mut values = noiseless(cfg, label)?;
    let noise = Normal::new(0.0, cfg.noise_sigma)
        .map_err(|e| DivaError::InvalidConfig(format!("noise: {e}")))?;
    for v in &mut values {
        *v += noise.sample(rng);
        if rng.random_bool(cfg.spike_probability) {
            *v += cfg.spike_amplitude;
        }
    }
    let location_id = (replicate_id.saturating_sub(1)) / REPLICATES_PER_LOCATION + 1;
    let meta = SpectrumMeta::new(label, replicate_id, location_id)?;
    Spectrum::new(cfg.grid.clone(), values, meta)
}

/// Seed for one spectrum, derived from the corpus seed and its position.
pub fn spectrum_seed(corpus_seed: u64, condition_index: usize, replicate_id: u32) -> u64 {
    // splitmix64 finaliser over the packed coordinates
    let mut z = corpus_seed
        ^ (condition_index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (replicate_id as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrumSeed {
    pub condition: String,
    pub replicate_id: u32,
    pub seed: u64,
}

/// Everything needed to regenerate a corpus exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub config: SynthConfig,
    pub spectra: Vec<SpectrumSeed>,
}

/// `replicates_per_condition` spectra per condition, conditions in
/// declaration order.
pub fn gen_dataset(cfg: &SynthConfig) -> Result<Vec<Spectrum>> {
    Ok(gen_dataset_with_manifest(cfg)?.0)
}

pub fn gen_dataset_with_manifest(cfg: &SynthConfig) -> Result<(Vec<Spectrum>, CorpusManifest)> {
    cfg.validate()?;
    let mut spectra = Vec::new();
    let mut seeds = Vec::new();
    for (ci, cond) in cfg.conditions.iter().enumerate() {
        for rep in 1..=cfg.replicates_per_condition {
            let seed = spectrum_seed(cfg.seed, ci, rep);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            spectra.push(gen_spectrum(cfg, &cond.label, rep, &mut rng)?);
            seeds.push(SpectrumSeed {
                condition: cond.label.clone(),
                replicate_id: rep,
                seed,
            });
        }
    }
    let manifest = CorpusManifest {
        config: cfg.clone(),
        spectra: seeds,
    };
    Ok((spectra, manifest))
}

/// Rebuilds a corpus from its manifest using the recorded per-spectrum seeds.
pub fn regenerate(manifest: &CorpusManifest) -> Result<Vec<Spectrum>> {
    manifest.config.validate()?;
    manifest
        .spectra
        .iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            gen_spectrum(&manifest.config, &s.condition, s.replicate_id, &mut rng)
        })
        .collect()
}

/// Planted peak centres for `label`, ordered by the significance the
/// reference detector assigns them on the noiseless derivative. At most `k`
/// centres are returned.
///
/// Each detected peak is attributed to the nearest planted centre within
/// `2 · grid step`; peaks not attributable to a planted line are skipped.
pub fn ground_truth(cfg: &SynthConfig, label: &str, k: usize) -> Result<Vec<f64>> {
    let cond = cfg.condition(label)?;
    let clean = Spectrum::new(
        cfg.grid.clone(),
        noiseless(cfg, label)?,
        SpectrumMeta::new(label, 0, 0)?,
    )?;
    let d = differentiate(&clean)?;
    let ranked = reference::detect(d.grid().values(), d.values());
    let tol = 2.0 * cfg.grid.step();
    let mut out: Vec<f64> = Vec::new();
    for rec in &ranked.records {
        let nearest = cond
            .peaks
            .iter()
            .map(|p| p.center)
            .filter(|c| (c - rec.position).abs() <= tol)
            .min_by(|a, b| {
                (a - rec.position)
                    .abs()
                    .total_cmp(&(b - rec.position).abs())
            });
        if let Some(c) = nearest {
            if !out.contains(&c) {
                out.push(c);
            }
        }
        if out.len() == k {
            break;
        }
    }
    Ok(out)
}

/// Relative line strengths of the light-stress corpus per condition,
/// applied to [742, 1150, 1180, 1318, 1521] cm⁻¹.
pub const LIGHT_STRESS_SCALINGS: [(&str, [f64; 5]); 4] = [
    ("white_light", [1.0, 1.0, 1.0, 1.0, 1.0]),
    ("high_light", [1.1, 1.35, 1.35, 1.1, 1.35]),
    ("low_light", [0.95, 0.8, 0.8, 0.95, 0.8]),
    ("deep_shade", [0.85, 0.6, 0.6, 0.85, 0.6]),
];

/// Base amplitudes (detector counts) of the planted lines.
pub const LIGHT_STRESS_AMPLITUDES: [f64; 5] = [300.0, 1500.0, 950.0, 600.0, 2400.0];

/// Lorentzian HWHM of the planted lines, cm⁻¹.
pub const LIGHT_STRESS_HWHM: f64 = 4.0;

fn light_stress_baseline() -> BaselineSpec {
    // decaying fluorescence with its minimum near 1620 cm⁻¹ on 550–1800
    let t_min = (1620.0 - 550.0) / 1250.0;
    let c2 = 600.0;
    BaselineSpec {
        coefficients: vec![1000.0, -2.0 * c2 * t_min, c2],
        hump: None,
    }
}

/// Four-condition corpus modelled on a light-stress study: 40 replicates
/// per condition on a 550–1800 cm⁻¹ grid at 1 cm⁻¹.
pub fn light_stress_config(seed: u64) -> SynthConfig {
    let conditions = LIGHT_STRESS_SCALINGS
        .iter()
        .map(|(label, scale)| ConditionSpec {
            label: label.to_string(),
            peaks: LIGHT_STRESS_CENTERS
                .iter()
                .zip(LIGHT_STRESS_AMPLITUDES)
                .zip(scale)
                .map(|((&c, a), s)| PeakSpec::lorentzian(c, a * s, LIGHT_STRESS_HWHM))
                .collect(),
        })
        .collect();
    SynthConfig {
        grid: WavenumberGrid::uniform(550.0, 1.0, 1251).expect("static grid"),
        conditions,
        baseline: light_stress_baseline(),
        noise_sigma: 5.0,
        spike_probability: 0.001,
        spike_amplitude: 5000.0,
        replicates_per_condition: 40,
        seed,
    }
}

/// Same acquisition model as [`light_stress_config`] with no planted lines.
pub fn baseline_only_config(seed: u64) -> SynthConfig {
    let mut cfg = light_stress_config(seed);
    for c in &mut cfg.conditions {
        c.peaks.clear();
    }
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SynthConfig {
        SynthConfig {
            grid: WavenumberGrid::uniform(600.0, 1.0, 1151).unwrap(),
            conditions: vec![ConditionSpec {
                label: "a".into(),
                peaks: vec![PeakSpec::gaussian(1000.3, 500.0, 6.0)],
            }],
            baseline: BaselineSpec {
                coefficients: vec![200.0, -50.0, 30.0],
                hump: Some(Hump {
                    center: 900.0,
                    amplitude: 40.0,
                    width: 300.0,
                }),
            },
            noise_sigma: 0.0,
            spike_probability: 0.0,
            spike_amplitude: 1.0,
            replicates_per_condition: 3,
            seed: 1,
        }
    }

    #[test]
    fn empty_peaks_give_pure_baseline() {
        let mut cfg = small_config();
        cfg.conditions[0].peaks.clear();
        let s = gen_spectrum(&cfg, "a", 1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(s.intensities(), cfg.baseline.eval(&cfg.grid).as_slice());
    }

    #[test]
    fn noiseless_peak_argmax_at_nearest_sample() {
        let cfg = small_config();
        let s = gen_spectrum(&cfg, "a", 1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let base = cfg.baseline.eval(&cfg.grid);
        let residual: Vec<f64> = s
            .intensities()
            .iter()
            .zip(&base)
            .map(|(a, b)| a - b)
            .collect();
        let argmax = residual
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, cfg.grid.nearest_index(1000.3));
    }

    #[test]
    fn noise_level_matches_nominal() {
        let mut cfg = small_config();
        cfg.noise_sigma = 0.01 * 500.0;
        let clean = noiseless(&cfg, "a").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut residuals = Vec::new();
        for _ in 0..200 {
            let s = gen_spectrum(&cfg, "a", 1, &mut rng).unwrap();
            residuals.extend(s.intensities().iter().zip(&clean).map(|(a, b)| a - b));
        }
        let n = residuals.len() as f64;
        let mean = residuals.iter().sum::<f64>() / n;
        let sd = (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd / cfg.noise_sigma - 1.0).abs() < 0.15, "sd {sd}");
    }

    #[test]
    fn unknown_label_and_invalid_configs() {
        let cfg = small_config();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            gen_spectrum(&cfg, "zz", 1, &mut rng),
            Err(DivaError::UnknownLabel(_))
        ));

        let mut neg = small_config();
        neg.baseline.coefficients = vec![-1.0];
        assert!(neg.validate().is_err());
        let mut outside = small_config();
        outside.conditions[0].peaks[0].center = 100.0;
        assert!(outside.validate().is_err());
        let mut dup = small_config();
        dup.conditions.push(dup.conditions[0].clone());
        assert!(dup.validate().is_err());
        let mut narrow = small_config();
        narrow.baseline.hump.as_mut().unwrap().width = 50.0;
        assert!(narrow.validate().is_err());
    }

    #[test]
    fn dataset_shape_and_determinism() {
        let cfg = light_stress_config(3);
        let (ds, manifest) = gen_dataset_with_manifest(&cfg).unwrap();
        assert_eq!(ds.len(), 160);
        for label in cfg.labels() {
            assert_eq!(
                ds.iter().filter(|s| s.meta().condition == label).count(),
                40
            );
        }
        assert_eq!(ds, gen_dataset(&cfg).unwrap());
        assert_eq!(ds, regenerate(&manifest).unwrap());
        assert_ne!(ds, gen_dataset(&light_stress_config(4)).unwrap());
        assert_eq!(ds[6].meta().location_id, 2);
    }

    #[test]
    fn ground_truth_single_and_tied_peaks() {
        let cfg = small_config();
        assert_eq!(ground_truth(&cfg, "a", 5).unwrap(), vec![1000.3]);

        // U-shaped baseline symmetric about 1131.5 so both lines are bracketed
        let mut twin = small_config();
        twin.grid = WavenumberGrid::uniform(500.0, 1.0, 1264).unwrap();
        twin.baseline = BaselineSpec {
            coefficients: vec![100.0, -400.0, 400.0],
            hump: None,
        };
        twin.conditions[0].peaks = vec![
            PeakSpec::lorentzian(742.0, 100.0, 4.0),
            PeakSpec::lorentzian(1521.0, 100.0, 4.0),
        ];
        let gt = ground_truth(&twin, "a", 5).unwrap();
        assert_eq!(gt.len(), 2);
        let d = differentiate(
            &Spectrum::new(
                twin.grid.clone(),
                noiseless(&twin, "a").unwrap(),
                SpectrumMeta::new("a", 0, 0).unwrap(),
            )
            .unwrap(),
        )
        .unwrap();
        let ranked = crate::peaks::detect_spectrum(&d);
        let (a, b) = (ranked.records[0], ranked.records[1]);
        assert!((a.area - b.area).abs() < 1e-9 * a.area);
        if a.area == b.area {
            assert_eq!(gt, vec![742.0, 1521.0]);
        }
        assert!(ground_truth(&twin, "nope", 5).is_err());
    }

    #[test]
    fn ground_truth_matches_independent_ranking() {
        let cfg = light_stress_config(0);
        for label in cfg.labels() {
            let clean = Spectrum::new(
                cfg.grid.clone(),
                noiseless(&cfg, label).unwrap(),
                SpectrumMeta::new(label, 0, 0).unwrap(),
            )
            .unwrap();
            let ranked = crate::peaks::detect_spectrum(&differentiate(&clean).unwrap());
            let mut planted: Vec<(f64, f64)> = LIGHT_STRESS_CENTERS
                .iter()
                .map(|&c| {
                    let rec = ranked
                        .records
                        .iter()
                        .find(|r| (r.position - c).abs() <= 2.0)
                        .expect("planted line detected");
                    (c, rec.area)
                })
                .collect();
            planted.sort_by(|a, b| b.1.total_cmp(&a.1));
            let expected: Vec<f64> = planted.iter().map(|p| p.0).collect();
            assert_eq!(ground_truth(&cfg, label, 5).unwrap(), expected, "{label}");
        }
    }

    #[test]
    fn noiseless_derivative_crossings_near_centers() {
        let mut cfg = light_stress_config(0);
        cfg.noise_sigma = 0.0;
        cfg.spike_probability = 0.0;
        for label in cfg.labels() {
            let s = gen_spectrum(&cfg, label, 1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            let d = differentiate(&s).unwrap();
            let crossings = crate::peaks::find_zero_crossings(&d);
            for c in LIGHT_STRESS_CENTERS {
                let hit = crossings.iter().any(|x| {
                    x.direction == crate::peaks::Direction::PosToNeg
                        && (x.position - c).abs() <= 0.5
                });
                assert!(hit, "{label}: no crossing within half a step of {c}");
            }
        }
    }
}
