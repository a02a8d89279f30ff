//! Spectrum domain types and the deterministic preprocessing chain:
//! trimming, despiking, calibration offset, normalization, first-derivative
//! transform and its inverse, and train/test splitting.
//!
//! All operations take their inputs by reference and return new values.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DivaError, Result};
use crate::stats::median;

/// Relative tolerance on grid spacing uniformity.
pub const GRID_UNIFORMITY_TOL: f64 = 1e-6;

/// Ordered, uniformly spaced wavenumber axis in cm⁻¹.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WavenumberGrid {
    values: Vec<f64>,
}

impl WavenumberGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(DivaError::InvalidGrid(format!(
                "need at least 3 samples, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(DivaError::InvalidGrid(format!(
                "non-finite wavenumber at {i}"
            )));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] <= w[0]) {
            return Err(DivaError::InvalidGrid(format!(
                "not strictly increasing at index {}",
                i + 1
            )));
        }
        let step = (values[values.len() - 1] - values[0]) / (values.len() - 1) as f64;
        if let Some(i) = values
            .windows(2)
            .position(|w| ((w[1] - w[0]) - step).abs() > GRID_UNIFORMITY_TOL * step)
        {
            return Err(DivaError::InvalidGrid(format!(
                "non-uniform spacing at index {}",
                i + 1
            )));
        }
        Ok(Self { values })
    }

    /// Uniform grid `start, start + step, ...` with `len` samples.
    pub fn uniform(start: f64, step: f64, len: usize) -> Result<Self> {
        Self::new((0..len).map(|i| start + step * i as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Mean spacing; equal to every spacing within [`GRID_UNIFORMITY_TOL`].
    pub fn step(&self) -> f64 {
        (self.last() - self.first()) / (self.len() - 1) as f64
    }

    pub fn span(&self) -> f64 {
        self.last() - self.first()
    }

    /// Index of the sample nearest to `wavenumber`.
    pub fn nearest_index(&self, wavenumber: f64) -> usize {
        let pos = ((wavenumber - self.first()) / self.step()).round();
        pos.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    /// Grid of midpoints between consecutive samples; one sample shorter.
    pub fn midpoints(&self) -> Result<Self> {
        Self::new(
            self.values
                .windows(2)
                .map(|w| 0.5 * (w[0] + w[1]))
                .collect(),
        )
    }
}

impl TryFrom<Vec<f64>> for WavenumberGrid {
    type Error = DivaError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<WavenumberGrid> for Vec<f64> {
    fn from(grid: WavenumberGrid) -> Self {
        grid.values
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub condition: String,
    pub replicate_id: u32,
    pub location_id: u32,
}

impl SpectrumMeta {
    pub fn new(condition: impl Into<String>, replicate_id: u32, location_id: u32) -> Result<Self> {
        let condition = condition.into();
        if condition.is_empty() {
            return Err(DivaError::InvalidSpectrum("empty condition label".into()));
        }
        Ok(Self {
            condition,
            replicate_id,
            location_id,
        })
    }
}

/// Raw or preprocessed intensity spectrum I(ṽ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    grid: WavenumberGrid,
    intensities: Vec<f64>,
    meta: SpectrumMeta,
}

fn check_values(len: usize, values: &[f64]) -> Result<()> {
    if values.len() != len {
        return Err(DivaError::LengthMismatch {
            expected: len,
            got: values.len(),
        });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(DivaError::InvalidSpectrum(format!(
            "non-finite value at index {i}"
        )));
    }
    Ok(())
}

impl Spectrum {
    pub fn new(grid: WavenumberGrid, intensities: Vec<f64>, meta: SpectrumMeta) -> Result<Self> {
        check_values(grid.len(), &intensities)?;
        Ok(Self {
            grid,
            intensities,
            meta,
        })
    }

    pub fn grid(&self) -> &WavenumberGrid {
        &self.grid
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn meta(&self) -> &SpectrumMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensities.is_empty()
    }

    fn with_intensities(&self, intensities: Vec<f64>) -> Self {
        Self {
            grid: self.grid.clone(),
            intensities,
            meta: self.meta.clone(),
        }
    }
}

/// First-derivative spectrum D(ṽ) on the midpoint grid of its source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeSpectrum {
    grid: WavenumberGrid,
    values: Vec<f64>,
    meta: SpectrumMeta,
}

impl DerivativeSpectrum {
    pub fn new(grid: WavenumberGrid, values: Vec<f64>, meta: SpectrumMeta) -> Result<Self> {
        check_values(grid.len(), &values)?;
        Ok(Self { grid, values, meta })
    }

    pub fn grid(&self) -> &WavenumberGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn meta(&self) -> &SpectrumMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationScale {
    factor: f64,
}

impl NormalizationScale {
    pub fn new(factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(DivaError::DegenerateNormalization);
        }
        Ok(Self { factor })
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<DerivativeSpectrum>,
    pub test: Vec<DerivativeSpectrum>,
    /// Positions in the input list, in the order they were assigned.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

/// Keeps the samples with `lo <= ṽ <= hi`.
pub fn trim(s: &Spectrum, lo: f64, hi: f64) -> Result<Spectrum> {
    if !(lo < hi) {
        return Err(DivaError::InvalidConfig(format!(
            "trim window [{lo}, {hi}] is empty"
        )));
    }
    let keep: Vec<usize> = s
        .grid
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= lo && v <= hi)
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(DivaError::EmptyTrim);
    }
    let grid = WavenumberGrid::new(keep.iter().map(|&i| s.grid.values[i]).collect())?;
    let intensities = keep.iter().map(|&i| s.intensities[i]).collect();
    Ok(Spectrum {
        grid,
        intensities,
        meta: s.meta.clone(),
    })
}

/// Median of the window centred at each sample; truncated at the edges.
pub fn rolling_median(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let mut buf = Vec::with_capacity(window);
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            buf.clear();
            buf.extend_from_slice(&values[lo..hi]);
            median(&mut buf)
        })
        .collect()
}

/// Cosmic-ray removal.
///
/// Each sample's residual `r` against a rolling median is scored by a
/// modified z-score `|r| / (1.4826 · MAD)`. The MAD is the larger of the
/// local one (deviations of the window from its median) and the global one
/// (over the whole residual series), so that the curvature at the top of a
/// sharp band is not mistaken for a spike. Samples scoring above
/// `z_threshold` are replaced by the rolling median.
///
/// When the global MAD is zero the mean absolute residual (scaled by
/// √(π/2)) stands in for it; a spectrum whose residuals are all zero is
/// returned unchanged.
pub fn despike(s: &Spectrum, window: usize, z_threshold: f64) -> Result<Spectrum> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(DivaError::InvalidConfig(format!(
            "despike window must be odd and >= 3, got {window}"
        )));
    }
    if !(z_threshold > 0.0) {
        return Err(DivaError::InvalidConfig(format!(
            "despike threshold must be positive, got {z_threshold}"
        )));
    }
    let x = &s.intensities;
    let med = rolling_median(x, window);
    let residuals: Vec<f64> = x.iter().zip(&med).map(|(x, m)| x - m).collect();

    let mut abs_res: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    let mut global = median(&mut abs_res);
    if global == 0.0 {
        let mean_abs = residuals.iter().map(|r| r.abs()).sum::<f64>() / residuals.len() as f64;
        global = (std::f64::consts::PI / 2.0).sqrt() * mean_abs / 1.4826;
    }
    if global == 0.0 {
        return Ok(s.clone());
    }

    let half = window / 2;
    let mut buf = Vec::with_capacity(window);
    let intensities = (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            buf.clear();
            buf.extend(x[lo..hi].iter().map(|v| (v - med[i]).abs()));
            let local = median(&mut buf);
            let z = residuals[i].abs() / (1.4826 * local.max(global));
            if z > z_threshold {
                med[i]
            } else {
                x[i]
            }
        })
        .collect();
    Ok(s.with_intensities(intensities))
}

/// Shifts the wavenumber axis by `offset` cm⁻¹.
pub fn calibrate(s: &Spectrum, offset: f64) -> Result<Spectrum> {
    if !(offset.abs() < s.grid.span()) {
        return Err(DivaError::InvalidConfig(format!(
            "calibration offset {offset} exceeds grid span {}",
            s.grid.span()
        )));
    }
    let grid = WavenumberGrid::new(s.grid.values.iter().map(|v| v + offset).collect())?;
    Ok(Spectrum {
        grid,
        intensities: s.intensities.clone(),
        meta: s.meta.clone(),
    })
}

/// Divides every spectrum by the largest absolute intensity in the set.
pub fn normalize(ds: &[Spectrum]) -> Result<(Vec<Spectrum>, NormalizationScale)> {
    if ds.is_empty() {
        return Err(DivaError::InvalidSpectrum(
            "cannot normalize an empty dataset".into(),
        ));
    }
    let factor = ds
        .iter()
        .flat_map(|s| s.intensities.iter())
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let scale = NormalizationScale::new(factor)?;
    let out = ds
        .iter()
        .map(|s| s.with_intensities(s.intensities.iter().map(|v| v / factor).collect()))
        .collect();
    Ok((out, scale))
}

/// Forward difference `(I[i+1] - I[i]) / Δṽ`, relabelled to the midpoints.
pub fn differentiate(s: &Spectrum) -> Result<DerivativeSpectrum> {
    let step = s.grid.step();
    let values = s
        .intensities
        .windows(2)
        .map(|w| (w[1] - w[0]) / step)
        .collect();
    DerivativeSpectrum::new(s.grid.midpoints()?, values, s.meta.clone())
}

/// Cumulative integration back to an intensity spectrum on `anchor_grid`.
///
/// `anchor_value` fixes the integration constant: it becomes the first
/// intensity. With an anchor of zero the result is only defined up to that
/// unknown constant.
pub fn detransform(
    d: &DerivativeSpectrum,
    anchor_value: f64,
    anchor_grid: &WavenumberGrid,
) -> Result<Spectrum> {
    if anchor_grid.len() != d.len() + 1 {
        return Err(DivaError::GridMismatch(format!(
            "anchor grid has {} samples, derivative needs {}",
            anchor_grid.len(),
            d.len() + 1
        )));
    }
    let step = anchor_grid.step();
    let tol = GRID_UNIFORMITY_TOL * step.abs();
    if (d.grid.step() - step).abs() > tol {
        return Err(DivaError::GridMismatch(format!(
            "derivative step {} differs from anchor step {step}",
            d.grid.step()
        )));
    }
    let mids = anchor_grid.values.windows(2).map(|w| 0.5 * (w[0] + w[1]));
    if let Some(i) = mids
        .zip(&d.grid.values)
        .position(|(m, v)| (m - v).abs() > tol)
    {
        return Err(DivaError::GridMismatch(format!(
            "derivative sample {i} is not at the anchor grid midpoint"
        )));
    }
    if !anchor_value.is_finite() {
        return Err(DivaError::InvalidSpectrum("non-finite anchor value".into()));
    }

    let mut intensities = Vec::with_capacity(anchor_grid.len());
    intensities.push(anchor_value);
    let mut acc = anchor_value;
    for v in &d.values {
        acc += v * step;
        intensities.push(acc);
    }
    Spectrum::new(anchor_grid.clone(), intensities, d.meta.clone())
}

/// Seeded random partition; the first `round(fraction · n)` shuffled items
/// go to training.
pub fn split(ds: &[DerivativeSpectrum], fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DivaError::InvalidSplit(format!(
            "fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if ds.is_empty() {
        return Err(DivaError::InvalidSplit("empty dataset".into()));
    }
    let n = ds.len();
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(DivaError::InvalidSplit(format!(
            "{n} spectra at fraction {fraction} leave an empty partition"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let (train_idx, test_idx) = order.split_at(n_train);
    Ok(DatasetSplit {
        train: train_idx.iter().map(|&i| ds[i].clone()).collect(),
        test: test_idx.iter().map(|&i| ds[i].clone()).collect(),
        train_indices: train_idx.to_vec(),
        test_indices: test_idx.to_vec(),
        seed,
    })
}

/// Averages spectra sharing a (condition, location) pair into one profile.
/// Groups are emitted in order of first appearance; replicate ids become 0.
pub fn average_replicates(ds: &[Spectrum]) -> Result<Vec<Spectrum>> {
    let mut groups: Vec<(SpectrumMeta, Vec<&Spectrum>)> = Vec::new();
    for s in ds {
        let key = SpectrumMeta {
            replicate_id: 0,
            ..s.meta.clone()
        };
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(s),
            None => groups.push((key, vec![s])),
        }
    }
    groups
        .into_iter()
        .map(|(meta, members)| {
            let grid = members[0].grid.clone();
            if let Some(bad) = members.iter().find(|m| m.grid != grid) {
                return Err(DivaError::GridMismatch(format!(
                    "replicate {} of {} has a different grid",
                    bad.meta.replicate_id, bad.meta.condition
                )));
            }
            let n = members.len() as f64;
            let mut mean = vec![0.0; grid.len()];
            for m in &members {
                for (acc, v) in mean.iter_mut().zip(&m.intensities) {
                    *acc += v;
                }
            }
            mean.iter_mut().for_each(|v| *v /= n);
            Spectrum::new(grid, mean, meta)
        })
        .collect()
}
