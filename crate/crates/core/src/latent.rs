//! Latent-space embedding, per-condition cluster medians, and decoding of
//! medians into characteristic derivative spectra.
//!
//! Points are the encoder means μ; no sampling is involved, so every
//! operation here is deterministic. Clusters are the point sets sharing a
//! condition label.

use serde::{Deserialize, Serialize};

use crate::error::{DivaError, Result};
use crate::spectrum::{DerivativeSpectrum, SpectrumMeta, WavenumberGrid};
use crate::stats::{mad_about, median};
use crate::vae::VaeModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPoint {
    pub meta: SpectrumMeta,
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatentEmbedding {
    pub points: Vec<LatentPoint>,
}

impl LatentEmbedding {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub condition: String,
    pub member_mus: Vec<Vec<f64>>,
    pub median: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicSpectrum {
    pub condition: String,
    pub derivative: DerivativeSpectrum,
    pub source_median: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationRow {
    pub first: String,
    pub second: String,
    pub inter_median_distance: f64,
    pub pooled_intra_mad: f64,
}

pub fn embed_dataset(m: &VaeModel, ds: &[DerivativeSpectrum]) -> Result<LatentEmbedding> {
    let points = ds
        .iter()
        .map(|d| {
            let stats = m.encode(d.values())?;
            Ok(LatentPoint {
                meta: d.meta().clone(),
                mu: stats.mu,
                logvar: stats.logvar,
            })
        })
        .collect::<Result<_>>()?;
    Ok(LatentEmbedding { points })
}

/// Component-wise median per condition, in order of first appearance.
pub fn cluster_medians(e: &LatentEmbedding) -> Vec<ClusterSummary> {
    let mut clusters: Vec<ClusterSummary> = Vec::new();
    for p in &e.points {
        match clusters
            .iter_mut()
            .find(|c| c.condition == p.meta.condition)
        {
            Some(c) => c.member_mus.push(p.mu.clone()),
            None => clusters.push(ClusterSummary {
                condition: p.meta.condition.clone(),
                member_mus: vec![p.mu.clone()],
                median: Vec::new(),
            }),
        }
    }
    for c in &mut clusters {
        c.median = componentwise_median(&c.member_mus);
    }
    clusters
}

pub fn componentwise_median(points: &[Vec<f64>]) -> Vec<f64> {
    let dim = points.first().map_or(0, |p| p.len());
    (0..dim)
        .map(|k| {
            let mut col: Vec<f64> = points.iter().map(|p| p[k]).collect();
            median(&mut col)
        })
        .collect()
}

/// Decodes a cluster median into its characteristic derivative spectrum.
pub fn decode_median(
    m: &VaeModel,
    c: &ClusterSummary,
    grid: &WavenumberGrid,
) -> Result<CharacteristicSpectrum> {
    if grid.len() != m.input_dim() {
        return Err(DivaError::GridMismatch(format!(
            "grid has {} samples, model expects {}",
            grid.len(),
            m.input_dim()
        )));
    }
    let values = m.decode(&c.median)?;
    let meta = SpectrumMeta::new(c.condition.clone(), 0, 0)?;
    Ok(CharacteristicSpectrum {
        condition: c.condition.clone(),
        derivative: DerivativeSpectrum::new(grid.clone(), values, meta)?,
        source_median: c.median.clone(),
    })
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Euclidean distance of each member from its cluster median.
fn distances_to_median(c: &ClusterSummary) -> Vec<f64> {
    c.member_mus
        .iter()
        .map(|p| euclidean(p, &c.median))
        .collect()
}

/// Inter-median distance and pooled intra-cluster spread for every pair of
/// conditions, in first-appearance order.
///
/// The pooled spread is the median of the member-to-own-median distances
/// across both clusters; it is zero when both clusters are singletons.
pub fn separation_stats(e: &LatentEmbedding) -> Result<Vec<SeparationRow>> {
    let clusters = cluster_medians(e);
    if clusters.len() < 2 {
        return Err(DivaError::InvalidConfig(format!(
            "separation needs at least two clusters, found {}",
            clusters.len()
        )));
    }
    let spreads: Vec<Vec<f64>> = clusters.iter().map(distances_to_median).collect();
    let mut rows = Vec::new();
    for i in 0..clusters.len() {
        for j in i + 1..clusters.len() {
            let pooled: Vec<f64> = spreads[i].iter().chain(&spreads[j]).copied().collect();
            rows.push(SeparationRow {
                first: clusters[i].condition.clone(),
                second: clusters[j].condition.clone(),
                inter_median_distance: euclidean(&clusters[i].median, &clusters[j].median),
                pooled_intra_mad: mad_about(&pooled, 0.0),
            });
        }
    }
    Ok(rows)
}
