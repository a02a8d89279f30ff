//! End-to-end orchestration: load → calibrate → trim → despike → (average)
//! → normalize → differentiate → split → train → embed → cluster medians →
//! decode → detect/rank → top-k → report, plus the files written along the
//! way.
//!
//! Every stage is a plain function over in-memory values so the CLI
//! subcommands can stop or resume anywhere. Errors carry the stage name.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::csv as table;
use super::plots;
use super::report::{ConditionReport, PeakReport, ReportedPeak, TrainingSummary};
use crate::error::{DivaError, Result};
use crate::latent::{
    cluster_medians, decode_median, embed_dataset, separation_stats, CharacteristicSpectrum,
    ClusterSummary, LatentEmbedding,
};
use crate::noise::{self, NoiseFloor};
use crate::peaks::{detect_spectrum, top_k, SigPeaks};
use crate::spectrum::{
    average_replicates, calibrate, despike, differentiate, normalize, split, DatasetSplit,
    DerivativeSpectrum, NormalizationScale, Spectrum,
};
use crate::vae::{checkpoint, train, TrainReport, VaeModel};

pub const REPORT_FILE: &str = "report.json";
pub const LATENT_FILE: &str = "latent.csv";
pub const MODEL_FILE: &str = "model.ckpt";
pub const TRAINING_FILE: &str = "training.json";
pub const DERIVATIVES_FILE: &str = "derivatives.csv";
pub const PREPROCESS_FILE: &str = "preprocess.json";
pub const CHARACTERISTIC_FILE: &str = "characteristic.csv";
pub const SCATTER_PLOT: &str = "latent.svg";
pub const OVERLAY_PLOT: &str = "characteristic.svg";
pub const PEAKS_PLOT: &str = "peaks.svg";

/// Preprocessed corpus, ready for training.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// Normalized intensity spectra, in input order.
    pub spectra: Vec<Spectrum>,
    pub derivatives: Vec<DerivativeSpectrum>,
    pub scale: NormalizationScale,
    pub split: DatasetSplit,
    /// Robust white-noise σ of the normalized spectra.
    pub noise_sigma: f64,
}

impl Prepared {
    pub fn is_train(&self) -> Vec<bool> {
        let train: HashSet<usize> = self.split.train_indices.iter().copied().collect();
        (0..self.derivatives.len())
            .map(|i| train.contains(&i))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub normalization_factor: f64,
    pub noise_sigma: f64,
    pub feature_count: usize,
    pub spectra: usize,
    pub train_count: usize,
    pub test_count: usize,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    /// Every spectrum, input order.
    pub embedding: LatentEmbedding,
    pub is_train: Vec<bool>,
    /// Points that fed the medians.
    pub median_source: LatentEmbedding,
    pub clusters: Vec<ClusterSummary>,
    pub characteristic: Vec<CharacteristicSpectrum>,
    pub ranked: Vec<SigPeaks>,
    pub noise_floor: NoiseFloor,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Intensity preprocessing up to and including normalization.
pub fn preprocess(
    cfg: &PipelineConfig,
    raw: &[Spectrum],
) -> Result<(Vec<Spectrum>, NormalizationScale)> {
    if raw.is_empty() {
        return Err(
            DivaError::InvalidSpectrum("input contains no spectra".into()).in_stage("load"),
        );
    }
    let mut ds = Vec::with_capacity(raw.len());
    for s in raw {
        let s = stage("calibrate", calibrate(s, cfg.calibration_offset))?;
        let s = stage("trim", crate::spectrum::trim(&s, cfg.trim.lo, cfg.trim.hi))?;
        let s = if cfg.despike.enabled {
            stage(
                "despike",
                despike(&s, cfg.despike.window, cfg.despike.z_threshold),
            )?
        } else {
            s
        };
        ds.push(s);
    }
    if cfg.average_replicates {
        ds = stage("average", average_replicates(&ds))?;
    }
    stage("normalize", normalize(&ds))
}

pub fn prepare(cfg: &PipelineConfig, raw: &[Spectrum]) -> Result<Prepared> {
    stage("config", cfg.validate())?;
    let (spectra, scale) = preprocess(cfg, raw)?;
    let derivatives = stage(
        "differentiate",
        spectra
            .iter()
            .map(differentiate)
            .collect::<Result<Vec<_>>>(),
    )?;
    let split = stage("split", split(&derivatives, cfg.train_fraction, cfg.seed))?;
    let noise_sigma = noise::estimate_sigma(&spectra);
    Ok(Prepared {
        spectra,
        derivatives,
        scale,
        split,
        noise_sigma,
    })
}

pub fn fit(cfg: &PipelineConfig, p: &Prepared) -> Result<(VaeModel, TrainReport)> {
    stage("train", train(&p.split.train, &cfg.train))
}

pub fn analyze(cfg: &PipelineConfig, p: &Prepared, model: &VaeModel) -> Result<Analysis> {
    let embedding = stage("embed", embed_dataset(model, &p.derivatives))?;
    let is_train = p.is_train();
    let median_source = LatentEmbedding {
        points: embedding
            .points
            .iter()
            .zip(&is_train)
            .filter(|(_, &t)| t || cfg.include_test_in_medians)
            .map(|(pt, _)| pt.clone())
            .collect(),
    };
    let clusters = cluster_medians(&median_source);
    let grid = p.derivatives[0].grid();
    let characteristic = stage(
        "decode",
        clusters
            .iter()
            .map(|c| decode_median(model, c, grid))
            .collect::<Result<Vec<_>>>(),
    )?;
    let ranked = characteristic
        .iter()
        .map(|c| detect_spectrum(&c.derivative))
        .collect();
    let noise_floor = stage(
        "noise_floor",
        noise::noise_floor(
            p.spectra[0].grid(),
            p.noise_sigma,
            cfg.noise_floor.simulations,
            cfg.noise_floor.multiplier,
            cfg.seed,
        ),
    )?;
    Ok(Analysis {
        embedding,
        is_train,
        median_source,
        clusters,
        characteristic,
        ranked,
        noise_floor,
    })
}

pub fn build_report(
    cfg: &PipelineConfig,
    p: &Prepared,
    model: &VaeModel,
    a: &Analysis,
    training: Option<&TrainReport>,
) -> Result<PeakReport> {
    let conditions = a
        .clusters
        .iter()
        .zip(&a.ranked)
        .map(|(c, ranked)| ConditionReport {
            condition: c.condition.clone(),
            members: c.member_mus.len(),
            latent_median: c.median.clone(),
            peaks: top_k(ranked, cfg.top_k)
                .into_iter()
                .map(|r| ReportedPeak {
                    position: r.position,
                    rounded_index: r.rounded_index,
                    area: r.area,
                    above_noise_floor: r.area > a.noise_floor.threshold,
                    annotation: cfg.annotation_for(r.position).map(str::to_owned),
                })
                .collect(),
        })
        .collect();
    let separation = if a.clusters.len() >= 2 {
        stage("separation", separation_stats(&a.median_source))?
    } else {
        Vec::new()
    };
    let training = training.and_then(|t| {
        Some(TrainingSummary {
            epochs: t.epochs.len(),
            first: *t.epochs.first()?,
            last: *t.epochs.last()?,
        })
    });
    Ok(PeakReport {
        seed: cfg.seed,
        model_checksum: checkpoint::checksum_hex(model),
        normalization_factor: p.scale.factor(),
        feature_count: model.input_dim(),
        train_count: p.split.train.len(),
        test_count: p.split.test.len(),
        training,
        noise_floor: a.noise_floor,
        conditions,
        separation,
        config: cfg.clone(),
    })
}

/// Result of a full in-memory run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub prepared: Prepared,
    pub model: VaeModel,
    pub training: TrainReport,
    pub analysis: Analysis,
    pub report: PeakReport,
}

/// Full pipeline on spectra already in memory; writes nothing.
pub fn run_on(cfg: &PipelineConfig, raw: &[Spectrum]) -> Result<Outcome> {
    let prepared = prepare(cfg, raw)?;
    let (model, training) = fit(cfg, &prepared)?;
    let analysis = analyze(cfg, &prepared, &model)?;
    let report = build_report(cfg, &prepared, &model, &analysis, Some(&training))?;
    Ok(Outcome {
        prepared,
        model,
        training,
        analysis,
        report,
    })
}

/// Loads `paths.input`, runs everything and writes every output file into
/// `paths.out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PeakReport> {
    let raw = load_input(cfg)?;
    let out = run_on(cfg, &raw)?;
    let dir = cfg.out_dir();
    stage("write", ensure_dir(dir))?;
    stage("write", write_preprocessed(dir, &out.prepared))?;
    stage(
        "write",
        write_model(dir, &cfg.model_path(), &out.model, &out.training),
    )?;
    stage("write", write_analysis(dir, &out.analysis))?;
    stage("write", write_report(dir, &out.report, &out.prepared))?;
    Ok(out.report)
}

pub fn load_input(cfg: &PipelineConfig) -> Result<Vec<Spectrum>> {
    let path = stage("config", cfg.input_path())?;
    stage("load", table::load_csv(path))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| DivaError::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| DivaError::io(path, e))
}

pub fn write_preprocessed(dir: &Path, p: &Prepared) -> Result<()> {
    table::save_derivatives_csv(&dir.join(DERIVATIVES_FILE), &p.derivatives)?;
    write_json(
        &dir.join(PREPROCESS_FILE),
        &PreprocessSummary {
            normalization_factor: p.scale.factor(),
            noise_sigma: p.noise_sigma,
            feature_count: p.derivatives[0].len(),
            spectra: p.derivatives.len(),
            train_count: p.split.train.len(),
            test_count: p.split.test.len(),
        },
    )
}

pub fn write_model(
    dir: &Path,
    model_path: &Path,
    model: &VaeModel,
    training: &TrainReport,
) -> Result<()> {
    checkpoint::save(model, model_path)?;
    write_json(&dir.join(TRAINING_FILE), training)
}

/// Reads `training.json` from `dir` when it belongs to `model`.
pub fn read_training(dir: &Path, model: &VaeModel) -> Option<TrainReport> {
    let text = std::fs::read_to_string(dir.join(TRAINING_FILE)).ok()?;
    let t: TrainReport = serde_json::from_str(&text).ok()?;
    (t.model_checksum == checkpoint::checksum_hex(model)).then_some(t)
}

pub fn write_latent_csv<W: std::io::Write>(writer: W, a: &Analysis) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| DivaError::Csv {
        row: 0,
        column: 0,
        message: e.to_string(),
    };
    let dim = a.embedding.points.first().map_or(2, |p| p.mu.len());
    let mut header = vec![
        "condition".to_string(),
        "replicate".into(),
        "location".into(),
        "set".into(),
    ];
    header.extend((1..=dim).map(|k| format!("mu_{k}")));
    header.extend((1..=dim).map(|k| format!("logvar_{k}")));
    w.write_record(&header).map_err(err)?;
    for (p, &t) in a.embedding.points.iter().zip(&a.is_train) {
        let mut rec = vec![
            p.meta.condition.clone(),
            p.meta.replicate_id.to_string(),
            p.meta.location_id.to_string(),
            if t { "train" } else { "test" }.to_string(),
        ];
        rec.extend(p.mu.iter().chain(&p.logvar).map(f64::to_string));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| DivaError::Csv {
        row: 0,
        column: 0,
        message: e.to_string(),
    })
}

pub fn write_analysis(dir: &Path, a: &Analysis) -> Result<()> {
    let path = dir.join(LATENT_FILE);
    let file = std::fs::File::create(&path).map_err(|e| DivaError::io(&path, e))?;
    write_latent_csv(std::io::BufWriter::new(file), a)?;
    let decoded: Vec<DerivativeSpectrum> = a
        .characteristic
        .iter()
        .map(|c| c.derivative.clone())
        .collect();
    if !decoded.is_empty() {
        table::save_derivatives_csv(&dir.join(CHARACTERISTIC_FILE), &decoded)?;
    }
    write_text(
        &dir.join(SCATTER_PLOT),
        &plots::latent_scatter(&a.embedding, &a.clusters),
    )?;
    write_text(
        &dir.join(OVERLAY_PLOT),
        &plots::characteristic_overlay(&a.characteristic),
    )
}

pub fn write_report(dir: &Path, report: &PeakReport, p: &Prepared) -> Result<()> {
    report.save(&dir.join(REPORT_FILE))?;
    let grid = p.derivatives[0].grid();
    write_text(
        &dir.join(PEAKS_PLOT),
        &plots::peak_bars(report, (grid.first(), grid.last())),
    )
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| DivaError::io(path, e))
}
