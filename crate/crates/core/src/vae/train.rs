use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint;
use super::loss::{backward_into, elbo_loss, Gradients};
use super::model::{init_model, VaeModel};
use crate::error::{DivaError, Result};
use crate::spectrum::DerivativeSpectrum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub kl_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3000,
            batch_size: 40,
            learning_rate: 1e-3,
            seed: 0,
            kl_weight: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(DivaError::InvalidConfig(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(DivaError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.kl_weight >= 0.0 && self.kl_weight.is_finite()) {
            return Err(DivaError::InvalidConfig(format!(
                "kl_weight must be non-negative, got {}",
                self.kl_weight
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub recon: f64,
    pub kl: f64,
    pub elbo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Sample-averaged losses, one entry per epoch, measured on the
    /// parameters in effect when each batch was processed.
    pub epochs: Vec<EpochLoss>,
    /// Hex SHA-256 of the final model's checkpoint encoding.
    pub model_checksum: String,
}

/// Adam with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, param_count: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn update(&mut self, model: &mut VaeModel, grads: &Gradients) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let mut k = 0;
        for (layer, g) in model.layers_mut().into_iter().zip(&grads.layers) {
            let params = layer.weights.iter_mut().chain(layer.biases.iter_mut());
            let gs = g.weights.iter().chain(&g.biases);
            for (p, &gi) in params.zip(gs) {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = self.beta1 * *m + (1.0 - self.beta1) * gi;
                *v = self.beta2 * *v + (1.0 - self.beta2) * gi * gi;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                k += 1;
            }
        }
    }
}

/// Trains a freshly initialised model on equal-length derivative spectra.
///
/// A single ChaCha stream seeded from `cfg.seed` drives both the per-epoch
/// shuffles and the reparameterisation noise, so a run is bitwise
/// reproducible from `(data, cfg)`. The final batch of an epoch may be
/// short; gradients are averaged over the actual batch size.
pub fn train(data: &[DerivativeSpectrum], cfg: &TrainConfig) -> Result<(VaeModel, TrainReport)> {
    let rows: Vec<&[f64]> = data.iter().map(|d| d.values()).collect();
    train_rows(&rows, cfg)
}

pub fn train_rows(rows: &[&[f64]], cfg: &TrainConfig) -> Result<(VaeModel, TrainReport)> {
    cfg.validate()?;
    let Some(first) = rows.first() else {
        return Err(DivaError::InvalidConfig("no training data".into()));
    };
    let dim = first.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(DivaError::LengthMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let mut model = init_model(dim, cfg.seed)?;
    let (model_rng_seed, _) = cfg.seed.overflowing_add(0x9e37_79b9_7f4a_7c15);
    let mut rng = ChaCha8Rng::seed_from_u64(model_rng_seed);
    let mut adam = Adam::new(cfg.learning_rate, model.param_count());
    let mut grads = Gradients::zeros_like(&model);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sums = EpochLoss {
            recon: 0.0,
            kl: 0.0,
            elbo: 0.0,
        };
        for batch in order.chunks(cfg.batch_size) {
            grads.clear();
            for &i in batch {
                let (terms, cache) = elbo_loss(&model, rows[i], cfg.kl_weight, &mut rng)?;
                if !terms.total.is_finite() {
                    return Err(DivaError::TrainingDiverged { epoch });
                }
                sums.recon += terms.recon;
                sums.kl += terms.kl;
                sums.elbo += terms.total;
                backward_into(&model, &cache, &mut grads);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.update(&mut model, &grads);
            if !model.layers().iter().all(|l| l.is_finite()) {
                return Err(DivaError::TrainingDiverged { epoch });
            }
        }
        let n = rows.len() as f64;
        history.push(EpochLoss {
            recon: sums.recon / n,
            kl: sums.kl / n,
            elbo: sums.elbo / n,
        });
    }

    let model_checksum = checkpoint::checksum_hex(&model);
    Ok((
        model,
        TrainReport {
            epochs: history,
            model_checksum,
        },
    ))
}
