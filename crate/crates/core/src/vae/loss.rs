//! ELBO terms and their exact gradients through the reparameterised sample.

use rand::Rng;

use super::model::{draw_noise, LatentStats, LayerParams, VaeModel};
use crate::error::{DivaError, Result};

/// Mean absolute error `(1/N) Σ |x_i - x̂_i|`.
pub fn recon_loss(x: &[f64], xhat: &[f64]) -> Result<f64> {
    if x.len() != xhat.len() {
        return Err(DivaError::LengthMismatch {
            expected: x.len(),
            got: xhat.len(),
        });
    }
    if x.is_empty() {
        return Err(DivaError::InvalidSpectrum(
            "reconstruction loss of empty input".into(),
        ));
    }
    Ok(x.iter().zip(xhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / x.len() as f64)
}

/// KL divergence to the standard normal,
/// `-½ Σ (1 + logvar_i - mu_i² - exp(logvar_i))`.
pub fn kl_loss(stats: &LatentStats) -> f64 {
    -0.5 * stats
        .mu
        .iter()
        .zip(&stats.logvar)
        .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
        .sum::<f64>()
}

/// Intermediate activations of one forward pass, kept for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub(crate) x: Vec<f64>,
    pub(crate) enc_pre: Vec<f64>,
    pub(crate) enc_hidden: Vec<f64>,
    pub(crate) stats: LatentStats,
    pub(crate) eps: Vec<f64>,
    pub(crate) z: Vec<f64>,
    pub(crate) dec_pre: Vec<f64>,
    pub(crate) dec_hidden: Vec<f64>,
    pub(crate) xhat: Vec<f64>,
    pub(crate) kl_weight: f64,
}

impl ForwardCache {
    pub fn stats(&self) -> &LatentStats {
        &self.stats
    }

    pub fn reconstruction(&self) -> &[f64] {
        &self.xhat
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboTerms {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// ELBO loss on one reparameterised sample with the given noise `eps`.
pub fn elbo_with_noise(
    m: &VaeModel,
    x: &[f64],
    eps: &[f64],
    kl_weight: f64,
) -> Result<(ElboTerms, ForwardCache)> {
    m.check_input(x)?;
    if eps.len() != m.latent_dim() {
        return Err(DivaError::LengthMismatch {
            expected: m.latent_dim(),
            got: eps.len(),
        });
    }
    let enc_pre = m.enc1.forward(x);
    let enc_hidden: Vec<f64> = enc_pre.iter().map(|a| a.max(0.0)).collect();
    let mut y = m.enc2.forward(&enc_hidden);
    let logvar = y.split_off(m.latent_dim());
    let stats = LatentStats { mu: y, logvar };
    let z = super::model::reparameterize(&stats, eps);
    let dec_pre = m.dec1.forward(&z);
    let alpha = m.leaky_alpha();
    let dec_hidden: Vec<f64> = dec_pre
        .iter()
        .map(|&a| if a < 0.0 { alpha * a } else { a })
        .collect();
    let xhat = m.dec2.forward(&dec_hidden);

    let recon = recon_loss(x, &xhat)?;
    let kl = kl_loss(&stats);
    let terms = ElboTerms {
        total: recon + kl_weight * kl,
        recon,
        kl,
    };
    let cache = ForwardCache {
        x: x.to_vec(),
        enc_pre,
        enc_hidden,
        stats,
        eps: eps.to_vec(),
        z,
        dec_pre,
        dec_hidden,
        xhat,
        kl_weight,
    };
    Ok((terms, cache))
}

/// ELBO loss on one reparameterised sample with noise drawn from `rng`.
pub fn elbo_loss(
    m: &VaeModel,
    x: &[f64],
    kl_weight: f64,
    rng: &mut impl Rng,
) -> Result<(ElboTerms, ForwardCache)> {
    let eps = draw_noise(m.latent_dim(), rng);
    elbo_with_noise(m, x, &eps, kl_weight)
}

/// Gradient buffers shaped like the model's four layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: [LayerParams; 4],
}

impl Gradients {
    pub fn zeros_like(m: &VaeModel) -> Self {
        Self {
            layers: m
                .layers()
                .map(|l| LayerParams::zeros(l.in_dim(), l.out_dim())),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            layer.weights.iter_mut().for_each(|w| *w *= factor);
            layer.biases.iter_mut().for_each(|b| *b *= factor);
        }
    }

    pub fn clear(&mut self) {
        self.scale(0.0);
    }

    /// Flattened view: every layer's weights then biases, in layer order.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }
}

fn subgradient_sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `grad.W += g ⊗ input`, `grad.b += g`; skips rows whose upstream gradient
/// is exactly zero.
fn accumulate_outer(grad: &mut LayerParams, g: &[f64], input: &[f64]) {
    let n = grad.in_dim();
    for (r, &gr) in g.iter().enumerate() {
        if gr == 0.0 {
            continue;
        }
        grad.biases[r] += gr;
        for (w, x) in grad.weights[r * n..(r + 1) * n].iter_mut().zip(input) {
            *w += gr * x;
        }
    }
}

/// `Wᵀ g` for a row-major layer.
fn transpose_mul(layer: &LayerParams, g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; layer.in_dim()];
    for (r, &gr) in g.iter().enumerate() {
        if gr == 0.0 {
            continue;
        }
        for (o, w) in out.iter_mut().zip(layer.row(r)) {
            *o += gr * w;
        }
    }
    out
}

/// Adds the gradient of the cached sample's total loss to `grads`.
///
/// The MAE subgradient at a zero residual is taken as 0, as is the ReLU
/// derivative at a zero pre-activation.
pub fn backward_into(m: &VaeModel, cache: &ForwardCache, grads: &mut Gradients) {
    let n = cache.x.len() as f64;
    let g_xhat: Vec<f64> = cache
        .xhat
        .iter()
        .zip(&cache.x)
        .map(|(xh, x)| subgradient_sign(xh - x) / n)
        .collect();

    let [g_enc1, g_enc2, g_dec1, g_dec2] = &mut grads.layers;

    accumulate_outer(g_dec2, &g_xhat, &cache.dec_hidden);
    let alpha = m.leaky_alpha();
    let g_dec_pre: Vec<f64> = transpose_mul(&m.dec2, &g_xhat)
        .into_iter()
        .zip(&cache.dec_pre)
        .map(|(g, &a)| if a < 0.0 { alpha * g } else { g })
        .collect();

    accumulate_outer(g_dec1, &g_dec_pre, &cache.z);
    let g_z = transpose_mul(&m.dec1, &g_dec_pre);

    let beta = cache.kl_weight;
    let stats = &cache.stats;
    let mut g_y = Vec::with_capacity(2 * stats.dim());
    g_y.extend(g_z.iter().zip(&stats.mu).map(|(gz, mu)| gz + beta * mu));
    g_y.extend(
        g_z.iter()
            .zip(&stats.logvar)
            .zip(&cache.eps)
            .map(|((gz, lv), e)| {
                let sd = (0.5 * lv).exp();
                gz * e * 0.5 * sd + beta * 0.5 * (lv.exp() - 1.0)
            }),
    );

    accumulate_outer(g_enc2, &g_y, &cache.enc_hidden);
    let g_enc_pre: Vec<f64> = transpose_mul(&m.enc2, &g_y)
        .into_iter()
        .zip(&cache.enc_pre)
        .map(|(g, &a)| if a > 0.0 { g } else { 0.0 })
        .collect();
    accumulate_outer(g_enc1, &g_enc_pre, &cache.x);
}

/// Gradient of one sample's total loss with respect to every parameter.
pub fn backward(m: &VaeModel, cache: &ForwardCache) -> Gradients {
    let mut grads = Gradients::zeros_like(m);
    backward_into(m, cache, &mut grads);
    grads
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vae::model::init_model;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stats(mu: &[f64], lv: &[f64]) -> LatentStats {
        LatentStats::new(mu.to_vec(), lv.to_vec()).unwrap()
    }

    #[test]
    fn closed_forms() {
        assert_eq!(kl_loss(&stats(&[0.0, 0.0], &[0.0, 0.0])), 0.0);
        assert_eq!(kl_loss(&stats(&[1.0, 0.0], &[0.0, 0.0])), 0.5);
        assert_eq!(recon_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(recon_loss(&[1.0, 2.0], &[0.0, 4.0]).unwrap(), 1.5);
        assert!(recon_loss(&[1.0], &[1.0, 2.0]).is_err());
        assert!(recon_loss(&[], &[]).is_err());
    }

    #[test]
    fn kl_zero_weight_is_recon_only() {
        let m = init_model(8, 1).unwrap();
        let x: Vec<f64> = (0..8).map(|i| i as f64 * 0.1).collect();
        let eps = [0.3, -0.7];
        let (t, _) = elbo_with_noise(&m, &x, &eps, 0.0).unwrap();
        assert_eq!(t.total, t.recon);
        let (t1, _) = elbo_with_noise(&m, &x, &eps, 1.0).unwrap();
        assert_eq!(t1.total, t1.recon + t1.kl);
    }

    #[test]
    fn perfect_autoencoder_has_zero_loss() {
        let m = VaeModel::zeros(6, 8, 2);
        let (t, cache) = elbo_with_noise(&m, &[0.0; 6], &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(t.total, 0.0);
        let g = backward(&m, &cache);
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn total_recomposes_from_parts() {
        let m = init_model(10, 5).unwrap();
        let x: Vec<f64> = (0..10).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (t, cache) = elbo_loss(&m, &x, 0.7, &mut rng).unwrap();
        let recon = recon_loss(&x, cache.reconstruction()).unwrap();
        let kl = kl_loss(cache.stats());
        assert_eq!(t.total, recon + 0.7 * kl);
    }

    #[test]
    fn kl_gradient_wrt_mu_is_mu() {
        // zero decoder: the reconstruction term does not depend on the latent
        let mut m = init_model(6, 2).unwrap();
        m.dec1 = LayerParams::zeros(2, 64);
        let x = [0.5, -0.2, 0.1, 0.9, -1.0, 0.3];
        let (_, cache) = elbo_with_noise(&m, &x, &[0.4, -1.1], 1.0).unwrap();
        let g = backward(&m, &cache);
        // enc2 bias gradient is dL/dy; its first half is dL/dmu
        let mu = &cache.stats().mu;
        assert!((g.layers[1].biases()[0] - mu[0]).abs() < 1e-12);
        assert!((g.layers[1].biases()[1] - mu[1]).abs() < 1e-12);
    }
}
