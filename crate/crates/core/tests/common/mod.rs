#![allow(dead_code)]

use diva_core::vae::{backward, elbo_with_noise, VaeModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-5;

/// Worst relative error between analytic and central-difference ELBO
/// gradients over every parameter, for a fixed reparameterization sample.
/// Differences are measured against max(|analytic|, |numeric|, 1e-6).
pub fn max_gradient_error(m: &VaeModel, x: &[f64], eps: &[f64], kl_weight: f64) -> (f64, usize) {
    let (_, cache) = elbo_with_noise(m, x, eps, kl_weight).unwrap();
    let analytic = backward(m, &cache).flatten();
    let params = m.flat_params();
    let loss_at = |p: &[f64]| {
        let mm = m.with_flat_params(p).unwrap();
        elbo_with_noise(&mm, x, eps, kl_weight).unwrap().0.total
    };
    let mut worst = (0.0, 0);
    let mut p = params.clone();
    for i in 0..params.len() {
        p[i] = params[i] + H;
        let up = loss_at(&p);
        p[i] = params[i] - H;
        let down = loss_at(&p);
        p[i] = params[i];
        let numeric = (up - down) / (2.0 * H);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        if err > worst.0 {
            worst = (err, i);
        }
    }
    worst
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
