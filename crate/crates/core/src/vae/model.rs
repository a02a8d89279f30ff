use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{DivaError, Result};

/// Width of the hidden layer on both sides of the latent bottleneck.
pub const HIDDEN_UNITS: usize = 64;
pub const LATENT_DIM: usize = 2;
pub const DEFAULT_LEAKY_ALPHA: f64 = 1.0;

/// Dense layer `y = W x + b`, weights stored row-major (`out_dim × in_dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    in_dim: usize,
    out_dim: usize,
    pub(crate) weights: Vec<f64>,
    pub(crate) biases: Vec<f64>,
}

impl LayerParams {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(DivaError::InvalidModel("layer with zero width".into()));
        }
        if weights.len() != in_dim * out_dim || biases.len() != out_dim {
            return Err(DivaError::InvalidModel(format!(
                "layer {in_dim}->{out_dim} given {} weights and {} biases",
                weights.len(),
                biases.len()
            )));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(DivaError::InvalidModel("non-finite layer parameter".into()));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            biases,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    fn glorot(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let limit = glorot_limit(in_dim, out_dim);
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self {
            in_dim,
            out_dim,
            weights,
            biases: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.in_dim..(r + 1) * self.in_dim]
    }

    pub(crate) fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.in_dim);
        out.clear();
        out.extend((0..self.out_dim).map(|r| dot(self.row(r), x) + self.biases[r]));
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.out_dim);
        self.forward_into(x, &mut out);
        out
    }

    pub(crate) fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.biases)
            .all(|v| v.is_finite())
    }
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Latent distribution parameters for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentStats {
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
}

impl LatentStats {
    pub fn new(mu: Vec<f64>, logvar: Vec<f64>) -> Result<Self> {
        if mu.len() != logvar.len() {
            return Err(DivaError::LengthMismatch {
                expected: mu.len(),
                got: logvar.len(),
            });
        }
        if mu.iter().chain(&logvar).any(|v| !v.is_finite()) {
            return Err(DivaError::InvalidModel(
                "non-finite latent statistics".into(),
            ));
        }
        Ok(Self { mu, logvar })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Dense VAE: `input → 64 (ReLU) → 2·latent` encoder and
/// `latent → 64 (LeakyReLU α) → input` decoder.
///
/// The decoder activation keeps the configured slope `α` for negative
/// inputs. At the default `α = 1` it is the identity, so the decoder is an
/// affine map of the latent code.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    pub(crate) enc1: LayerParams,
    pub(crate) enc2: LayerParams,
    pub(crate) dec1: LayerParams,
    pub(crate) dec2: LayerParams,
    input_dim: usize,
    latent_dim: usize,
    leaky_alpha: f64,
}

impl VaeModel {
    pub fn from_layers(
        enc1: LayerParams,
        enc2: LayerParams,
        dec1: LayerParams,
        dec2: LayerParams,
        leaky_alpha: f64,
    ) -> Result<Self> {
        let input_dim = enc1.in_dim;
        if enc2.in_dim != enc1.out_dim {
            return Err(DivaError::InvalidModel(
                "encoder layers do not chain".into(),
            ));
        }
        if !enc2.out_dim.is_multiple_of(2) {
            return Err(DivaError::InvalidModel(format!(
                "encoder output width {} is not 2 x latent_dim",
                enc2.out_dim
            )));
        }
        let latent_dim = enc2.out_dim / 2;
        if dec1.in_dim != latent_dim || dec2.in_dim != dec1.out_dim || dec2.out_dim != input_dim {
            return Err(DivaError::InvalidModel(
                "decoder does not mirror the encoder dimensions".into(),
            ));
        }
        if dec1.out_dim != enc1.out_dim {
            return Err(DivaError::InvalidModel(
                "decoder hidden width differs from encoder".into(),
            ));
        }
        if !leaky_alpha.is_finite() {
            return Err(DivaError::InvalidModel("non-finite leaky alpha".into()));
        }
        Ok(Self {
            enc1,
            enc2,
            dec1,
            dec2,
            input_dim,
            latent_dim,
            leaky_alpha,
        })
    }

    /// All-zero model, useful as a fixed point in tests.
    pub fn zeros(input_dim: usize, hidden: usize, latent_dim: usize) -> Self {
        Self {
            enc1: LayerParams::zeros(input_dim, hidden),
            enc2: LayerParams::zeros(hidden, 2 * latent_dim),
            dec1: LayerParams::zeros(latent_dim, hidden),
            dec2: LayerParams::zeros(hidden, input_dim),
            input_dim,
            latent_dim,
            leaky_alpha: DEFAULT_LEAKY_ALPHA,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.enc1.out_dim
    }

    pub fn leaky_alpha(&self) -> f64 {
        self.leaky_alpha
    }

    pub fn with_leaky_alpha(mut self, alpha: f64) -> Self {
        self.leaky_alpha = alpha;
        self
    }

    pub fn layers(&self) -> [&LayerParams; 4] {
        [&self.enc1, &self.enc2, &self.dec1, &self.dec2]
    }

    pub(crate) fn layers_mut(&mut self) -> [&mut LayerParams; 4] {
        [
            &mut self.enc1,
            &mut self.enc2,
            &mut self.dec1,
            &mut self.dec2,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    /// Every parameter in layer order, weights before biases.
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers()
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    /// Copy of the model with parameters replaced from a [`flat_params`]
    /// style vector.
    ///
    /// [`flat_params`]: VaeModel::flat_params
    pub fn with_flat_params(&self, params: &[f64]) -> Result<Self> {
        if params.len() != self.param_count() {
            return Err(DivaError::LengthMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut out = self.clone();
        let mut rest = params;
        for layer in out.layers_mut() {
            let (w, tail) = rest.split_at(layer.weights.len());
            let (b, tail) = tail.split_at(layer.biases.len());
            layer.weights.copy_from_slice(w);
            layer.biases.copy_from_slice(b);
            rest = tail;
        }
        Ok(out)
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(DivaError::LengthMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Encoder means and log-variances; no sampling.
    pub fn encode(&self, x: &[f64]) -> Result<LatentStats> {
        self.check_input(x)?;
        let mut h = self.enc1.forward(x);
        relu_in_place(&mut h);
        let mut y = self.enc2.forward(&h);
        let logvar = y.split_off(self.latent_dim);
        LatentStats::new(y, logvar)
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim {
            return Err(DivaError::LengthMismatch {
                expected: self.latent_dim,
                got: z.len(),
            });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(DivaError::InvalidModel("non-finite latent code".into()));
        }
        let mut h = self.dec1.forward(z);
        leaky_in_place(&mut h, self.leaky_alpha);
        Ok(self.dec2.forward(&h))
    }
}

pub(crate) fn relu_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|a| *a = a.max(0.0));
}

pub(crate) fn leaky_in_place(v: &mut [f64], alpha: f64) {
    v.iter_mut().for_each(|a| {
        if *a < 0.0 {
            *a *= alpha
        }
    });
}

/// Glorot-initialised model with zero biases, deterministic in `seed`.
pub fn init_model(input_dim: usize, seed: u64) -> Result<VaeModel> {
    if input_dim < 4 {
        return Err(DivaError::InvalidModel(format!(
            "input dimension must be at least 4, got {input_dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enc1 = LayerParams::glorot(input_dim, HIDDEN_UNITS, &mut rng);
    let enc2 = LayerParams::glorot(HIDDEN_UNITS, 2 * LATENT_DIM, &mut rng);
    let dec1 = LayerParams::glorot(LATENT_DIM, HIDDEN_UNITS, &mut rng);
    let dec2 = LayerParams::glorot(HIDDEN_UNITS, input_dim, &mut rng);
    VaeModel::from_layers(enc1, enc2, dec1, dec2, DEFAULT_LEAKY_ALPHA)
}

/// Draws standard-normal noise of length `dim`.
pub fn draw_noise(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Reparameterised draw `z = μ + exp(logvar / 2) · ε` for given noise.
pub fn reparameterize(stats: &LatentStats, eps: &[f64]) -> Vec<f64> {
    stats
        .mu
        .iter()
        .zip(&stats.logvar)
        .zip(eps)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect()
}

/// Reparameterised sample with `ε ~ N(0, I)` drawn from `rng`.
pub fn sample(stats: &LatentStats, rng: &mut impl Rng) -> Vec<f64> {
    let eps = draw_noise(stats.dim(), rng);
    reparameterize(stats, &eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 4-input, 2-hidden, 1-latent toy model with hand-picked parameters.
    pub(crate) fn toy() -> VaeModel {
        let enc1 = LayerParams::new(
            4,
            2,
            vec![1.0, 0.0, -1.0, 2.0, 0.5, 0.5, 0.5, -0.5],
            vec![0.1, -0.2],
        )
        .unwrap();
        let enc2 = LayerParams::new(2, 2, vec![1.0, -1.0, 0.5, 2.0], vec![0.0, 0.3]).unwrap();
        let dec1 = LayerParams::new(1, 2, vec![2.0, -1.0], vec![0.5, 0.0]).unwrap();
        let dec2 = LayerParams::new(
            2,
            4,
            vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, -1.0, 2.0],
            vec![0.0, 0.1, 0.2, 0.3],
        )
        .unwrap();
        VaeModel::from_layers(enc1, enc2, dec1, dec2, 1.0).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = init_model(30, 7).unwrap();
        assert_eq!(a, init_model(30, 7).unwrap());
        assert_ne!(a, init_model(30, 8).unwrap());
        for layer in a.layers() {
            assert!(layer.biases().iter().all(|&b| b == 0.0));
            let limit = glorot_limit(layer.in_dim(), layer.out_dim());
            let max = layer.weights().iter().fold(0.0_f64, |m, w| m.max(w.abs()));
            assert!(max <= limit, "{max} > {limit}");
            assert!(max > 0.5 * limit);
        }
        assert_eq!(a.layers()[1].out_dim(), 2 * a.latent_dim());
        assert!(init_model(3, 0).is_err());
    }

    #[test]
    fn construction_rejects_bad_shapes() {
        let odd = VaeModel::from_layers(
            LayerParams::zeros(5, 3),
            LayerParams::zeros(3, 3),
            LayerParams::zeros(1, 3),
            LayerParams::zeros(3, 5),
            1.0,
        );
        assert!(odd.is_err());
        let unmirrored = VaeModel::from_layers(
            LayerParams::zeros(5, 3),
            LayerParams::zeros(3, 4),
            LayerParams::zeros(2, 3),
            LayerParams::zeros(3, 6),
            1.0,
        );
        assert!(unmirrored.is_err());
        assert!(LayerParams::new(2, 2, vec![0.0; 3], vec![0.0; 2]).is_err());
        assert!(LayerParams::new(1, 1, vec![f64::NAN], vec![0.0]).is_err());
    }

    #[test]
    fn zero_model_encodes_and_decodes_to_zero() {
        let m = VaeModel::zeros(6, 64, 2);
        let stats = m.encode(&[1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap();
        assert_eq!(stats.mu, vec![0.0, 0.0]);
        assert_eq!(stats.logvar, vec![0.0, 0.0]);
        assert_eq!(m.decode(&[0.3, -4.0]).unwrap(), vec![0.0; 6]);
        assert!(m.encode(&[1.0; 5]).is_err());
        assert!(m.decode(&[1.0]).is_err());
    }

    #[test]
    fn toy_model_matches_hand_computation() {
        let m = toy();
        let x = [1.0, 2.0, 3.0, -1.0];
        // enc1: [1 - 3 - 2 + 0.1, 0.5 + 1 + 1.5 + 0.5 - 0.2] = [-3.9, 3.3] -> relu [0, 3.3]
        // enc2: [0 - 3.3, 0 + 6.6 + 0.3] = [-3.3, 6.9]
        let s = m.encode(&x).unwrap();
        assert!((s.mu[0] + 3.3).abs() < 1e-12);
        assert!((s.logvar[0] - 6.9).abs() < 1e-12);
        assert_eq!(m.encode(&x).unwrap(), s);

        // dec1 at z = 0.5: [1.5, -0.5]; alpha 1 keeps -0.5
        // dec2: [1.5, -0.4, 1.2, -2.2]
        let out = m.decode(&[0.5]).unwrap();
        let want = [1.5, -0.4, 1.2, -2.2];
        for (o, w) in out.iter().zip(want) {
            assert!((o - w).abs() < 1e-12);
        }
        // alpha 0.1 scales the negative hidden unit: [1.5, -0.05]
        let out = m.clone().with_leaky_alpha(0.1).decode(&[0.5]).unwrap();
        let want = [1.5, 0.05, 1.65, -1.3];
        for (o, w) in out.iter().zip(want) {
            assert!((o - w).abs() < 1e-12, "{o} vs {w}");
        }
    }

    #[test]
    fn decode_is_affine_with_unit_alpha() {
        let m = init_model(16, 3).unwrap();
        let (z1, z2, a) = ([0.7, -1.3], [-2.0, 0.4], 0.37);
        let mix: Vec<f64> = z1
            .iter()
            .zip(&z2)
            .map(|(p, q)| a * p + (1.0 - a) * q)
            .collect();
        let lhs = m.decode(&mix).unwrap();
        let d1 = m.decode(&z1).unwrap();
        let d2 = m.decode(&z2).unwrap();
        for i in 0..16 {
            assert!((lhs[i] - (a * d1[i] + (1.0 - a) * d2[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_contracts() {
        let tight = LatentStats::new(vec![1.5, -2.0], vec![-50.0, -50.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z = sample(&tight, &mut rng);
        assert!((z[0] - 1.5).abs() < 1e-9 && (z[1] + 2.0).abs() < 1e-9);

        let unit = LatentStats::new(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let a = sample(&unit, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample(&unit, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_moments() {
        let unit = LatentStats::new(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let draws: Vec<Vec<f64>> = (0..n).map(|_| sample(&unit, &mut rng)).collect();
        for k in 0..2 {
            let mean = draws.iter().map(|z| z[k]).sum::<f64>() / n as f64;
            let var = draws.iter().map(|z| (z[k] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!(mean.abs() < 0.02, "mean {mean}");
            assert!((var - 1.0).abs() < 0.05, "var {var}");
        }
    }
}
