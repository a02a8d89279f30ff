//! Minimal dense variational autoencoder with hand-written forward and
//! backward passes.
//!
//! Encoder: `input → 64 → ReLU → 4`, the four outputs split into the latent
//! mean (first two) and log-variance (last two). Decoder: `2 → 64 →
//! LeakyReLU(α) → input`, no output activation. The default `α = 1.0` turns
//! the decoder activation into the identity; it is kept configurable rather
//! than silently replaced.
//!
//! Training minimises the ELBO: mean absolute reconstruction error plus the
//! KL divergence of the latent posterior from `N(0, I)`, using one
//! reparameterised sample per input per step and Adam.

pub mod checkpoint;
pub mod loss;
pub mod model;
pub mod train;

pub use loss::{
    backward, elbo_loss, elbo_with_noise, kl_loss, recon_loss, ElboTerms, ForwardCache, Gradients,
};
pub use model::{
    init_model, reparameterize, sample, LatentStats, LayerParams, VaeModel, HIDDEN_UNITS,
    LATENT_DIM,
};
pub use train::{train, train_rows, Adam, EpochLoss, TrainConfig, TrainReport};
