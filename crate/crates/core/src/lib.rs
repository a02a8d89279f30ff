//! Derivative-spectrum analysis of Raman data with a variational
//! autoencoder.
//!
//! The workflow: trim, despike and normalize raw spectra, take the first
//! derivative, learn a 2-D latent space with a small VAE, decode each
//! condition's latent median into a characteristic derivative spectrum, and
//! rank its peaks by the area between zero crossings.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod latent;
pub mod noise;
pub mod peaks;
pub mod spectrum;
pub mod stats;
pub mod synth;
pub mod vae;

pub use error::{DivaError, Result};
