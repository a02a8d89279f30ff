//! Binary model checkpoint.
//!
//! Layout, all integers `u32` and floats `f64`, little-endian:
//!
//! ```text
//! magic      b"DIVAVAE\0"
//! version    1
//! input_dim, hidden_dim, latent_dim
//! leaky_alpha
//! 4 × layer: out_dim, in_dim, weights (row-major), biases
//! sha256 of every preceding byte (32 bytes)
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use super::model::{LayerParams, VaeModel};
use crate::error::{DivaError, Result};

const MAGIC: &[u8; 8] = b"DIVAVAE\0";
const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

pub fn to_bytes(model: &VaeModel) -> Vec<u8> {
    let mut buf = Vec::with_capacity(64 + 8 * model.param_count() + 16 + DIGEST_LEN);
    buf.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        model.input_dim() as u32,
        model.hidden_dim() as u32,
        model.latent_dim() as u32,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&model.leaky_alpha().to_le_bytes());
    for layer in model.layers() {
        buf.extend_from_slice(&(layer.out_dim() as u32).to_le_bytes());
        buf.extend_from_slice(&(layer.in_dim() as u32).to_le_bytes());
        for v in layer.weights().iter().chain(layer.biases()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(DivaError::Checkpoint("truncated checkpoint".into()));
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| DivaError::Checkpoint("layer size overflows".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<VaeModel> {
    if bytes.len() < MAGIC.len() + DIGEST_LEN {
        return Err(DivaError::Checkpoint("truncated checkpoint".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(DivaError::Checkpoint("checksum mismatch".into()));
    }
    let mut r = Reader {
        bytes: body,
        pos: 0,
    };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(DivaError::Checkpoint("not a model checkpoint".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(DivaError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    let (input_dim, hidden, latent) = (r.u32()?, r.u32()?, r.u32()?);
    let alpha = r.f64()?;
    let mut layers = Vec::with_capacity(4);
    for _ in 0..4 {
        let out_dim = r.u32()?;
        let in_dim = r.u32()?;
        let weights = r.f64s(in_dim.saturating_mul(out_dim))?;
        let biases = r.f64s(out_dim)?;
        layers.push(LayerParams::new(in_dim, out_dim, weights, biases)?);
    }
    if r.pos != body.len() {
        return Err(DivaError::Checkpoint("trailing bytes after layers".into()));
    }
    let [enc1, enc2, dec1, dec2]: [LayerParams; 4] = layers.try_into().unwrap();
    let model = VaeModel::from_layers(enc1, enc2, dec1, dec2, alpha)?;
    if model.input_dim() != input_dim
        || model.hidden_dim() != hidden
        || model.latent_dim() != latent
    {
        return Err(DivaError::Checkpoint(
            "header dimensions disagree with layers".into(),
        ));
    }
    Ok(model)
}

/// Hex SHA-256 of the checkpoint encoding; identifies a model bit-exactly.
pub fn checksum_hex(model: &VaeModel) -> String {
    let bytes = to_bytes(model);
    to_hex(&bytes[bytes.len() - DIGEST_LEN..])
}

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save(model: &VaeModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model)).map_err(|e| DivaError::io(path, e))
}

pub fn load(path: &Path) -> Result<VaeModel> {
    let bytes = std::fs::read(path).map_err(|e| DivaError::io(path, e))?;
    from_bytes(&bytes)
}
