//! `DDRMDNZ1` denoiser checkpoints: magic, `u32` LE dim, hidden width and
//! affine layer count, then every user-network matrix followed by every
//! item-network matrix as `f32` LE, row-major, each layer as weight
//! (`out × in`) then bias (`1 × out`).

use std::fs;
use std::path::Path;

use super::denoiser::{DenoiserConfig, DenoiserParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DENOISER_MAGIC: &[u8; 8] = b"DDRMDNZ1";

pub fn write_denoiser<S: Scalar>(params: &DenoiserParams<S>, path: impl AsRef<Path>) -> Result<()> {
    let cfg = params.config;
    let mut buf = Vec::new();
    buf.extend_from_slice(DENOISER_MAGIC);
    for n in [cfg.dim, cfg.hidden, cfg.layer_count()] {
        let n = u32::try_from(n).map_err(|_| Error::Checkpoint(format!("{n} does not fit in u32")))?;
        buf.extend_from_slice(&n.to_le_bytes());
    }
    for m in params.user.matrices().chain(params.item.matrices()) {
        for v in m.as_slice() {
            buf.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_denoiser<S: Scalar>(path: impl AsRef<Path>) -> Result<DenoiserParams<S>> {
    let bytes = fs::read(path)?;
    if bytes.len() < 20 || &bytes[..8] != DENOISER_MAGIC {
        return Err(Error::Checkpoint("missing DDRMDNZ1 magic".into()));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[8 + 4 * k..12 + 4 * k].try_into().unwrap()) as usize;
    let (dim, hidden, layers) = (word(0), word(1), word(2));
    if layers == 0 {
        return Err(Error::Checkpoint("layer count must be positive".into()));
    }
    let cfg = DenoiserConfig {
        dim,
        hidden,
        hidden_layers: layers - 1,
    };
    let mut params = DenoiserParams::<S>::zeros(cfg).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let count: usize = params.user.matrices().chain(params.item.matrices()).map(|m| m.as_slice().len()).sum();
    let expected = 20 + 4 * count;
    if bytes.len() != expected {
        return Err(Error::Checkpoint(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let mut values = bytes[20..]
        .chunks_exact(4)
        .map(|c| S::of(f32::from_le_bytes(c.try_into().unwrap()) as f64));
    let DenoiserParams { user, item, .. } = &mut params;
    for m in user.matrices_mut().chain(item.matrices_mut()) {
        for v in m.as_mut_slice() {
            *v = values.next().unwrap();
        }
    }
    Ok(params)
}
