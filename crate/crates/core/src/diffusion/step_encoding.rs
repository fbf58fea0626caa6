use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sinusoidal encoding of step `t`: for `k < dim/2` the pair
/// `(sin(t·ω_k), cos(t·ω_k))` with `ω_k = 10000^{−2k/dim}`, interleaved.
pub fn encode_step<S: Scalar>(t: usize, dim: usize) -> Result<Vec<S>> {
    if !dim.is_multiple_of(2) {
        return Err(Error::Contract(format!("step encoding dimension must be even, got {dim}")));
    }
    let mut out = Vec::with_capacity(dim);
    encode_into(t, &mut out, dim);
    Ok(out)
}

pub(crate) fn encode_into<S: Scalar>(t: usize, out: &mut Vec<S>, dim: usize) {
    let t = t as f64;
    for k in 0..dim / 2 {
        let freq = 10000f64.powf(-2.0 * k as f64 / dim as f64);
        out.push(S::of((t * freq).sin()));
        out.push(S::of((t * freq).cos()));
    }
}
