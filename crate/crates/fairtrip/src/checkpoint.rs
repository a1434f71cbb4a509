//! Binary parameter files.
//!
//! Layout: magic `FTL1`, then input, hidden and output dimensions as
//! little-endian `u32`, then little-endian `f64` values of W1, b1, W2, b2,
//! the running mean and the running variance.

use std::path::Path;

use fairtrip_core::embedder::MlpParams;
use fairtrip_core::EMBED_DIM;

use crate::error::{data_error, Error, Result};

const MAGIC: &[u8; 4] = b"FTL1";

pub fn encode_params(p: &MlpParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * (p.w1.len() + p.b1.len() + p.w2.len() + 9));
    out.extend_from_slice(MAGIC);
    for dim in [p.input_dim(), p.hidden_dim(), EMBED_DIM] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    let values = p.w1.iter().chain(&p.b1).chain(&p.w2).chain(&p.b2).chain(&p.running_mean).chain(&p.running_var);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_params(bytes: &[u8]) -> Result<MlpParams> {
    let bad = |what: &str| Error::Data(format!("bad parameter file: {what}"));
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(bad("missing FTL1 header"));
    }
    let dim = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().expect("4 bytes")) as usize;
    let (k, h, d) = (dim(0), dim(1), dim(2));
    if d != EMBED_DIM {
        return Err(bad(&format!("output dimension {d}, expected {EMBED_DIM}")));
    }
    let count = k
        .checked_mul(h)
        .and_then(|kh| kh.checked_add(h)?.checked_add(h * d)?.checked_add(3 * d));
    let body = &bytes[16..];
    if count.and_then(|c| c.checked_mul(8)) != Some(body.len()) {
        return Err(bad("length does not match the dimensions"));
    }
    let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut take = |n: usize| values.by_ref().take(n).collect::<Vec<f64>>();
    let w1 = take(k * h);
    let b1 = take(h);
    let w2 = take(h * d);
    let vec3 = |v: Vec<f64>| -> [f64; EMBED_DIM] { v.try_into().expect("3 values") };
    let b2 = vec3(take(d));
    let mean = vec3(take(d));
    let var = vec3(take(d));
    MlpParams::from_parts(k, h, w1, b1, w2, b2, mean, var).map_err(data_error)
}

pub fn save_params(path: &Path, p: &MlpParams) -> Result<()> {
    std::fs::write(path, encode_params(p)).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: &Path) -> Result<MlpParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_params(&bytes).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}
