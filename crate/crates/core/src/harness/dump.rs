//! Channel dump format and moment matching.
//!
//! A dump is the 4-byte magic `CSID`, a version byte (`1`), then
//! little-endian `u32` realization count and `u32` dimension, followed by
//! `count * dim` complex entries stored as interleaved little-endian `f32`
//! (real, imaginary), one realization after another.

use std::io::Write;
use std::path::Path;

use crate::channel::{ChannelBatch, HermitianMatrix};
use crate::error::{Error, Result};
use crate::numeric::{CMatrix, C64};

pub const DUMP_MAGIC: [u8; 4] = *b"CSID";
pub const DUMP_VERSION: u8 = 1;
const HEADER_LEN: usize = 13;

pub fn encode_dump(batch: &ChannelBatch) -> Result<Vec<u8>> {
    let count = u32::try_from(batch.count()).map_err(|_| Error::Format("too many realizations for a dump".into()))?;
    let dim = u32::try_from(batch.dim()).map_err(|_| Error::Format("dimension too large for a dump".into()))?;
    let mut buf = Vec::with_capacity(HEADER_LEN + batch.as_flat().len() * 8);
    buf.extend_from_slice(&DUMP_MAGIC);
    buf.push(DUMP_VERSION);
    buf.extend_from_slice(&count.to_le_bytes());
    buf.extend_from_slice(&dim.to_le_bytes());
    for z in batch.as_flat() {
        buf.extend_from_slice(&(z.re as f32).to_le_bytes());
        buf.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    Ok(buf)
}

pub fn decode_dump(bytes: &[u8]) -> Result<ChannelBatch> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("dump header truncated ({} bytes)", bytes.len())));
    }
    if bytes[0..4] != DUMP_MAGIC {
        return Err(Error::Format("not a channel dump (bad magic)".into()));
    }
    if bytes[4] != DUMP_VERSION {
        return Err(Error::Format(format!("unsupported dump version {}", bytes[4])));
    }
    let count = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let want = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Format("dump header overflows".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < want {
        return Err(Error::Format(format!(
            "dump payload truncated: {} of {want} bytes",
            payload.len()
        )));
    }
    if payload.len() > want {
        return Err(Error::Format(format!(
            "dump has {} trailing bytes",
            payload.len() - want
        )));
    }
    let data: Vec<C64> = payload
        .chunks_exact(8)
        .map(|c| {
            C64::new(
                f32::from_le_bytes(c[0..4].try_into().unwrap()) as f64,
                f32::from_le_bytes(c[4..8].try_into().unwrap()) as f64,
            )
        })
        .collect();
    ChannelBatch::from_flat(dim, data, None).map_err(|e| match e {
        Error::Validation(m) => Error::Format(m),
        other => other,
    })
}

pub fn write_channels(batch: &ChannelBatch, path: &Path) -> Result<()> {
    let buf = encode_dump(batch)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn ingest_channels(path: &Path) -> Result<ChannelBatch> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dump(&bytes)
}

/// `(1 / count) sum_i h_i h_i^H`.
pub fn sample_covariance(batch: &ChannelBatch) -> Result<HermitianMatrix> {
    if batch.count() == 0 {
        return Err(Error::EmptyBatch);
    }
    let n = batch.dim();
    let mut acc = CMatrix::zeros(n, n);
    for h in batch.iter() {
        for j in 0..n {
            let hj = h[j].conj();
            for i in 0..n {
                acc[(i, j)] += h[i] * hj;
            }
        }
    }
    acc /= C64::new(batch.count() as f64, 0.0);
    HermitianMatrix::new(acc)
}

/// Parameter and FLOP count of applying `(Us ⊗ Uf)^H` factor-wise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct Complexity {
    /// Complex entries of the two factor bases, `nt^2 + nc^2`.
    pub parameters: u64,
    /// Complex multiply-accumulates of the two factor products,
    /// `nt nc (nt + nc)`.
    pub complex_macs: u64,
    /// Real FLOPs counting one complex MAC as two.
    pub flops: u64,
    /// Quantized dominant columns per update (informational).
    pub p: u64,
}

pub fn structured_complexity(nt: usize, nc: usize, p: usize) -> Result<Complexity> {
    if nt == 0 || nc == 0 {
        return Err(Error::Parameter("dimensions must be positive".into()));
    }
    let (t, c) = (nt as u64, nc as u64);
    let macs = t * c * (t + c);
    Ok(Complexity {
        parameters: t * t + c * c,
        complex_macs: macs,
        flops: 2 * macs,
        p: p as u64,
    })
}
