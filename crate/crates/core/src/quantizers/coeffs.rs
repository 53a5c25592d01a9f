//! Short-term feedback: scalar quantization of the KLT coefficients
//! `w = U^H h` under a reverse water-filling bit allocation.
//!
//! Mode `m` with `b_m` bits per complex dimension is coded as two real
//! components of variance `lambda_m / 2`, each with `b_m / 2` bits.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;

use crate::channel::EigenSpectrum;
use crate::error::{Error, Result};
use crate::numeric::C64;
use crate::quantizers::scalar::{DitheredUniform, LloydMaxQuantizer, QuantizerKind};
use crate::rng::{self, Domain};
use crate::rwf::BitAllocation;

#[derive(Debug, Clone)]
enum ModeCoder {
    Off,
    LloydMax { sigma: f64, q: Arc<LloydMaxQuantizer> },
    Dithered { sigma: f64, q: DitheredUniform },
}

/// Per-mode scalar quantizers designed once for a spectrum and allocation.
#[derive(Debug, Clone)]
pub struct CoefficientCoder {
    kind: QuantizerKind,
    modes: Vec<ModeCoder>,
}

/// Indices, dither and decoder output for one coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientCodeword {
    /// `(re, im)` indices of each coded mode, `None` for uncoded modes.
    pub indices: Vec<Option<[i64; 2]>>,
    /// Dither used for each coded mode (dithered quantizer only).
    pub dither: Vec<Option<[f64; 2]>>,
    /// Decoder reconstruction `ŵ`.
    pub reconstruction: Vec<C64>,
}

impl CoefficientCoder {
    /// Designs the coder. When `mask` is given, modes with `mask[m] == false`
    /// are never coded regardless of their allocation.
    pub fn new(l: &EigenSpectrum, alloc: &BitAllocation, kind: QuantizerKind, mask: Option<&[bool]>) -> Result<Self> {
        if alloc.dim() != l.len() {
            return Err(Error::DimensionMismatch {
                expected: l.len(),
                found: alloc.dim(),
                context: "bit allocation vs spectrum",
            });
        }
        if let Some(mask) = mask {
            if mask.len() != l.len() {
                return Err(Error::DimensionMismatch {
                    expected: l.len(),
                    found: mask.len(),
                    context: "mode mask vs spectrum",
                });
            }
        }
        let mut lloyd: HashMap<usize, Arc<LloydMaxQuantizer>> = HashMap::new();
        let mut dithered: HashMap<u64, DitheredUniform> = HashMap::new();
        let mut modes = Vec::with_capacity(l.len());
        for (m, (&b, &lambda)) in alloc.per_mode_rate.iter().zip(l.values()).enumerate() {
            if b <= 0.0 || lambda <= 0.0 || mask.is_some_and(|k| !k[m]) {
                modes.push(ModeCoder::Off);
                continue;
            }
            let sigma = (0.5 * lambda).sqrt();
            let coder = match kind {
                QuantizerKind::LloydMax => {
                    let levels = (0.5 * b).exp2().round().max(1.0);
                    if levels > crate::quantizers::scalar::MAX_LLOYD_LEVELS as f64 {
                        return Err(Error::Capacity {
                            what: "lloyd-max levels",
                            requested: levels as u64,
                            limit: crate::quantizers::scalar::MAX_LLOYD_LEVELS as u64,
                        });
                    }
                    let levels = levels as usize;
                    let q = match lloyd.get(&levels) {
                        Some(q) => q.clone(),
                        None => {
                            let q = Arc::new(LloydMaxQuantizer::design(levels)?);
                            lloyd.insert(levels, q.clone());
                            q
                        }
                    };
                    ModeCoder::LloydMax { sigma, q }
                }
                QuantizerKind::Dithered => {
                    let target = 0.5 * b;
                    let q = match dithered.get(&target.to_bits()) {
                        Some(q) => *q,
                        None => {
                            let q = DitheredUniform::for_entropy(target)?;
                            dithered.insert(target.to_bits(), q);
                            q
                        }
                    };
                    ModeCoder::Dithered { sigma, q }
                }
            };
            modes.push(coder);
        }
        Ok(CoefficientCoder { kind, modes })
    }

    pub fn kind(&self) -> QuantizerKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn is_coded(&self, m: usize) -> bool {
        !matches!(self.modes[m], ModeCoder::Off)
    }

    /// Dithered step of mode `m` in units of its component standard deviation.
    pub fn step(&self, m: usize) -> Option<f64> {
        match &self.modes[m] {
            ModeCoder::Dithered { q, .. } => Some(q.step()),
            _ => None,
        }
    }

    /// Index entropy of all coded modes in bits per complex dimension:
    /// `H(Q | D)` for the dithered quantizer, the cell-probability entropy
    /// for Lloyd-Max.
    pub fn design_rate(&self) -> f64 {
        let bits: f64 = self
            .modes
            .iter()
            .map(|c| match c {
                ModeCoder::Off => 0.0,
                ModeCoder::Dithered { q, .. } => 2.0 * q.conditional_entropy(),
                ModeCoder::LloydMax { q, .. } => {
                    2.0 * q
                        .cell_probabilities()
                        .iter()
                        .filter(|&&p| p > 0.0)
                        .map(|p| -p * p.log2())
                        .sum::<f64>()
                }
            })
            .sum();
        bits / self.modes.len() as f64
    }

    /// Lloyd-Max level count of mode `m`.
    pub fn levels(&self, m: usize) -> Option<usize> {
        match &self.modes[m] {
            ModeCoder::LloydMax { q, .. } => Some(q.levels()),
            _ => None,
        }
    }

    /// Encodes and decodes `w`. The dither of realization `index` is drawn
    /// from its own stream, two uniforms per mode for every mode, so it does
    /// not depend on the allocation.
    pub fn encode(&self, w: &[C64], seed: u64, index: u64) -> Result<CoefficientCodeword> {
        if w.len() != self.modes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.modes.len(),
                found: w.len(),
                context: "coefficient vector vs coder",
            });
        }
        let n = w.len();
        let mut out = CoefficientCodeword {
            indices: vec![None; n],
            dither: vec![None; n],
            reconstruction: vec![C64::new(0.0, 0.0); n],
        };
        let mut rng = (self.kind == QuantizerKind::Dithered).then(|| rng::stream(seed, Domain::Dither, index));
        for (m, coder) in self.modes.iter().enumerate() {
            let units = rng.as_mut().map(|r| [r.random::<f64>(), r.random::<f64>()]);
            match coder {
                ModeCoder::Off => {}
                ModeCoder::LloydMax { sigma, q } => {
                    let i = [q.quantize(w[m].re / sigma), q.quantize(w[m].im / sigma)];
                    out.indices[m] = Some([i[0] as i64, i[1] as i64]);
                    out.reconstruction[m] = C64::new(q.reconstruct(i[0]), q.reconstruct(i[1])) * *sigma;
                }
                ModeCoder::Dithered { sigma, q } => {
                    let u = units.expect("dither stream exists for the dithered coder");
                    let d = [q.dither_from_unit(u[0]), q.dither_from_unit(u[1])];
                    let i = [q.quantize(w[m].re / sigma, d[0]), q.quantize(w[m].im / sigma, d[1])];
                    let g = q.mmse_gain() * sigma;
                    out.indices[m] = Some(i);
                    out.dither[m] = Some(d);
                    out.reconstruction[m] = C64::new(q.reconstruct(i[0], d[0]), q.reconstruct(i[1], d[1])) * g;
                }
            }
        }
        Ok(out)
    }
}

/// One-shot convenience: design a coder and encode `w`.
pub fn quantize_coeffs(
    w: &[C64],
    l: &EigenSpectrum,
    alloc: &BitAllocation,
    kind: QuantizerKind,
    seed: u64,
    index: u64,
) -> Result<CoefficientCodeword> {
    CoefficientCoder::new(l, alloc, kind, None)?.encode(w, seed, index)
}
