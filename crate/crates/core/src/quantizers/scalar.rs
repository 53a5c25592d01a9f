//! Scalar quantizers for unit-variance Gaussian components.
//!
//! Two families are provided: the fixed-rate Lloyd-Max quantizer and the
//! subtractively dithered uniform quantizer whose step is matched to a target
//! index entropy.

use std::collections::HashMap;
use std::hash::Hash;

use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::numeric::{normal_mass, normal_pdf};

pub const MAX_LLOYD_LEVELS: usize = 1 << 16;
const LLOYD_TOL: f64 = 1e-10;
const LLOYD_MAX_ITERS: usize = 100_000;

/// Largest/smallest dithered step considered by the entropy matcher.
pub const MAX_DITHER_STEP: f64 = 1e3;
pub const MIN_DITHER_STEP: f64 = 1e-6;
const ENTROPY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantizerKind {
    LloydMax,
    Dithered,
}

/// Fixed-rate Lloyd-Max quantizer for N(0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct LloydMaxQuantizer {
    codebook: Vec<f64>,
    thresholds: Vec<f64>,
    mse: f64,
    iterations: usize,
}

fn standard_normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// `∫_a^b x φ(x) dx`.
fn first_moment(a: f64, b: f64) -> f64 {
    normal_pdf(a) - normal_pdf(b)
}

/// `∫_a^b x² φ(x) dx`.
fn second_moment(a: f64, b: f64) -> f64 {
    let edge = |x: f64| if x.is_infinite() { 0.0 } else { x * normal_pdf(x) };
    normal_mass(a, b) + edge(a) - edge(b)
}

impl LloydMaxQuantizer {
    /// Runs the Lloyd iteration from a companded (`φ^{1/3}` point density)
    /// start until no codepoint moves by more than 1e-10.
    pub fn design(levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::Parameter("quantizer needs at least one level".into()));
        }
        if levels > MAX_LLOYD_LEVELS {
            return Err(Error::Capacity {
                what: "lloyd-max levels",
                requested: levels as u64,
                limit: MAX_LLOYD_LEVELS as u64,
            });
        }
        if levels == 1 {
            return Ok(LloydMaxQuantizer {
                codebook: vec![0.0],
                thresholds: Vec::new(),
                mse: 1.0,
                iterations: 0,
            });
        }
        let l = levels as f64;
        let mut code: Vec<f64> = (0..levels)
            .map(|i| 3f64.sqrt() * standard_normal_quantile((i as f64 + 0.5) / l))
            .collect();
        let mut thresholds = vec![0.0; levels - 1];
        let mut iterations = 0;
        loop {
            if iterations >= LLOYD_MAX_ITERS {
                return Err(Error::Convergence {
                    what: "lloyd-max design",
                    iterations,
                });
            }
            iterations += 1;
            for (t, w) in thresholds.iter_mut().zip(code.windows(2)) {
                *t = 0.5 * (w[0] + w[1]);
            }
            let mut moved = 0.0f64;
            for (i, c) in code.iter_mut().enumerate() {
                let (a, b) = cell(&thresholds, i);
                let mass = normal_mass(a, b);
                if mass > 0.0 {
                    let next = first_moment(a, b) / mass;
                    moved = moved.max((next - *c).abs());
                    *c = next;
                }
            }
            if moved < LLOYD_TOL {
                break;
            }
        }
        for (t, w) in thresholds.iter_mut().zip(code.windows(2)) {
            *t = 0.5 * (w[0] + w[1]);
        }
        let mse = (0..levels)
            .map(|i| {
                let (a, b) = cell(&thresholds, i);
                let c = code[i];
                second_moment(a, b) - 2.0 * c * first_moment(a, b) + c * c * normal_mass(a, b)
            })
            .sum();
        Ok(LloydMaxQuantizer {
            codebook: code,
            thresholds,
            mse,
            iterations,
        })
    }

    pub fn levels(&self) -> usize {
        self.codebook.len()
    }

    pub fn codebook(&self) -> &[f64] {
        &self.codebook
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Mean squared error on N(0, 1).
    pub fn mse(&self) -> f64 {
        self.mse
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Cell bounds `(a, b]` of level `i`.
    pub fn cell(&self, i: usize) -> (f64, f64) {
        cell(&self.thresholds, i)
    }

    pub fn cell_probabilities(&self) -> Vec<f64> {
        (0..self.levels())
            .map(|i| {
                let (a, b) = self.cell(i);
                normal_mass(a, b)
            })
            .collect()
    }

    pub fn quantize(&self, x: f64) -> usize {
        self.thresholds.partition_point(|&t| t < x)
    }

    pub fn reconstruct(&self, index: usize) -> f64 {
        self.codebook[index]
    }
}

fn cell(thresholds: &[f64], i: usize) -> (f64, f64) {
    let a = if i == 0 { f64::NEG_INFINITY } else { thresholds[i - 1] };
    let b = thresholds.get(i).copied().unwrap_or(f64::INFINITY);
    (a, b)
}

/// Mid-tread uniform quantizer with subtractive dither.
///
/// With dither `d` uniform on `(-step/2, step/2]` shared by encoder and
/// decoder, the reconstruction error `reconstruct(quantize(x, d), d) - x`
/// is uniform on the same interval and independent of `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DitheredUniform {
    step: f64,
}

impl DitheredUniform {
    pub fn new(step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Parameter(format!("step must be positive, got {step}")));
        }
        Ok(DitheredUniform { step })
    }

    /// Step whose dither-conditional index entropy on N(0, 1) equals
    /// `target_bits` (Illinois false-position search in `ln(step)`).
    pub fn for_entropy(target_bits: f64) -> Result<Self> {
        if !target_bits.is_finite() || target_bits < 0.0 {
            return Err(Error::Parameter(format!(
                "target entropy must be >= 0, got {target_bits}"
            )));
        }
        let f = |ln_step: f64| conditional_index_entropy(ln_step.exp()) - target_bits;
        let (mut a, mut b) = (MAX_DITHER_STEP.ln(), MIN_DITHER_STEP.ln());
        let (mut fa, mut fb) = (f(a), f(b));
        if fa >= 0.0 {
            return Self::new(MAX_DITHER_STEP);
        }
        if fb < 0.0 {
            return Err(Error::Capacity {
                what: "dithered quantizer entropy (bits)",
                requested: target_bits.ceil() as u64,
                limit: conditional_index_entropy(MIN_DITHER_STEP).floor() as u64,
            });
        }
        let mut side = 0i8;
        for _ in 0..200 {
            let c = (a * fb - b * fa) / (fb - fa);
            let fc = f(c);
            if fc.abs() < ENTROPY_TOL || (a - b).abs() < 1e-14 {
                return Self::new(c.exp());
            }
            if fc < 0.0 {
                a = c;
                fa = fc;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                b = c;
                fb = fc;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
        }
        Err(Error::Convergence {
            what: "dithered step entropy matching",
            iterations: 200,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Maps a uniform draw `u ∈ [0, 1)` to a dither value in `(-step/2, step/2]`.
    pub fn dither_from_unit(&self, u: f64) -> f64 {
        self.step * (0.5 - u)
    }

    pub fn quantize(&self, x: f64, dither: f64) -> i64 {
        ((x + dither) / self.step + 0.5).floor() as i64
    }

    pub fn reconstruct(&self, index: i64, dither: f64) -> f64 {
        index as f64 * self.step - dither
    }

    /// Error variance `step² / 12`.
    pub fn noise_variance(&self) -> f64 {
        self.step * self.step / 12.0
    }

    /// Linear MMSE gain applied after dither subtraction for a unit-variance
    /// input: `1 / (1 + step²/12)`.
    pub fn mmse_gain(&self) -> f64 {
        1.0 / (1.0 + self.noise_variance())
    }

    pub fn conditional_entropy(&self) -> f64 {
        conditional_index_entropy(self.step)
    }
}

/// `H(Q | D)` in bits for a N(0, 1) input quantized with step `step` and
/// dither uniform over one cell.
///
/// Uses the identity `H(Q | D) = h(X + N) - log2(step)` with `N` uniform on
/// one cell; the differential entropy is integrated with composite Simpson
/// over the (smooth, symmetric) density of `X + N`.
pub fn conditional_index_entropy(step: f64) -> f64 {
    let half = 0.5 * step;
    let span = half + 10.0;
    let intervals = ((span / 0.05).ceil() as usize).div_ceil(2) * 2;
    let h = span / intervals as f64;
    let integrand = |y: f64| {
        let p = normal_mass(y - half, y + half) / step;
        if p > 0.0 {
            -p * p.log2()
        } else {
            0.0
        }
    };
    let mut acc = integrand(0.0) + integrand(span);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * integrand(i as f64 * h);
    }
    let diff_entropy = 2.0 * acc * h / 3.0;
    (diff_entropy - step.log2()).max(0.0)
}

/// Plug-in entropy (bits/symbol) of the empirical distribution of `indices`.
/// Returns 0 for an empty sequence.
pub fn empirical_entropy<T, I>(indices: I) -> f64
where
    T: Hash + Eq,
    I: IntoIterator<Item = T>,
{
    let mut counts: HashMap<T, u64> = HashMap::new();
    let mut n = 0u64;
    for x in indices {
        *counts.entry(x).or_default() += 1;
        n += 1;
    }
    if n == 0 {
        return 0.0;
    }
    let mut c: Vec<u64> = counts.into_values().collect();
    c.sort_unstable();
    let n = n as f64;
    c.into_iter()
        .map(|k| {
            let p = k as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// A designed scalar quantizer of either family.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarQuantizer {
    LloydMax(LloydMaxQuantizer),
    Dithered(DitheredUniform),
}

impl ScalarQuantizer {
    pub fn kind(&self) -> QuantizerKind {
        match self {
            ScalarQuantizer::LloydMax(_) => QuantizerKind::LloydMax,
            ScalarQuantizer::Dithered(_) => QuantizerKind::Dithered,
        }
    }
}

pub fn lloyd_max_design(levels: usize) -> Result<ScalarQuantizer> {
    LloydMaxQuantizer::design(levels).map(ScalarQuantizer::LloydMax)
}
