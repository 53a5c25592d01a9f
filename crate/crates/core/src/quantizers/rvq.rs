//! Random vector quantization on the Grassmannian `G(n, 1)`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::C64;
use crate::rng::{self, Domain};

/// Codebook memory guard: at most `2^24` codewords.
pub const MAX_RVQ_BITS: u32 = 24;
const UNIT_NORM_TOL: f64 = 1e-9;

/// `2^bits` unit vectors in `C^dim`, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannCodebook {
    dim: usize,
    words: Vec<C64>,
}

impl GrassmannCodebook {
    /// Normalizes every row of `words` (length a multiple of `dim`).
    pub fn from_vectors(dim: usize, words: Vec<C64>) -> Result<Self> {
        if dim == 0 || words.is_empty() || !words.len().is_multiple_of(dim) {
            return Err(Error::Validation("codebook must hold whole non-empty codewords".into()));
        }
        let mut words = words;
        for w in words.chunks_exact_mut(dim) {
            let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::Validation("codeword has zero or non-finite norm".into()));
            }
            w.iter_mut().for_each(|z| *z /= norm);
        }
        Ok(GrassmannCodebook { dim, words })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, k: usize) -> &[C64] {
        &self.words[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[C64]> {
        self.words.chunks_exact(self.dim)
    }

    /// Flat little-endian file: `u32 dim`, `u32 count`, then `count * dim`
    /// complex entries as interleaved `f64` (re, im).
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(8 + self.words.len() * 16);
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for z in &self.words {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        if buf.len() < 8 {
            return Err(Error::Format("codebook header truncated".into()));
        }
        let dim = u32::from_le_bytes(buf[0..4].try_into().unwrap()) as usize;
        let count = u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize;
        let want = dim
            .checked_mul(count)
            .and_then(|n| n.checked_mul(16))
            .ok_or_else(|| Error::Format("codebook header overflows".into()))?;
        if buf.len() - 8 != want {
            return Err(Error::Format(format!(
                "codebook payload has {} bytes, header implies {want}",
                buf.len() - 8
            )));
        }
        let words = buf[8..]
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[0..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..16].try_into().unwrap()),
                )
            })
            .collect::<Vec<_>>();
        if dim == 0 || count == 0 {
            return Err(Error::Format("codebook is empty".into()));
        }
        for w in words.chunks_exact(dim) {
            let n2: f64 = w.iter().map(|z| z.norm_sqr()).sum();
            if !((n2 - 1.0).abs() <= UNIT_NORM_TOL) {
                return Err(Error::Format("codeword is not unit norm".into()));
            }
        }
        Ok(GrassmannCodebook { dim, words })
    }
}

fn check_rvq(n: usize, bits: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::Parameter("codebook dimension must be positive".into()));
    }
    if bits > MAX_RVQ_BITS {
        return Err(Error::Capacity {
            what: "rvq codebook bits",
            requested: bits as u64,
            limit: MAX_RVQ_BITS as u64,
        });
    }
    Ok(())
}

/// Draws the next codeword of a codebook stream into `buf` (normalized
/// complex Gaussian; an all-zero draw is redrawn).
fn next_word<R: rand::Rng>(rng: &mut R, buf: &mut [C64]) {
    loop {
        for z in buf.iter_mut() {
            *z = rng::complex_normal(rng);
        }
        let norm = buf.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            buf.iter_mut().for_each(|z| *z /= norm);
            return;
        }
    }
}

/// RVQ codebook number `index` under `seed`: `2^bits` normalized complex
/// Gaussian vectors, i.e. i.i.d. uniform on the unit sphere of `C^n`.
pub fn rvq_codebook_indexed(n: usize, bits: u32, seed: u64, index: u64) -> Result<GrassmannCodebook> {
    check_rvq(n, bits)?;
    let count = 1usize << bits;
    let mut rng = rng::stream(seed, Domain::Codebook, index);
    let mut words = vec![C64::new(0.0, 0.0); count * n];
    for w in words.chunks_exact_mut(n) {
        next_word(&mut rng, w);
    }
    Ok(GrassmannCodebook { dim: n, words })
}

/// Best codeword of codebook `index` under `seed` for `u`, found while the
/// codebook is generated so that it is never stored. Same result as
/// [`rvq_quantize`] on [`rvq_codebook_indexed`]: `(index, chordal_sq, word)`.
pub fn rvq_search(u: &[C64], bits: u32, seed: u64, index: u64) -> Result<(usize, f64, Vec<C64>)> {
    let n = u.len();
    check_rvq(n, bits)?;
    check_unit(u)?;
    let mut rng = rng::stream(seed, Domain::Codebook, index);
    let mut buf = vec![C64::new(0.0, 0.0); n];
    let mut best = (0usize, -1.0f64, buf.clone());
    for k in 0..1usize << bits {
        next_word(&mut rng, &mut buf);
        let g = inner(u, &buf).norm_sqr();
        if g > best.1 {
            best = (k, g, buf.clone());
        }
    }
    Ok((best.0, (1.0 - best.1).clamp(0.0, 1.0), best.2))
}

fn check_unit(u: &[C64]) -> Result<()> {
    let norm2: f64 = u.iter().map(|z| z.norm_sqr()).sum();
    if (norm2 - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::Validation(format!("vector is not unit norm (|u|^2 = {norm2})")));
    }
    Ok(())
}

pub fn rvq_codebook(n: usize, bits: u32, seed: u64) -> Result<GrassmannCodebook> {
    rvq_codebook_indexed(n, bits, seed, 0)
}

/// `u^H v`.
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Best codeword by `|u^H c|^2` (first wins ties) and its squared chordal
/// distance `1 - |u^H c|^2`.
pub fn rvq_quantize(u: &[C64], codebook: &GrassmannCodebook) -> Result<(usize, f64)> {
    if codebook.is_empty() {
        return Err(Error::Validation("empty codebook".into()));
    }
    if u.len() != codebook.dim() {
        return Err(Error::DimensionMismatch {
            expected: codebook.dim(),
            found: u.len(),
            context: "vector vs codebook dimension",
        });
    }
    check_unit(u)?;
    let mut best = (0usize, -1.0f64);
    for (k, w) in codebook.iter().enumerate() {
        let g = inner(u, w).norm_sqr();
        if g > best.1 {
            best = (k, g);
        }
    }
    Ok((best.0, (1.0 - best.1).clamp(0.0, 1.0)))
}

/// Expected squared chordal distance of RVQ with `2^bits` codewords on
/// `G(n, 1)`: `2^B * Beta(2^B, n / (n - 1))`.
pub fn rvq_expected_chordal(n: usize, bits: u32) -> f64 {
    let m = (bits as f64).exp2();
    let a = n as f64 / (n as f64 - 1.0);
    (m.ln() + statrs::function::beta::ln_beta(m, a)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn codewords_are_unit_and_reproducible() {
        let cb = rvq_codebook(5, 6, 1).unwrap();
        assert_eq!(cb.len(), 64);
        for w in cb.iter() {
            let n: f64 = w.iter().map(|z| z.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert_eq!(cb, rvq_codebook(5, 6, 1).unwrap());
        assert_ne!(cb, rvq_codebook(5, 6, 2).unwrap());
        assert_eq!(rvq_codebook(3, 0, 4).unwrap().len(), 1);
    }

    #[test]
    fn capacity_guard() {
        assert!(matches!(
            rvq_codebook(2, MAX_RVQ_BITS + 1, 0),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn exact_hit_has_zero_distortion() {
        let cb = rvq_codebook(4, 4, 3).unwrap();
        let u: Vec<C64> = cb.word(7).iter().map(|z| z * C64::from_polar(1.0, 0.3)).collect();
        let (k, d) = rvq_quantize(&u, &cb).unwrap();
        assert_eq!(k, 7);
        assert!(d < 1e-14);
    }

    #[test]
    fn streaming_search_matches_stored_codebook() {
        for (n, bits, idx) in [(3, 7, 0u64), (5, 4, 9), (2, 0, 1)] {
            let cb = rvq_codebook_indexed(n, bits, 42, idx).unwrap();
            let probe = rvq_codebook_indexed(n, 0, 7, idx).unwrap();
            let u = probe.word(0);
            let (k, d) = rvq_quantize(u, &cb).unwrap();
            let (k2, d2, w) = rvq_search(u, bits, 42, idx).unwrap();
            assert_eq!((k, d), (k2, d2));
            assert_eq!(cb.word(k), w.as_slice());
        }
    }

    #[test]
    fn pairwise_overlap_mean_is_one_over_n() {
        let n = 6;
        let cb = rvq_codebook(n, 12, 17).unwrap();
        let mut acc = 0.0;
        let pairs = cb.len() / 2;
        for k in 0..pairs {
            acc += inner(cb.word(2 * k), cb.word(2 * k + 1)).norm_sqr();
        }
        let mean = acc / pairs as f64;
        // Beta(1, n-1): mean 1/n, variance (n-1)/(n^2 (n+1))
        let sd = ((n as f64 - 1.0) / (n as f64 * n as f64 * (n as f64 + 1.0))).sqrt();
        assert!((mean - 1.0 / n as f64).abs() < 4.0 * sd / (pairs as f64).sqrt());
    }

    #[test]
    fn single_codeword_mean_chordal() {
        let n = 4;
        let trials = 20_000;
        let mut acc = 0.0;
        for t in 0..trials {
            let cb = rvq_codebook_indexed(n, 0, 5, t).unwrap();
            let u = rvq_codebook_indexed(n, 0, 6, t).unwrap();
            acc += rvq_quantize(u.word(0), &cb).unwrap().1;
        }
        let mean = acc / trials as f64;
        let want = (n as f64 - 1.0) / n as f64;
        // Beta(n-1, 1) variance
        let sd = ((n as f64 - 1.0) / (n as f64 * n as f64 * (n as f64 + 1.0))).sqrt();
        assert!((mean - want).abs() < 4.0 * sd / (trials as f64).sqrt());
        assert_relative_eq!(rvq_expected_chordal(n, 0), want, epsilon = 1e-12);
    }

    #[test]
    fn expected_chordal_formula_n2() {
        // n = 2: 1 / (2^B + 1)
        for b in 0..10 {
            let m = (b as f64).exp2();
            assert_relative_eq!(rvq_expected_chordal(2, b), 1.0 / (m + 1.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn codebook_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.bin");
        let cb = rvq_codebook(3, 5, 8).unwrap();
        cb.write_to(&path).unwrap();
        assert_eq!(GrassmannCodebook::read_from(&path).unwrap(), cb);
        std::fs::write(&path, [1u8, 0, 0, 0, 2, 0, 0, 0, 9]).unwrap();
        assert!(matches!(GrassmannCodebook::read_from(&path), Err(Error::Format(_))));
    }
}
