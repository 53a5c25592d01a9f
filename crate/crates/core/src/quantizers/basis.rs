//! Long-term basis feedback: RVQ of dominant eigenvector columns followed by
//! re-orthonormalization.

use crate::channel::{kron_columns, kron_order, Basis, EigenSpectrum};
use crate::error::{Error, Result};
use crate::numeric::{CMatrix, C64};
use rayon::prelude::*;

use crate::quantizers::rvq::{inner, rvq_quantize, rvq_search, GrassmannCodebook};

/// Decoder-side basis `Û` with the per-column quantization errors.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedBasis {
    /// Effective unitary basis, columns in the same order as the true basis.
    pub matrix: Basis,
    /// Number of RVQ-quantized columns (both factors for the structured scheme).
    pub p: usize,
    /// Mean RVQ bits per quantized column.
    pub bits_per_column: f64,
    /// `1 - |u^H û|^2` of each quantized column before re-orthonormalization.
    pub column_chordal_sq: Vec<f64>,
    /// Quantized factor bases `(Ûs, Ûf)` for the Kronecker scheme.
    pub factors: Option<(Basis, Basis)>,
    /// Modes spanned by quantized dominant columns: the first `p` for direct
    /// quantization, the products of quantized factor columns otherwise.
    pub dominant_modes: Vec<bool>,
}

impl QuantizedBasis {
    /// Unquantized basis (`Û = U`).
    pub fn exact(u: &Basis) -> Self {
        QuantizedBasis {
            matrix: u.clone(),
            p: 0,
            bits_per_column: 0.0,
            column_chordal_sq: Vec::new(),
            factors: None,
            dominant_modes: vec![false; u.dim()],
        }
    }

    pub fn mean_chordal_sq(&self) -> f64 {
        if self.column_chordal_sq.is_empty() {
            0.0
        } else {
            self.column_chordal_sq.iter().sum::<f64>() / self.column_chordal_sq.len() as f64
        }
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass, processing
/// columns left to right. A column that collapses numerically is replaced by
/// the standard basis vector with the largest residual.
pub fn reorthonormalize(cols: &CMatrix) -> CMatrix {
    let n = cols.nrows();
    let k = cols.ncols();
    let mut out = CMatrix::zeros(n, k);
    let project_out = |v: &mut Vec<C64>, out: &CMatrix, upto: usize| {
        for _ in 0..2 {
            for i in 0..upto {
                let q = out.column(i);
                let c: C64 = q.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                for (vi, qi) in v.iter_mut().zip(q.iter()) {
                    *vi -= c * qi;
                }
            }
        }
    };
    for j in 0..k {
        let mut v: Vec<C64> = cols.column(j).iter().copied().collect();
        let before = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        project_out(&mut v, &out, j);
        let mut norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm <= 1e-10 * before.max(1.0) {
            let mut best = (v.clone(), 0.0);
            for e in 0..n {
                let mut cand = vec![C64::new(0.0, 0.0); n];
                cand[e] = C64::new(1.0, 0.0);
                project_out(&mut cand, &out, j);
                let cn = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if cn > best.1 {
                    best = (cand, cn);
                }
            }
            v = best.0;
            norm = best.1;
        }
        for (i, z) in v.iter().enumerate() {
            out[(i, j)] = z / norm;
        }
    }
    out
}

fn align_phase(u: &[C64], c: &[C64]) -> Vec<C64> {
    let ip = inner(u, c);
    let phase = if ip.norm() > 0.0 {
        C64::from_polar(1.0, -ip.arg())
    } else {
        C64::new(1.0, 0.0)
    };
    c.iter().map(|z| z * phase).collect()
}

fn check_p(u: &Basis, p: usize) -> Result<()> {
    if p > u.dim() {
        return Err(Error::Parameter(format!(
            "cannot quantize {p} columns of a {}-dimensional basis",
            u.dim()
        )));
    }
    Ok(())
}

/// Quantizes the first `codebooks.len()` columns of `u` with the given
/// codebooks, phase-aligns each so that `u^H û` is real and non-negative,
/// keeps the remaining columns and re-orthonormalizes in column order.
pub fn quantize_columns_with(u: &Basis, codebooks: &[GrassmannCodebook]) -> Result<(CMatrix, Vec<f64>)> {
    let p = codebooks.len();
    check_p(u, p)?;
    if p == 0 {
        return Ok((u.matrix().clone(), Vec::new()));
    }
    let mut cols = u.matrix().clone();
    let mut chordal = Vec::with_capacity(p);
    for (m, cb) in codebooks.iter().enumerate() {
        let um = u.column(m);
        let (k, d) = rvq_quantize(&um, cb)?;
        for (i, z) in align_phase(&um, cb.word(k)).into_iter().enumerate() {
            cols[(i, m)] = z;
        }
        chordal.push(d);
    }
    Ok((reorthonormalize(&cols), chordal))
}

/// RVQ of the `p` dominant columns of `u`; column `m` uses codebook
/// `first_codebook + m` of `seed`. Codebooks are searched as they are
/// generated, so large `bits` cost time but no memory.
pub fn quantize_columns(u: &Basis, p: usize, bits: u32, seed: u64, first_codebook: u64) -> Result<(CMatrix, Vec<f64>)> {
    check_p(u, p)?;
    if p == 0 {
        return Ok((u.matrix().clone(), Vec::new()));
    }
    let found = (0..p)
        .into_par_iter()
        .map(|m| rvq_search(&u.column(m), bits, seed, first_codebook + m as u64))
        .collect::<Result<Vec<_>>>()?;
    let mut cols = u.matrix().clone();
    let mut chordal = Vec::with_capacity(p);
    for (m, (_, d, word)) in found.into_iter().enumerate() {
        for (i, z) in align_phase(&u.column(m), &word).into_iter().enumerate() {
            cols[(i, m)] = z;
        }
        chordal.push(d);
    }
    Ok((reorthonormalize(&cols), chordal))
}

/// Direct quantization of the `p` dominant columns of an (effective) basis
/// on `G(N, 1)`.
pub fn quantize_dominant(u: &Basis, p: usize, bits: u32, seed: u64) -> Result<QuantizedBasis> {
    let (m, chordal) = quantize_columns(u, p, bits, seed, 0)?;
    Ok(QuantizedBasis {
        matrix: Basis::from_matrix_unchecked(m),
        p,
        bits_per_column: bits as f64,
        column_chordal_sq: chordal,
        factors: None,
        dominant_modes: (0..u.dim()).map(|k| k < p).collect(),
    })
}

/// Separable basis feedback: the `p_s` dominant columns of `Us` and the
/// `p_f` dominant columns of `Uf` are RVQ-quantized independently with
/// `bits` each, each factor is re-orthonormalized, and the effective basis is
/// `Ûs ⊗ Ûf` with the column permutation of [`crate::channel::kron_eigenbasis`].
#[allow(clippy::too_many_arguments)]
pub fn quantize_basis(
    us: &Basis,
    ls: &EigenSpectrum,
    uf: &Basis,
    lf: &EigenSpectrum,
    p_s: usize,
    p_f: usize,
    bits: u32,
    seed: u64,
) -> Result<QuantizedBasis> {
    quantize_basis_split(us, ls, uf, lf, (p_s, bits), (p_f, bits), seed)
}

/// [`quantize_basis`] with separate `(columns, bits per column)` for the
/// spatial and frequency factors.
pub fn quantize_basis_split(
    us: &Basis,
    ls: &EigenSpectrum,
    uf: &Basis,
    lf: &EigenSpectrum,
    (p_s, bits_s): (usize, u32),
    (p_f, bits_f): (usize, u32),
    seed: u64,
) -> Result<QuantizedBasis> {
    let (ms, mut chordal) = quantize_columns(us, p_s, bits_s, seed, 0)?;
    let (mf, chordal_f) = quantize_columns(uf, p_f, bits_f, seed, p_s as u64)?;
    chordal.extend(chordal_f);
    let order = kron_order(ls, lf);
    let effective = kron_columns(&ms, &mf, &order);
    let dominant_modes = order.iter().map(|&(i, j)| i < p_s && j < p_f).collect();
    Ok(QuantizedBasis {
        matrix: Basis::from_matrix_unchecked(effective),
        p: p_s + p_f,
        bits_per_column: if p_s + p_f == 0 {
            0.0
        } else {
            (p_s as f64 * bits_s as f64 + p_f as f64 * bits_f as f64) / (p_s + p_f) as f64
        },
        column_chordal_sq: chordal,
        factors: Some((Basis::from_matrix_unchecked(ms), Basis::from_matrix_unchecked(mf))),
        dominant_modes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{eig_hermitian, exp_correlation, kron_eigenbasis};
    use crate::quantizers::rvq::rvq_codebook_indexed;

    fn factor(n: usize, rho: f64) -> (Basis, EigenSpectrum) {
        eig_hermitian(&exp_correlation(n, rho).unwrap()).unwrap()
    }

    #[test]
    fn zero_columns_is_exact() {
        let (us, ls) = factor(4, 0.7);
        let (uf, lf) = factor(3, 0.5);
        let q = quantize_basis(&us, &ls, &uf, &lf, 0, 0, 8, 1).unwrap();
        let (u, _) = kron_eigenbasis(&us, &ls, &uf, &lf).unwrap();
        assert_eq!(q.matrix.matrix(), u.matrix());
        assert!(q.column_chordal_sq.is_empty());
    }

    #[test]
    fn codebook_containing_true_columns_reproduces_basis() {
        let (u, _) = factor(4, 0.8);
        let books: Vec<GrassmannCodebook> = (0..2)
            .map(|m| {
                let mut words = rvq_codebook_indexed(4, 3, 9, m)
                    .unwrap()
                    .iter()
                    .flatten()
                    .copied()
                    .collect::<Vec<_>>();
                // true column with an arbitrary phase
                words.extend(u.column(m as usize).iter().map(|z| z * C64::from_polar(1.0, 1.1)));
                GrassmannCodebook::from_vectors(4, words).unwrap()
            })
            .collect();
        let (m, chordal) = quantize_columns_with(&u, &books).unwrap();
        assert!(chordal.iter().all(|&d| d < 1e-14));
        let diff = (m - u.matrix()).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn quantized_basis_is_unitary_and_reports_rvq_errors() {
        let (us, ls) = factor(4, 0.8);
        let (uf, lf) = factor(4, 0.8);
        let q = quantize_basis(&us, &ls, &uf, &lf, 2, 2, 6, 21).unwrap();
        assert!(q.matrix.unitarity_defect() < 1e-10);
        let (a, b) = q.factors.as_ref().unwrap();
        assert!(a.unitarity_defect() < 1e-10 && b.unitarity_defect() < 1e-10);
        assert_eq!(q.column_chordal_sq.len(), 4);
        assert_eq!(q.dominant_modes.iter().filter(|&&d| d).count(), 4);
        assert!(q.dominant_modes[0]);
        // spatial columns use codebooks 0, 1; frequency columns 2, 3
        for (m, want) in q.column_chordal_sq.iter().enumerate() {
            let (basis, col) = if m < 2 { (&us, m) } else { (&uf, m - 2) };
            let cb = rvq_codebook_indexed(4, 6, 21, m as u64).unwrap();
            let (_, d) = rvq_quantize(&basis.column(col), &cb).unwrap();
            assert_eq!(d, *want);
        }
    }

    #[test]
    fn phase_alignment_makes_overlap_real() {
        let (u, _) = factor(5, 0.6);
        let (m, _) = quantize_columns(&u, 1, 8, 3, 0).unwrap();
        let col: Vec<C64> = m.column(0).iter().copied().collect();
        let ip = inner(&u.column(0), &col);
        assert!(ip.im.abs() < 1e-14 && ip.re > 0.0);
    }

    #[test]
    fn aligned_error_norm_matches_chordal_at_small_errors() {
        let (u, _) = factor(3, 0.8);
        for seed in 0..8 {
            let (m, chordal) = quantize_columns(&u, 1, 12, seed, 0).unwrap();
            assert!(chordal[0] < 0.05);
            let err: f64 = u
                .column(0)
                .iter()
                .zip(m.column(0).iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            let ratio = err / chordal[0];
            assert!((0.9..=1.1).contains(&ratio), "seed {seed}: {ratio}");
        }
    }

    #[test]
    fn always_unitary_for_any_bits() {
        let (u, _) = factor(6, 0.9);
        for bits in [0, 1, 3, 10] {
            for p in [1, 3, 6] {
                let q = quantize_dominant(&u, p, bits, 5 + bits as u64).unwrap();
                assert!(q.matrix.unitarity_defect() < 1e-10, "bits {bits} p {p}");
            }
        }
    }

    #[test]
    fn reorthonormalize_handles_collapsed_column() {
        let mut m = CMatrix::identity(3, 3);
        m[(0, 1)] = C64::new(1.0, 0.0);
        m[(1, 1)] = C64::new(0.0, 0.0);
        let q = reorthonormalize(&m);
        assert!(crate::numeric::unitarity_defect(&q) < 1e-12);
    }

    #[test]
    fn too_many_columns_rejected() {
        let (u, _) = factor(3, 0.5);
        assert!(matches!(quantize_dominant(&u, 4, 2, 0), Err(Error::Parameter(_))));
    }
}
