//! Channel covariances, their eigendecompositions and correlated complex
//! Gaussian channel draws.
//!
//! The stacked spatial-frequency channel `h` of dimension `N = nt * nc` is
//! modelled as `CN(0, R)` with `R = U diag(lambda) U^H`. For separable
//! covariances `R = Rs ⊗ Rf` the eigendecomposition is composed from the two
//! small factor decompositions ([`kron_eigenbasis`]), which is the only
//! supported route above [`MAX_DENSE_EIG_DIM`].

use nalgebra::SymmetricEigen;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{frobenius, unitarity_defect, CMatrix, C64};
use crate::rng::{self, Domain};

/// Largest dimension handed to the dense Hermitian eigensolver.
pub const MAX_DENSE_EIG_DIM: usize = 1024;
/// Default guard on the dimension of a Kronecker product covariance.
pub const MAX_KRON_DIM: usize = 16384;

const HERMITIAN_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-10;

/// Conjugate-symmetric covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: CMatrix,
}

impl HermitianMatrix {
    /// Validates squareness and conjugate symmetry (relative to the largest
    /// entry). The stored matrix is symmetrized exactly.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Validation(format!(
                "covariance must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::Validation("covariance must be non-empty".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("covariance has non-finite entries".into()));
        }
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let n = m.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if worst > HERMITIAN_TOL * scale {
            return Err(Error::Validation(format!(
                "matrix is not Hermitian (max asymmetry {worst:.3e})"
            )));
        }
        let sym = (&m + m.adjoint()).scale(0.5);
        Ok(HermitianMatrix { m: sym })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }
}

/// Eigenvalues sorted non-increasing, all non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    values: Vec<f64>,
}

impl EigenSpectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("spectrum must be non-empty".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation(
                "spectrum entries must be finite and non-negative".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Validation("spectrum must be sorted non-increasing".into()));
        }
        Ok(EigenSpectrum { values })
    }

    /// Sorts (stably, descending) before validating.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(|a, b| b.total_cmp(a));
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Sum of the `p` largest eigenvalues.
    pub fn head_sum(&self, p: usize) -> f64 {
        self.values.iter().take(p).sum()
    }
}

/// Unitary matrix whose columns are the KLT directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    m: CMatrix,
}

impl Basis {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Validation("basis must be square and non-empty".into()));
        }
        let defect = unitarity_defect(&m);
        if defect > UNITARY_TOL * (m.nrows() as f64).sqrt().max(1.0) {
            return Err(Error::Validation(format!(
                "basis is not unitary (||U^H U - I||_F = {defect:.3e})"
            )));
        }
        Ok(Basis { m })
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Basis { m }
    }

    pub fn identity(n: usize) -> Self {
        Basis {
            m: CMatrix::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        self.m.column(j).iter().copied().collect()
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.m)
    }
}

/// A batch of channel realizations stored row-major (`count x dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBatch {
    dim: usize,
    data: Vec<C64>,
    seed: Option<u64>,
}

impl ChannelBatch {
    pub fn from_flat(dim: usize, data: Vec<C64>, seed: Option<u64>) -> Result<Self> {
        if dim == 0 || data.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len() % dim,
                context: "batch payload is not a whole number of realizations",
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("channel batch has non-finite entries".into()));
        }
        Ok(ChannelBatch { dim, data, seed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    /// Seed the batch was generated with; `None` for ingested data.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn realization(&self, i: usize) -> &[C64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[C64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[C64] {
        &self.data
    }
}

/// `[R]_{ij} = rho^{|i-j|}`.
pub fn exp_correlation(n: usize, rho: f64) -> Result<HermitianMatrix> {
    if n == 0 {
        return Err(Error::Parameter("correlation size must be positive".into()));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Parameter(format!("rho must lie in [0, 1), got {rho}")));
    }
    let m = CMatrix::from_fn(n, n, |i, j| C64::new(rho.powi(i.abs_diff(j) as i32), 0.0));
    HermitianMatrix::new(m)
}

pub fn kron_covariance(rs: &HermitianMatrix, rf: &HermitianMatrix) -> Result<HermitianMatrix> {
    kron_covariance_with_limit(rs, rf, MAX_KRON_DIM)
}

pub fn kron_covariance_with_limit(
    rs: &HermitianMatrix,
    rf: &HermitianMatrix,
    max_dim: usize,
) -> Result<HermitianMatrix> {
    let dim = rs.dim() as u64 * rf.dim() as u64;
    if dim > max_dim as u64 {
        return Err(Error::Capacity {
            what: "kronecker covariance dimension",
            requested: dim,
            limit: max_dim as u64,
        });
    }
    HermitianMatrix::new(rs.matrix().kronecker(rf.matrix()))
}

/// Dense Hermitian eigendecomposition, spectrum sorted descending (ties keep
/// solver order).
pub fn eig_hermitian(r: &HermitianMatrix) -> Result<(Basis, EigenSpectrum)> {
    let n = r.dim();
    if n > MAX_DENSE_EIG_DIM {
        return Err(Error::Capacity {
            what: "dense eigensolver dimension (use the Kronecker path)",
            requested: n as u64,
            limit: MAX_DENSE_EIG_DIM as u64,
        });
    }
    let eig = SymmetricEigen::new(r.matrix().clone());
    let raw: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let lmax = raw.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if let Some(&neg) = raw.iter().find(|&&v| v < -PSD_TOL * lmax) {
        return Err(Error::Validation(format!(
            "covariance is not positive semidefinite (eigenvalue {neg:.3e})"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
    let values = order.iter().map(|&k| raw[k].max(0.0)).collect();
    let vecs = &eig.eigenvectors;
    let u = CMatrix::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    Ok((Basis::from_matrix_unchecked(u), EigenSpectrum::new(values)?))
}

/// Factor index pairs `(i, j)` of the merged Kronecker spectrum
/// `ls[i] * lf[j]`, sorted descending; ties keep row-major Kronecker order.
pub fn kron_order(ls: &EigenSpectrum, lf: &EigenSpectrum) -> Vec<(usize, usize)> {
    let nf = lf.len();
    let mut pairs: Vec<(usize, usize)> = (0..ls.len()).flat_map(|i| (0..nf).map(move |j| (i, j))).collect();
    let prod = |&(i, j): &(usize, usize)| ls.values()[i] * lf.values()[j];
    pairs.sort_by(|a, b| prod(b).total_cmp(&prod(a)));
    pairs
}

/// Eigendecomposition of `Rs ⊗ Rf` from its factor decompositions.
pub fn kron_eigenbasis(
    us: &Basis,
    ls: &EigenSpectrum,
    uf: &Basis,
    lf: &EigenSpectrum,
) -> Result<(Basis, EigenSpectrum)> {
    if us.dim() != ls.len() {
        return Err(Error::DimensionMismatch {
            expected: us.dim(),
            found: ls.len(),
            context: "spatial basis vs spectrum",
        });
    }
    if uf.dim() != lf.len() {
        return Err(Error::DimensionMismatch {
            expected: uf.dim(),
            found: lf.len(),
            context: "frequency basis vs spectrum",
        });
    }
    let order = kron_order(ls, lf);
    let values = order.iter().map(|&(i, j)| ls.values()[i] * lf.values()[j]).collect();
    let u = kron_columns(us.matrix(), uf.matrix(), &order);
    Ok((Basis::from_matrix_unchecked(u), EigenSpectrum::new(values)?))
}

/// Columns `a_i ⊗ b_j` in the given pair order.
pub(crate) fn kron_columns(a: &CMatrix, b: &CMatrix, order: &[(usize, usize)]) -> CMatrix {
    let (na, nb) = (a.nrows(), b.nrows());
    let n = na * nb;
    let mut out = CMatrix::zeros(n, order.len());
    for (col, &(i, j)) in order.iter().enumerate() {
        for r in 0..na {
            let ar = a[(r, i)];
            for s in 0..nb {
                out[(r * nb + s, col)] = ar * b[(s, j)];
            }
        }
    }
    out
}

/// One realization `U diag(sqrt(lambda)) z`, `z ~ CN(0, I)` drawn from the
/// channel stream `index` of `seed`.
pub fn draw_realization(u: &Basis, l: &EigenSpectrum, seed: u64, index: u64) -> Vec<C64> {
    let n = u.dim();
    let mut rng = rng::stream(seed, Domain::Channel, index);
    let coeffs: Vec<C64> = l
        .values()
        .iter()
        .map(|&lam| rng::complex_normal(&mut rng) * lam.sqrt())
        .collect();
    let m = u.matrix();
    let mut h = vec![C64::new(0.0, 0.0); n];
    for (j, c) in coeffs.iter().enumerate() {
        if *c == C64::new(0.0, 0.0) {
            continue;
        }
        for (i, hi) in h.iter_mut().enumerate() {
            *hi += m[(i, j)] * c;
        }
    }
    h
}

/// Draws realizations `first..first + count` of the channel stream.
pub fn sample_channels_range(
    u: &Basis,
    l: &EigenSpectrum,
    first: u64,
    count: usize,
    seed: u64,
) -> Result<ChannelBatch> {
    if count == 0 {
        return Err(Error::EmptyBatch);
    }
    if u.dim() != l.len() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: l.len(),
            context: "basis vs spectrum",
        });
    }
    let rows: Vec<Vec<C64>> = (0..count as u64)
        .into_par_iter()
        .map(|k| draw_realization(u, l, seed, first + k))
        .collect();
    ChannelBatch::from_flat(u.dim(), rows.concat(), Some(seed))
}

pub fn sample_channels(u: &Basis, l: &EigenSpectrum, count: usize, seed: u64) -> Result<ChannelBatch> {
    sample_channels_range(u, l, 0, count, seed)
}

/// `||U diag(l) U^H - R||_F / ||R||_F`.
pub fn reconstruction_error(r: &HermitianMatrix, u: &Basis, l: &EigenSpectrum) -> f64 {
    let um = u.matrix();
    let scaled = CMatrix::from_fn(um.nrows(), um.ncols(), |i, j| um[(i, j)] * l.values()[j]);
    let rec = scaled * um.adjoint();
    frobenius(&(rec - r.matrix())) / frobenius(r.matrix()).max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag(v: &[f64]) -> HermitianMatrix {
        let n = v.len();
        HermitianMatrix::new(CMatrix::from_fn(n, n, |i, j| {
            C64::new(if i == j { v[i] } else { 0.0 }, 0.0)
        }))
        .unwrap()
    }

    /// Roots of the characteristic polynomial of a real symmetric 3x3 matrix
    /// by sign-change bisection on det(A - x I).
    fn cubic_eigs(a: &[[f64; 3]; 3]) -> Vec<f64> {
        let det = |x: f64| {
            let m = |i: usize, j: usize| a[i][j] - if i == j { x } else { 0.0 };
            m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
        };
        let mut roots = Vec::new();
        let steps = 30_000;
        let (lo, hi) = (-1.0, 5.0);
        let h = (hi - lo) / steps as f64;
        for k in 0..steps {
            let (mut x0, mut x1) = (lo + k as f64 * h, lo + (k + 1) as f64 * h);
            if det(x0) * det(x1) <= 0.0 {
                for _ in 0..100 {
                    let mid = 0.5 * (x0 + x1);
                    if det(x0) * det(mid) <= 0.0 {
                        x1 = mid;
                    } else {
                        x0 = mid;
                    }
                }
                let r = 0.5 * (x0 + x1);
                if roots.last().is_none_or(|&p: &f64| (r - p).abs() > 1e-9) {
                    roots.push(r);
                }
            }
        }
        roots.sort_by(|a, b| b.total_cmp(a));
        roots
    }

    #[test]
    fn exp_correlation_values_and_domain() {
        let i3 = exp_correlation(3, 0.0).unwrap();
        assert_eq!(i3.matrix(), &CMatrix::identity(3, 3));
        let r = exp_correlation(2, 0.8).unwrap();
        assert_relative_eq!(r.matrix()[(0, 1)].re, 0.8);
        assert_relative_eq!(r.matrix()[(1, 1)].re, 1.0);
        assert!(matches!(exp_correlation(3, 1.0), Err(Error::Parameter(_))));
        assert!(matches!(exp_correlation(3, -0.1), Err(Error::Parameter(_))));
    }

    #[test]
    fn exp_correlation_spectrum_matches_characteristic_polynomial() {
        let a = [[1.0, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 1.0]];
        let oracle = cubic_eigs(&a);
        assert_eq!(oracle.len(), 3);
        // frozen from the oracle
        assert_relative_eq!(oracle[0], 1.843070330817254, epsilon = 1e-9);
        assert_relative_eq!(oracle[1], 0.75, epsilon = 1e-9);
        assert_relative_eq!(oracle[2], 0.406929669182746, epsilon = 1e-9);
        let (_, l) = eig_hermitian(&exp_correlation(3, 0.5).unwrap()).unwrap();
        for (x, y) in l.values().iter().zip(&oracle) {
            assert_relative_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn kron_of_diagonals() {
        let k = kron_covariance(&diag(&[2.0, 1.0]), &diag(&[3.0, 1.0])).unwrap();
        let want = diag(&[6.0, 2.0, 3.0, 1.0]);
        assert_eq!(k.matrix(), want.matrix());
        let i4 = kron_covariance(&diag(&[1.0, 1.0]), &diag(&[1.0, 1.0])).unwrap();
        assert_eq!(i4.matrix(), &CMatrix::identity(4, 4));
    }

    #[test]
    fn kron_capacity_guard() {
        let a = exp_correlation(5, 0.3).unwrap();
        assert!(matches!(
            kron_covariance_with_limit(&a, &a, 24),
            Err(Error::Capacity { requested: 25, .. })
        ));
    }

    #[test]
    fn kron_spectrum_is_pairwise_products() {
        let a = exp_correlation(2, 0.8).unwrap();
        let b = exp_correlation(2, 0.5).unwrap();
        let (_, l) = eig_hermitian(&kron_covariance(&a, &b).unwrap()).unwrap();
        let mut products: Vec<f64> = vec![];
        for x in [1.8, 0.2] {
            for y in [1.5, 0.5] {
                products.push(x * y);
            }
        }
        products.sort_by(|a, b| b.total_cmp(a));
        for (x, y) in l.values().iter().zip(&products) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn eig_of_diagonal_and_identity() {
        let (u, l) = eig_hermitian(&diag(&[1.0, 3.0, 2.0])).unwrap();
        assert_eq!(l.values(), &[3.0, 2.0, 1.0]);
        // permutation basis: column 0 is e_1 up to phase
        assert_relative_eq!(u.matrix()[(1, 0)].norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(u.matrix()[(2, 1)].norm(), 1.0, epsilon = 1e-12);
        let (u, l) = eig_hermitian(&diag(&[1.0; 4])).unwrap();
        assert!(l.values().iter().all(|&v| (v - 1.0).abs() < 1e-14));
        assert!(u.unitarity_defect() < 1e-12);
    }

    #[test]
    fn eig_trace_and_reconstruction() {
        let r = exp_correlation(4, 0.8).unwrap();
        let (u, l) = eig_hermitian(&r).unwrap();
        assert_relative_eq!(l.values().iter().sum::<f64>(), 4.0, epsilon = 1e-12);
        assert!(reconstruction_error(&r, &u, &l) < 1e-8);
        assert!(u.unitarity_defect() < 1e-10);
    }

    #[test]
    fn eig_rejects_indefinite() {
        let m = diag(&[1.0, -1.0]);
        assert!(matches!(eig_hermitian(&m), Err(Error::Validation(_))));
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = C64::new(0.0, 1.0);
        m[(1, 0)] = C64::new(0.0, 1.0);
        assert!(matches!(HermitianMatrix::new(m), Err(Error::Validation(_))));
    }

    #[test]
    fn kron_eigenbasis_trivial_cases() {
        let ones = EigenSpectrum::new(vec![1.0, 1.0]).unwrap();
        let (u, l) = kron_eigenbasis(&Basis::identity(2), &ones, &Basis::identity(2), &ones).unwrap();
        assert_eq!(l.values(), &[1.0; 4]);
        assert!(u.unitarity_defect() < 1e-15);
        let ls = EigenSpectrum::new(vec![2.0, 1.0]).unwrap();
        let lf = EigenSpectrum::new(vec![3.0, 1.0]).unwrap();
        let (_, l) = kron_eigenbasis(&Basis::identity(2), &ls, &Basis::identity(2), &lf).unwrap();
        assert_eq!(l.values(), &[6.0, 3.0, 2.0, 1.0]);
    }

    #[test]
    fn kron_eigenbasis_matches_dense_path() {
        let rs = exp_correlation(4, 0.8).unwrap();
        let rf = exp_correlation(4, 0.8).unwrap();
        let (us, ls) = eig_hermitian(&rs).unwrap();
        let (uf, lf) = eig_hermitian(&rf).unwrap();
        let (u, l) = kron_eigenbasis(&us, &ls, &uf, &lf).unwrap();
        let r = kron_covariance(&rs, &rf).unwrap();
        let (_, dense) = eig_hermitian(&r).unwrap();
        for (a, b) in l.values().iter().zip(dense.values()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!(u.unitarity_defect() < 1e-10);
        assert!(reconstruction_error(&r, &u, &l) < 1e-10);
        assert_relative_eq!(r.trace(), l.values().iter().sum::<f64>(), epsilon = 1e-9 * 16.0);
    }

    #[test]
    fn sample_zero_spectrum_and_empty() {
        let l = EigenSpectrum::new(vec![0.0; 3]).unwrap();
        let b = sample_channels(&Basis::identity(3), &l, 5, 9).unwrap();
        assert_eq!(b.count(), 5);
        assert!(b.as_flat().iter().all(|z| z.norm() == 0.0));
        assert!(matches!(
            sample_channels(&Basis::identity(3), &l, 0, 9),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn sampling_is_reproducible() {
        let (u, l) = eig_hermitian(&exp_correlation(4, 0.6).unwrap()).unwrap();
        let a = sample_channels(&u, &l, 50, 42).unwrap();
        let b = sample_channels(&u, &l, 50, 42).unwrap();
        assert_eq!(a, b);
        let tail = sample_channels_range(&u, &l, 10, 5, 42).unwrap();
        assert_eq!(tail.realization(0), a.realization(10));
        assert_ne!(a, sample_channels(&u, &l, 50, 43).unwrap());
    }

    #[test]
    fn white_sample_covariance_converges() {
        let n = 4;
        let count = 100_000;
        let l = EigenSpectrum::new(vec![1.0; n]).unwrap();
        let b = sample_channels(&Basis::identity(n), &l, count, 5).unwrap();
        let mut acc = CMatrix::zeros(n, n);
        for h in b.iter() {
            for i in 0..n {
                for j in 0..n {
                    acc[(i, j)] += h[i] * h[j].conj();
                }
            }
        }
        acc /= C64::new(count as f64, 0.0);
        let tol = 5.0 / (count as f64).sqrt();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((acc[(i, j)] - C64::new(want, 0.0)).norm() <= tol);
            }
        }
    }
}
