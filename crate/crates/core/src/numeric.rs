//! Shared numeric helpers: complex aliases, compensated summation and the
//! standard normal functions used by quantizer design.

use nalgebra::{Complex, DMatrix, DVector};
use statrs::function::erf::erfc;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Neumaier (improved Kahan) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_mean(values: &[f64]) -> f64 {
    values.iter().copied().collect::<CompensatedSum>().value() / values.len() as f64
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Upper tail `P(X > x)` of the standard normal, accurate far into the tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `P(a < X <= b)` for the standard normal, computed on the side of zero
/// where the subtraction does not cancel.
pub fn normal_mass(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a >= 0.0 {
        normal_sf(a) - normal_sf(b)
    } else if b <= 0.0 {
        normal_sf(-b) - normal_sf(-a)
    } else {
        1.0 - normal_sf(-a) - normal_sf(b)
    }
}

/// Frobenius norm of a complex matrix.
pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `||A^H A - I||_F`.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let g = m.adjoint() * m;
    let mut acc = 0.0;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            acc += (g[(i, j)] - C64::new(target, 0.0)).norm_sqr();
        }
    }
    acc.sqrt()
}
