//! End-to-end distortion under basis mismatch.
//!
//! The encoder projects onto the true eigenbasis, `w = U^H h`, and the
//! decoder reconstructs with the fed-back basis, `ĥ = Û ŵ`. The error splits
//! exactly as
//!
//! ```text
//! h - Û ŵ = U (w - ŵ) + (U - Û) ŵ
//! ```
//!
//! giving the coefficient term `T1`, the basis term `T2` and the cross term
//! `T3` (all per complex dimension).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Basis, ChannelBatch, EigenSpectrum};
use crate::error::{Error, Result};
use crate::numeric::{CVector, CompensatedSum, C64};
use crate::quantizers::rvq::rvq_search;
use crate::rng::{self, Domain};
use crate::rwf;

/// Relative tolerance of the per-trial identity `T1 + T2 + T3 = E2E`.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Parameters of the basis-mismatch distortion model
/// `D0(R0) = alpha0 * (sum_{m<=p} lambda_m) * 2^(-beta0 * R0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MismatchModel {
    pub n: usize,
    pub p: usize,
    pub tau: f64,
    pub c_n: f64,
    pub alpha0: f64,
    /// `N tau / (p (N - 1))`; infinite when `p = 0`.
    pub beta0: f64,
}

impl MismatchModel {
    pub fn new(n: usize, p: usize, tau: f64, c_n: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!("dimension must be >= 2, got {n}")));
        }
        if p > n {
            return Err(Error::Parameter(format!("p = {p} exceeds dimension {n}")));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::Parameter(format!("tau must be positive, got {tau}")));
        }
        if !(c_n.is_finite() && c_n > 0.0) {
            return Err(Error::Parameter(format!("c_N must be positive, got {c_n}")));
        }
        let nf = n as f64;
        let beta0 = if p == 0 {
            f64::INFINITY
        } else {
            nf * tau / (p as f64 * (nf - 1.0))
        };
        Ok(MismatchModel {
            n,
            p,
            tau,
            c_n,
            alpha0: c_n / nf,
            beta0,
        })
    }

    /// Model with `c_N = (N - 1) / N`, i.e. `alpha0 = (N - 1) / N^2`.
    pub fn with_default_cn(n: usize, p: usize, tau: f64) -> Result<Self> {
        let c = if n >= 2 { (n as f64 - 1.0) / n as f64 } else { 1.0 };
        Self::new(n, p, tau, c)
    }

    /// Basis bits per realization per dimension when every quantized column
    /// gets `bits` bits once per block: `p * bits / (N tau)`.
    pub fn basis_rate(&self, bits: f64) -> f64 {
        self.p as f64 * bits / (self.n as f64 * self.tau)
    }
}

/// Basis-mismatch distortion `alpha0 * (sum_{m<=p} lambda_m) * 2^(-beta0 r0)`.
pub fn d0_model(l: &EigenSpectrum, model: &MismatchModel, r0: f64) -> f64 {
    if model.p == 0 {
        return 0.0;
    }
    model.alpha0 * l.head_sum(model.p) * (-model.beta0 * r0).exp2()
}

/// `D_q(rq) + D0(r0)`.
pub fn e2e_model(l: &EigenSpectrum, model: &MismatchModel, rq: f64, r0: f64) -> Result<f64> {
    if !r0.is_finite() || r0 < 0.0 {
        return Err(Error::Parameter(format!(
            "basis rate must be finite and >= 0, got {r0}"
        )));
    }
    Ok(rwf::dq(l, rq)? + d0_model(l, model, r0))
}

/// Per-realization error terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialTerms {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub e2e: f64,
}

fn sq_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Computes the three terms and the directly measured error for one
/// realization `h` given the decoder coefficients `w_hat`.
pub fn trial_terms(h: &[C64], u: &Basis, uq: &Basis, w_hat: &[C64]) -> Result<TrialTerms> {
    let n = u.dim();
    for (found, context) in [
        (h.len(), "channel vs basis dimension"),
        (uq.dim(), "quantized vs true basis dimension"),
        (w_hat.len(), "coefficients vs basis dimension"),
    ] {
        if found != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found,
                context,
            });
        }
    }
    let h = CVector::from_column_slice(h);
    let w_hat = CVector::from_column_slice(w_hat);
    let w = u.matrix().ad_mul(&h);
    let e = &w - &w_hat;
    let u_e = u.matrix() * &e;
    let delta = (u.matrix() - uq.matrix()) * &w_hat;
    let nf = n as f64;
    let t1 = sq_norm(&e) / nf;
    let t2 = sq_norm(&delta) / nf;
    let t3 = 2.0 * u_e.dotc(&delta).re / nf;
    let e2e = sq_norm(&(h - uq.matrix() * &w_hat)) / nf;
    Ok(TrialTerms { t1, t2, t3, e2e })
}

/// Trial-mean distortion terms with analytic predictions alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub analytic_dq: Option<f64>,
    pub analytic_d0: Option<f64>,
    pub analytic_e2e: Option<f64>,
    pub empirical_t1: f64,
    pub empirical_t2: f64,
    pub empirical_t3: f64,
    pub empirical_e2e: f64,
    /// Standard errors of the four trial means.
    pub stderr_t1: f64,
    pub stderr_t2: f64,
    pub stderr_t3: f64,
    pub stderr_e2e: f64,
    /// Largest per-trial `|T1 + T2 + T3 - E2E|` relative to the error scale.
    pub max_identity_residual: f64,
    pub trials: usize,
}

/// Order-preserving accumulator of [`TrialTerms`]; merging tallies in a fixed
/// order gives reproducible sums.
#[derive(Debug, Clone, Default)]
pub struct DistortionTally {
    sums: [CompensatedSum; 4],
    squares: [CompensatedSum; 4],
    max_residual: f64,
    trials: usize,
}

impl DistortionTally {
    pub fn push(&mut self, t: &TrialTerms) -> Result<()> {
        let scale = t.e2e.max(t.t1 + t.t2 + t.t3.abs());
        let residual = if scale > 0.0 {
            (t.t1 + t.t2 + t.t3 - t.e2e).abs() / scale
        } else {
            0.0
        };
        if !(residual <= IDENTITY_TOL) {
            return Err(Error::Validation(format!(
                "distortion identity violated: relative residual {residual:e}"
            )));
        }
        self.max_residual = self.max_residual.max(residual);
        for (k, v) in [t.t1, t.t2, t.t3, t.e2e].into_iter().enumerate() {
            self.sums[k].add(v);
            self.squares[k].add(v * v);
        }
        self.trials += 1;
        Ok(())
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    /// Appends another tally (for example the next basis-update block).
    pub fn merge(&mut self, other: &DistortionTally) {
        for k in 0..4 {
            self.sums[k].merge(&other.sums[k]);
            self.squares[k].merge(&other.squares[k]);
        }
        self.max_residual = self.max_residual.max(other.max_residual);
        self.trials += other.trials;
    }

    pub fn report(&self) -> Result<DistortionReport> {
        if self.trials == 0 {
            return Err(Error::EmptyBatch);
        }
        let n = self.trials as f64;
        let mean = |k: usize| self.sums[k].value() / n;
        let stderr = |k: usize| {
            if self.trials < 2 {
                return 0.0;
            }
            let m = mean(k);
            let var = ((self.squares[k].value() - n * m * m) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        };
        Ok(DistortionReport {
            analytic_dq: None,
            analytic_d0: None,
            analytic_e2e: None,
            empirical_t1: mean(0),
            empirical_t2: mean(1),
            empirical_t3: mean(2),
            empirical_e2e: mean(3),
            stderr_t1: stderr(0),
            stderr_t2: stderr(1),
            stderr_t3: stderr(2),
            stderr_e2e: stderr(3),
            max_identity_residual: self.max_residual,
            trials: self.trials,
        })
    }
}

/// Per-trial decomposition of a batch reconstructed with `uq`, where
/// `w_hats[i]` is the decoder's coefficient vector for realization `i`.
pub fn tally_batch(batch: &ChannelBatch, u: &Basis, uq: &Basis, w_hats: &[Vec<C64>]) -> Result<DistortionTally> {
    if w_hats.len() != batch.count() {
        return Err(Error::DimensionMismatch {
            expected: batch.count(),
            found: w_hats.len(),
            context: "codewords vs realizations",
        });
    }
    let terms = (0..batch.count())
        .into_par_iter()
        .map(|i| trial_terms(batch.realization(i), u, uq, &w_hats[i]))
        .collect::<Result<Vec<_>>>()?;
    let mut tally = DistortionTally::default();
    for t in &terms {
        tally.push(t)?;
    }
    Ok(tally)
}

/// Trial-mean `T1`, `T2`, `T3` and directly measured E2E distortion.
pub fn decompose_distortion(
    batch: &ChannelBatch,
    u: &Basis,
    uq: &Basis,
    codewords: &[crate::quantizers::CoefficientCodeword],
) -> Result<DistortionReport> {
    let w_hats: Vec<Vec<C64>> = codewords.iter().map(|c| c.reconstruction.clone()).collect();
    tally_batch(batch, u, uq, &w_hats)?.report()
}

/// Least-squares fit of `log2 E[d_c^2]` against `-B / (n - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnEstimate {
    pub n: usize,
    pub c_n: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute deviation of a sweep point from the line, in bits.
    pub max_residual_bits: f64,
    pub bits: Vec<u32>,
    pub mean_chordal_sq: Vec<f64>,
}

/// Fits `c_N` to measured (or exact) mean squared chordal distances.
pub fn fit_cn(n: usize, bits: &[u32], mean_chordal_sq: &[f64]) -> Result<CnEstimate> {
    if n < 2 {
        return Err(Error::Parameter(format!("dimension must be >= 2, got {n}")));
    }
    if bits.len() != mean_chordal_sq.len() {
        return Err(Error::DimensionMismatch {
            expected: bits.len(),
            found: mean_chordal_sq.len(),
            context: "sweep points vs means",
        });
    }
    let mut distinct = bits.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Parameter(
            "c_N fit needs at least two distinct bit counts".into(),
        ));
    }
    if mean_chordal_sq.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::Validation("mean chordal distance must be positive".into()));
    }
    let x: Vec<f64> = bits.iter().map(|&b| -(b as f64) / (n as f64 - 1.0)).collect();
    let y: Vec<f64> = mean_chordal_sq.iter().map(|d| d.log2()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual_bits = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).abs())
        .fold(0.0, f64::max);
    Ok(CnEstimate {
        n,
        c_n: intercept.exp2(),
        slope,
        intercept,
        max_residual_bits,
        bits: bits.to_vec(),
        mean_chordal_sq: mean_chordal_sq.to_vec(),
    })
}

/// Monte Carlo mean squared chordal distance of RVQ with `2^bits` codewords
/// on `G(n, 1)`: a fresh codebook and an isotropic target per trial.
pub fn rvq_mean_chordal(n: usize, bits: u32, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::EmptyBatch);
    }
    let base = (bits as u64) << 40;
    let d = (0..trials)
        .into_par_iter()
        .map(|t| {
            let idx = base + t as u64;
            let mut r = rng::stream(seed, Domain::Probe, idx);
            let v: Vec<C64> = (0..n).map(|_| rng::complex_normal(&mut r)).collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let v: Vec<C64> = v.into_iter().map(|z| z / norm).collect();
            Ok(rvq_search(&v, bits, seed, idx)?.1)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(d.into_iter().collect::<CompensatedSum>().value() / trials as f64)
}

/// Estimates `c_N` by Monte Carlo over the bit sweep.
pub fn estimate_cn(n: usize, b_sweep: &[u32], trials: usize, seed: u64) -> Result<CnEstimate> {
    if n < 2 {
        return Err(Error::Parameter(format!("dimension must be >= 2, got {n}")));
    }
    if b_sweep.len() < 2 {
        return Err(Error::Parameter("c_N fit needs at least two sweep points".into()));
    }
    let means = b_sweep
        .iter()
        .map(|&b| rvq_mean_chordal(n, b, trials, seed))
        .collect::<Result<Vec<_>>>()?;
    fit_cn(n, b_sweep, &means)
}
