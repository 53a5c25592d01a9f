//! Splitting a feedback budget between coefficients and basis updates.
//!
//! At fixed `r_total = r_q + r_0` the end-to-end model `D_q(r_q) + D0(r_0)`
//! is minimized where the marginal slopes balance, `mu(r_q) = beta0 D0(r_0)`.
//! The residual `g(r_0) = mu(r_total - r_0) - beta0 D0(r_0)` is increasing in
//! `r_0`, so basis feedback is worthwhile exactly when `g(0) < 0`, i.e. when
//! `r_total` exceeds the threshold where `mu(R_th) = beta0 D0(0)`.

use serde::{Deserialize, Serialize};

use crate::channel::EigenSpectrum;
use crate::error::{Error, Result};
use crate::mismatch::{d0_model, e2e_model, MismatchModel};
use crate::rwf::{self, water_level};

/// Sentinel threshold reported when basis feedback never pays off.
pub const NEVER_BENEFICIAL: f64 = f64::MAX;

/// Tolerance (bits per dimension) of the regime/threshold agreement.
pub const REGIME_TOL: f64 = 1e-6;

const MAX_BISECTIONS: usize = 300;
const FALLBACK_GRID: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Inactive,
    Active,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Inactive => "inactive",
            Regime::Active => "active",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSplit {
    pub r_total: f64,
    pub r_q: f64,
    pub r_0: f64,
    pub regime: Regime,
}

fn check_rate(what: &str, r: f64) -> Result<()> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::Parameter(format!("{what} must be finite and >= 0, got {r}")));
    }
    Ok(())
}

fn check_dims(l: &EigenSpectrum, model: &MismatchModel) -> Result<()> {
    if l.len() != model.n {
        return Err(Error::DimensionMismatch {
            expected: model.n,
            found: l.len(),
            context: "spectrum vs model dimension",
        });
    }
    Ok(())
}

fn mu(l: &EigenSpectrum, r: f64) -> Result<f64> {
    Ok(water_level(l, r.max(0.0))?.water_level)
}

/// `mu(r_total - r0) - beta0 D0(r0)`.
fn residual(l: &EigenSpectrum, model: &MismatchModel, r_total: f64, r0: f64) -> Result<f64> {
    Ok(mu(l, r_total - r0)? - model.beta0 * d0_model(l, model, r0))
}

fn split(r_total: f64, r_0: f64) -> RateSplit {
    let r_0 = r_0.clamp(0.0, r_total);
    RateSplit {
        r_total,
        r_q: r_total - r_0,
        r_0,
        regime: if r_0 > 0.0 { Regime::Active } else { Regime::Inactive },
    }
}

/// Golden-section minimization of the model over `r0 in [0, r_total]`.
fn golden_section(l: &EigenSpectrum, model: &MismatchModel, r_total: f64) -> Result<f64> {
    let f = |r0: f64| e2e_model(l, model, r_total - r0, r0);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, r_total);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..MAX_BISECTIONS {
        if b - a <= 1e-13 * r_total.max(1.0) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let mid = 0.5 * (a + b);
    // the endpoints are candidates too
    let mut best = (mid, f(mid)?);
    for r0 in [0.0, r_total] {
        let v = f(r0)?;
        if v < best.1 {
            best = (r0, v);
        }
    }
    Ok(best.0)
}

/// Optimal split of `r_total` bits per dimension.
pub fn optimal_split(l: &EigenSpectrum, model: &MismatchModel, r_total: f64) -> Result<RateSplit> {
    check_rate("total rate", r_total)?;
    check_dims(l, model)?;
    if l.largest() <= 0.0 {
        return Err(Error::DegenerateSource);
    }
    if model.p == 0 || r_total == 0.0 {
        return Ok(split(r_total, 0.0));
    }
    let g0 = residual(l, model, r_total, 0.0)?;
    if g0 >= 0.0 {
        return Ok(split(r_total, 0.0));
    }
    let g1 = residual(l, model, r_total, r_total)?;
    let r0 = if g1 <= 0.0 {
        r_total
    } else {
        let (mut lo, mut hi) = (0.0, r_total);
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if residual(l, model, r_total, mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    // guard against a non-monotone residual: the root must beat a coarse grid
    let at = |r: f64| e2e_model(l, model, r_total - r, r);
    let best = at(r0)?;
    let mut grid_min = f64::INFINITY;
    for k in 0..=FALLBACK_GRID {
        grid_min = grid_min.min(at(r_total * k as f64 / FALLBACK_GRID as f64)?);
    }
    if best > grid_min * (1.0 + 1e-12) {
        return Ok(split(r_total, golden_section(l, model, r_total)?));
    }
    Ok(split(r_total, r0))
}

/// Phase-transition threshold with its closed-form evaluation on the
/// converged active set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    /// Threshold in bits per dimension; [`NEVER_BENEFICIAL`] if basis feedback
    /// never pays off.
    pub rate: f64,
    /// `(K / N) log2(geomean(lambda_S) / (beta0 D0(0)))` on the active set `S`
    /// at `rate`.
    pub closed_form: f64,
    pub active_modes: usize,
    pub never_beneficial: bool,
}

/// Solves `mu(R) = beta0 D0(0)` by bisection on `R` with the exact water level.
pub fn phase_threshold(l: &EigenSpectrum, model: &MismatchModel) -> Result<Threshold> {
    check_dims(l, model)?;
    if l.largest() <= 0.0 {
        return Err(Error::DegenerateSource);
    }
    let target = if model.p == 0 {
        0.0
    } else {
        model.beta0 * d0_model(l, model, 0.0)
    };
    if !(target > 0.0) {
        return Ok(Threshold {
            rate: NEVER_BENEFICIAL,
            closed_form: NEVER_BENEFICIAL,
            active_modes: 0,
            never_beneficial: true,
        });
    }
    if target >= l.largest() {
        return Ok(Threshold {
            rate: 0.0,
            closed_form: 0.0,
            active_modes: 0,
            never_beneficial: false,
        });
    }
    let mut hi = 1.0;
    while mu(l, hi)? > target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Convergence {
                what: "threshold bracket",
                iterations: 20,
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mu(l, mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rate = 0.5 * (lo + hi);
    let alloc = water_level(l, rate)?;
    let k = alloc.active_set.len();
    let closed_form = if k == 0 {
        0.0
    } else {
        let mean_log = alloc.active_set.iter().map(|&m| l.values()[m].log2()).sum::<f64>() / k as f64;
        k as f64 / l.len() as f64 * (mean_log - target.log2())
    };
    Ok(Threshold {
        rate,
        closed_form,
        active_modes: k,
        never_beneficial: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConsistency {
    pub split: RateSplit,
    pub threshold: Threshold,
    /// Regime agrees with `r_total <= R_th` (within [`REGIME_TOL`]).
    pub consistent: bool,
}

/// Cross-checks the optimal-split regime against the threshold.
pub fn split_consistency_check(l: &EigenSpectrum, model: &MismatchModel, r_total: f64) -> Result<SplitConsistency> {
    let split = optimal_split(l, model, r_total)?;
    let threshold = phase_threshold(l, model)?;
    let consistent = if threshold.never_beneficial {
        split.regime == Regime::Inactive
    } else if (r_total - threshold.rate).abs() <= REGIME_TOL {
        split.r_0 <= REGIME_TOL
    } else {
        (split.regime == Regime::Inactive) == (r_total < threshold.rate)
    };
    Ok(SplitConsistency {
        split,
        threshold,
        consistent,
    })
}

/// Budget left after a model update of `b_update` bits per block:
/// `max(0, r_total - b_update / (n tau))`.
pub fn effective_rate(r_total: f64, b_update: f64, n: usize, tau: f64) -> Result<f64> {
    check_rate("total rate", r_total)?;
    check_rate("update bits", b_update)?;
    if n == 0 || !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Parameter("dimension and tau must be positive".into()));
    }
    Ok((r_total - b_update / (n as f64 * tau)).max(0.0))
}

/// Optimal-split E2E model value at `r_total`.
pub fn optimal_e2e(l: &EigenSpectrum, model: &MismatchModel, r_total: f64) -> Result<f64> {
    let s = optimal_split(l, model, r_total)?;
    e2e_model(l, model, s.r_q, s.r_0)
}

/// Marginal slopes `(ln 2 mu(r_q), ln 2 beta0 D0(r_0))` at a split.
pub fn marginal_slopes(l: &EigenSpectrum, model: &MismatchModel, s: &RateSplit) -> Result<(f64, f64)> {
    let ln2 = std::f64::consts::LN_2;
    Ok((ln2 * mu(l, s.r_q)?, ln2 * model.beta0 * d0_model(l, model, s.r_0)))
}

/// Distortion of the coefficient chain alone at `r_q`.
pub fn coefficient_distortion(l: &EigenSpectrum, r_q: f64) -> Result<f64> {
    rwf::dq(l, r_q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spectrum(v: &[f64]) -> EigenSpectrum {
        EigenSpectrum::new(v.to_vec()).unwrap()
    }

    /// Model whose `beta0 D0(0)` equals `target` on spectrum `l`.
    fn model_with_boundary(l: &EigenSpectrum, p: usize, tau: f64, target: f64) -> MismatchModel {
        let probe = MismatchModel::new(l.len(), p, tau, 1.0).unwrap();
        let c = target / (probe.beta0 * probe.alpha0 * l.head_sum(p));
        MismatchModel::new(l.len(), p, tau, c).unwrap()
    }

    fn grid_argmin(l: &EigenSpectrum, m: &MismatchModel, r_total: f64, step: f64) -> (f64, f64) {
        let k = (r_total / step).round() as usize;
        (0..=k)
            .map(|i| {
                let r0 = (i as f64 * step).min(r_total);
                (r0, e2e_model(l, m, r_total - r0, r0).unwrap())
            })
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }

    #[test]
    fn zero_budget_and_no_columns() {
        let l = spectrum(&[3.0, 1.0]);
        let m = MismatchModel::new(2, 1, 2.0, 0.5).unwrap();
        let s = optimal_split(&l, &m, 0.0).unwrap();
        assert_eq!((s.r_q, s.r_0, s.regime), (0.0, 0.0, Regime::Inactive));
        let z = MismatchModel::new(2, 0, 2.0, 0.5).unwrap();
        for r in [0.1, 1.0, 10.0] {
            let s = optimal_split(&l, &z, r).unwrap();
            assert_eq!(s.regime, Regime::Inactive);
            assert!(split_consistency_check(&l, &z, r).unwrap().consistent);
        }
        let t = phase_threshold(&l, &z).unwrap();
        assert!(t.never_beneficial && t.rate == NEVER_BENEFICIAL);
    }

    #[test]
    fn boundary_at_top_eigenvalue_gives_zero_threshold() {
        let l = spectrum(&[4.0, 1.0]);
        let m = model_with_boundary(&l, 1, 1.0, 4.0);
        assert_eq!(phase_threshold(&l, &m).unwrap().rate, 0.0);
    }

    #[test]
    fn single_mode_threshold() {
        let l = spectrum(&[5.0]);
        // n must be >= 2 for the model; use a two-mode spectrum with a dead tail
        let l2 = spectrum(&[5.0, 0.0]);
        let m = model_with_boundary(&l2, 1, 3.0, 0.7);
        let t = phase_threshold(&l2, &m).unwrap();
        assert_relative_eq!(t.rate, 0.5 * (5.0f64 / 0.7).log2(), max_relative = 1e-12);
        assert_relative_eq!(t.closed_form, t.rate, max_relative = 1e-12);
        assert_eq!(l.len(), 1);
    }

    #[test]
    fn dual_route_threshold_two_modes() {
        let l = spectrum(&[4.0, 1.0]);
        let m = model_with_boundary(&l, 1, 2.0, 0.5);
        let t = phase_threshold(&l, &m).unwrap();
        assert_eq!(t.active_modes, 2);
        // both modes active: R = (1/2)(log2(4/0.5) + log2(1/0.5)) = 2
        assert_relative_eq!(t.rate, 2.0, max_relative = 1e-12);
        assert!((t.rate - t.closed_form).abs() < 1e-8);
    }

    #[test]
    fn white_source_matches_fine_grid() {
        let l = spectrum(&[1.0; 4]);
        let m = MismatchModel::new(4, 2, 1.0, 0.75).unwrap();
        for r_total in [0.5, 1.0, 2.0, 4.0] {
            let s = optimal_split(&l, &m, r_total).unwrap();
            let (r0, _) = grid_argmin(&l, &m, r_total, 1e-5);
            assert!((s.r_0 - r0).abs() < 1e-4, "{r_total}: {} vs {r0}", s.r_0);
        }
    }

    #[test]
    fn continuous_just_above_threshold() {
        let l = spectrum(&[8.0, 4.0, 2.0, 1.0]);
        let m = MismatchModel::new(4, 2, 2.0, 0.75).unwrap();
        let t = phase_threshold(&l, &m).unwrap();
        let above = optimal_split(&l, &m, t.rate + 1e-3).unwrap();
        assert_eq!(above.regime, Regime::Active);
        let (_, grid) = grid_argmin(&l, &m, t.rate + 1e-3, 1e-6);
        let got = optimal_e2e(&l, &m, t.rate + 1e-3).unwrap();
        assert!(got <= grid + 1e-8);
        // no jump: the gain over staying inactive is second order in the step
        let inactive = e2e_model(&l, &m, t.rate + 1e-3, 0.0).unwrap();
        assert!(got <= inactive && inactive - got < 1e-5 * inactive, "{got} {inactive}");
        let s = optimal_split(&l, &m, t.rate).unwrap();
        assert!(s.r_0 <= REGIME_TOL);
    }

    #[test]
    fn effective_rate_examples() {
        assert_eq!(effective_rate(2.0, 0.0, 64, 10.0).unwrap(), 2.0);
        assert_relative_eq!(effective_rate(2.0, 640.0, 64, 10.0).unwrap(), 1.0, max_relative = 1e-15);
        let cut = 32.0 * 2.1e6 / (1024.0 * 1e4);
        assert_relative_eq!(cut, 6.5625, max_relative = 1e-15);
        assert_eq!(effective_rate(4.0, 32.0 * 2.1e6, 1024, 1e4).unwrap(), 0.0);
        assert!(effective_rate(1.0, -1.0, 4, 1.0).is_err());
    }

    fn instances() -> impl Strategy<Value = (Vec<f64>, usize, f64, f64)> {
        (2usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec(0.05f64..20.0, n).prop_map(|mut v| {
                    v.sort_by(|a, b| b.total_cmp(a));
                    v
                }),
                1..=n,
                1.0f64..50.0,
                0.05f64..2.0,
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn split_conditions((v, p, tau, c) in instances(), r_total in 0.0f64..6.0) {
            let l = spectrum(&v);
            let m = MismatchModel::new(v.len(), p, tau, c).unwrap();
            let s = optimal_split(&l, &m, r_total).unwrap();
            prop_assert!((s.r_q + s.r_0 - r_total).abs() <= 1e-9);
            prop_assert_eq!(s.regime == Regime::Inactive, s.r_0 == 0.0);
            prop_assert!(split_consistency_check(&l, &m, r_total).unwrap().consistent);
            if s.regime == Regime::Active && s.r_0 < r_total {
                let (a, b) = marginal_slopes(&l, &m, &s).unwrap();
                prop_assert!((a / b - 1.0).abs() < 1e-9, "{} vs {}", a, b);
            }
            let (_, grid) = grid_argmin(&l, &m, r_total, 1e-2);
            let got = e2e_model(&l, &m, s.r_q, s.r_0).unwrap();
            prop_assert!(got <= grid * (1.0 + 1e-12));
        }

        #[test]
        fn optimal_e2e_non_increasing((v, p, tau, c) in instances(), r in 0.0f64..5.0, dr in 1e-3f64..1.0) {
            let l = spectrum(&v);
            let m = MismatchModel::new(v.len(), p, tau, c).unwrap();
            prop_assert!(optimal_e2e(&l, &m, r + dr).unwrap() <= optimal_e2e(&l, &m, r).unwrap() * (1.0 + 1e-12));
        }

        #[test]
        fn threshold_routes_agree((v, p, tau, c) in instances()) {
            let l = spectrum(&v);
            let m = MismatchModel::new(v.len(), p, tau, c).unwrap();
            let t = phase_threshold(&l, &m).unwrap();
            prop_assert!((t.rate - t.closed_form).abs() < 1e-6);
        }
    }
}
