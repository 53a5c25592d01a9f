//! Reverse water-filling over the KLT eigenmodes.
//!
//! For a coefficient budget of `rq` bits per complex dimension the water
//! level `mu` solves `sum_m max(0, log2(lambda_m / mu)) = N * rq`; mode `m`
//! then receives `max(0, log2(lambda_m / mu))` bits and the transform-domain
//! distortion is `(1/N) sum_m min(lambda_m, mu)`.

use crate::channel::EigenSpectrum;
use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const ZERO_EIGEN_FRACTION: f64 = 1e-15;

/// Modes whose rate `log2(lambda/mu)` falls below this many bits are
/// reported inactive (the tie `lambda == mu` is resolved as inactive).
pub const TIE_BITS: f64 = 1e-12;

const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct BitAllocation {
    /// Water level `mu` (variance units).
    pub water_level: f64,
    /// Bits per complex dimension for every mode (zero when inactive).
    pub per_mode_rate: Vec<f64>,
    /// Indices of modes with positive rate, ascending.
    pub active_set: Vec<usize>,
    /// Target rate in bits per complex dimension, averaged over all `N` modes.
    pub total_rate: f64,
}

impl BitAllocation {
    pub fn dim(&self) -> usize {
        self.per_mode_rate.len()
    }

    pub fn is_active(&self, m: usize) -> bool {
        self.per_mode_rate[m] > 0.0
    }
}

fn effective_log2(l: &EigenSpectrum) -> Result<Vec<Option<f64>>> {
    let top = l.largest();
    if top <= 0.0 {
        return Err(Error::DegenerateSource);
    }
    let floor = ZERO_EIGEN_FRACTION * top;
    Ok(l.values()
        .iter()
        .map(|&v| if v < floor { None } else { Some(v.log2()) })
        .collect())
}

fn check_rate(rq: f64) -> Result<()> {
    if !rq.is_finite() || rq < 0.0 {
        return Err(Error::Parameter(format!("rate must be finite and >= 0, got {rq}")));
    }
    Ok(())
}

/// Bisection for the water level in the log domain.
pub fn water_level(l: &EigenSpectrum, rq: f64) -> Result<BitAllocation> {
    check_rate(rq)?;
    let logs = effective_log2(l)?;
    let n = l.len();
    let log_top = l.largest().log2();
    if rq == 0.0 {
        return Ok(BitAllocation {
            water_level: l.largest(),
            per_mode_rate: vec![0.0; n],
            active_set: Vec::new(),
            total_rate: 0.0,
        });
    }

    let target = n as f64 * rq;
    let rate_at = |t: f64| -> f64 { logs.iter().flatten().map(|&lg| (lg - t).max(0.0)).sum::<f64>() };
    // rate_at(lo) >= target since the top mode alone carries N * rq bits there
    let (mut lo, mut hi) = (log_top - target, log_top);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rate_at(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let mu = t.exp2();

    let mut per_mode_rate = vec![0.0; n];
    let mut active_set = Vec::new();
    for (m, lg) in logs.iter().enumerate() {
        if let Some(lg) = lg {
            let bits = lg - t;
            if bits > TIE_BITS {
                per_mode_rate[m] = bits;
                active_set.push(m);
            }
        }
    }
    Ok(BitAllocation {
        water_level: mu,
        per_mode_rate,
        active_set,
        total_rate: rq,
    })
}

/// Coefficient distortion `(1/N) sum_m min(lambda_m, mu(rq))`.
pub fn dq(l: &EigenSpectrum, rq: f64) -> Result<f64> {
    let alloc = water_level(l, rq)?;
    Ok(distortion_at(l, alloc.water_level))
}

/// `(1/N) sum_m min(lambda_m, mu)` for a given water level.
pub fn distortion_at(l: &EigenSpectrum, mu: f64) -> f64 {
    l.values().iter().map(|&v| v.min(mu)).sum::<f64>() / l.len() as f64
}

/// Rate `(1/N) sum_m max(0, log2(lambda_m / mu))` produced by water level `mu`.
pub fn rate_at_water_level(l: &EigenSpectrum, mu: f64) -> f64 {
    let floor = ZERO_EIGEN_FRACTION * l.largest();
    l.values()
        .iter()
        .filter(|&&v| v >= floor && v > mu)
        .map(|&v| (v / mu).log2())
        .sum::<f64>()
        / l.len() as f64
}

/// Water level for a fixed active set:
/// geometric mean of the active eigenvalues times `2^(-n * rq / K)`.
pub fn mu_closed_form(l: &EigenSpectrum, active: &[usize], rq: f64, n: usize) -> Result<f64> {
    if active.is_empty() {
        return Err(Error::Parameter("active set must be non-empty".into()));
    }
    if n == 0 {
        return Err(Error::Parameter("dimension must be positive".into()));
    }
    let mut log_sum = 0.0;
    for &m in active {
        let v = *l
            .values()
            .get(m)
            .ok_or_else(|| Error::Parameter(format!("active index {m} out of range for {} modes", l.len())))?;
        if v <= 0.0 {
            return Err(Error::Parameter(format!("active mode {m} has zero variance")));
        }
        log_sum += v.log2();
    }
    let k = active.len() as f64;
    Ok((log_sum / k - n as f64 * rq / k).exp2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spectrum(v: &[f64]) -> EigenSpectrum {
        EigenSpectrum::new(v.to_vec()).unwrap()
    }

    /// Independent oracle: scan candidate active sets (top-K prefixes) and
    /// return the unique consistent closed-form water level.
    fn water_level_oracle(v: &[f64], rq: f64) -> f64 {
        let n = v.len() as f64;
        for k in (1..=v.len()).rev() {
            let head = &v[..k];
            let g = head.iter().map(|x| x.ln()).sum::<f64>() / k as f64;
            let mu = (g - n * rq * std::f64::consts::LN_2 / k as f64).exp();
            let next_ok = k == v.len() || v[k] <= mu * (1.0 + 1e-12);
            if head[k - 1] >= mu * (1.0 - 1e-12) && next_ok {
                return mu;
            }
        }
        v[0]
    }

    #[test]
    fn two_mode_boundary_case() {
        let a = water_level(&spectrum(&[4.0, 1.0]), 1.0).unwrap();
        assert_relative_eq!(a.water_level, 1.0, epsilon = 1e-12);
        assert_relative_eq!(a.per_mode_rate[0], 2.0, epsilon = 1e-12);
        assert_eq!(a.per_mode_rate[1], 0.0);
        assert_eq!(a.active_set, vec![0]);
        assert_relative_eq!(dq(&spectrum(&[4.0, 1.0]), 1.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_rate_canonical() {
        let l = spectrum(&[3.0, 2.0, 0.5]);
        let a = water_level(&l, 0.0).unwrap();
        assert_eq!(a.water_level, 3.0);
        assert!(a.active_set.is_empty());
        assert!(a.per_mode_rate.iter().all(|&r| r == 0.0));
        assert_relative_eq!(dq(&l, 0.0).unwrap(), l.mean());
    }

    #[test]
    fn white_source_equal_split() {
        let a = water_level(&spectrum(&[1.0; 4]), 2.0).unwrap();
        assert_relative_eq!(a.water_level, 0.25, epsilon = 1e-14);
        for r in &a.per_mode_rate {
            assert_relative_eq!(*r, 2.0, epsilon = 1e-12);
        }
        for r in [0.0, 0.5, 1.0, 3.0, 8.0] {
            assert_relative_eq!(dq(&spectrum(&[1.0; 7]), r).unwrap(), (-r).exp2(), max_relative = 1e-12);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            water_level(&spectrum(&[0.0, 0.0]), 1.0),
            Err(Error::DegenerateSource)
        ));
        assert!(matches!(water_level(&spectrum(&[1.0]), -1.0), Err(Error::Parameter(_))));
        assert!(matches!(
            mu_closed_form(&spectrum(&[1.0]), &[], 1.0, 1),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn closed_form_examples() {
        let l = spectrum(&[4.0, 1.0]);
        assert_relative_eq!(mu_closed_form(&l, &[0, 1], 1.0, 2).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(
            mu_closed_form(&spectrum(&[5.0]), &[0], 1.5, 1).unwrap(),
            5.0 * (-1.5f64).exp2(),
            epsilon = 1e-14
        );
        let l = spectrum(&[8.0, 2.0]);
        let mu = mu_closed_form(&l, &[0], 0.5, 2).unwrap();
        assert_relative_eq!(mu, 4.0, epsilon = 1e-14);
        let a = water_level(&l, 0.5).unwrap();
        assert_eq!(a.active_set, vec![0]);
        assert_relative_eq!(a.water_level, mu, max_relative = 1e-12);
    }

    #[test]
    fn tiny_eigenvalues_are_ignored() {
        let l = spectrum(&[1.0, 1e-18]);
        let a = water_level(&l, 4.0).unwrap();
        assert_eq!(a.active_set, vec![0]);
        assert_relative_eq!(a.per_mode_rate[0], 8.0, epsilon = 1e-9);
    }

    fn spectra() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-3f64..100.0, 1..48).prop_map(|mut v| {
            v.sort_by(|a, b| b.total_cmp(a));
            v
        })
    }

    proptest! {
        #[test]
        fn bisection_matches_closed_form_and_oracle(v in spectra(), rq in 0.0f64..8.0) {
            let l = spectrum(&v);
            let a = water_level(&l, rq).unwrap();
            if !a.active_set.is_empty() {
                let mu = mu_closed_form(&l, &a.active_set, rq, l.len()).unwrap();
                prop_assert!((mu / a.water_level - 1.0).abs() < 1e-9);
            }
            let oracle = water_level_oracle(&v, rq);
            prop_assert!((oracle / a.water_level - 1.0).abs() < 1e-9);
        }

        #[test]
        fn rate_accounting(v in spectra(), rq in 0.0f64..8.0) {
            let l = spectrum(&v);
            let a = water_level(&l, rq).unwrap();
            let n = l.len() as f64;
            let total: f64 = a.per_mode_rate.iter().sum();
            prop_assert!((total - n * rq).abs() <= 1e-9 * n);
            for (m, &lam) in v.iter().enumerate() {
                let want = (lam / a.water_level).log2().max(0.0);
                prop_assert!((a.per_mode_rate[m] - want).abs() < 1e-9);
                prop_assert_eq!(a.active_set.contains(&m), a.per_mode_rate[m] > 0.0);
            }
        }

        #[test]
        fn dq_monotone_and_bounded(v in spectra(), r1 in 0.0f64..6.0, dr in 1e-3f64..2.0) {
            let l = spectrum(&v);
            let d1 = dq(&l, r1).unwrap();
            let d2 = dq(&l, r1 + dr).unwrap();
            prop_assert!(d2 < d1);
            prop_assert!(d1 >= 0.0 && d1 <= l.mean() * (1.0 + 1e-12));
        }
    }
}
