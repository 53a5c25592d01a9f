//! Analytic planning and Monte Carlo rate-distortion sweeps.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    eig_hermitian, exp_correlation, kron_eigenbasis, sample_channels_range, Basis, ChannelBatch, EigenSpectrum,
};
use crate::error::{Error, Result};
use crate::harness::config::{BasisMode, CnSetting, ExperimentConfig, Source};
use crate::harness::dump::{ingest_channels, sample_covariance};
use crate::mismatch::{d0_model, estimate_cn, trial_terms, DistortionTally, MismatchModel, TrialTerms};
use crate::numeric::{CVector, C64};
use crate::quantizers::basis::{quantize_basis_split, quantize_dominant, QuantizedBasis};
use crate::quantizers::{empirical_entropy, CoefficientCoder};
use crate::ratesplit::{effective_rate, optimal_split, phase_threshold, Regime};
use crate::rng::derive_seed;
use crate::rwf::{self, water_level};

/// Bit sweep and trial cap used when `c_n = "estimate"`.
pub const CN_ESTIMATE_BITS: std::ops::RangeInclusive<u32> = 2..=10;
pub const CN_ESTIMATE_TRIALS: usize = 1000;

/// One row of a sweep. Empirical fields are `None` for analytic plans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub r_total: f64,
    pub r_eff: f64,
    pub r_q: f64,
    pub r_0: f64,
    pub regime: Regime,
    /// Phase-transition threshold (`f64::MAX` when basis feedback never pays).
    pub r_th: f64,
    pub basis_never_beneficial: bool,
    /// RVQ bits per quantized spatial (or full-basis) column.
    pub column_bits_s: u32,
    /// RVQ bits per quantized frequency column.
    pub column_bits_f: u32,
    /// Basis rate actually spent after integer rounding and capping.
    pub r_0_used: f64,
    pub analytic_dq: f64,
    pub analytic_d0: f64,
    pub analytic_e2e: f64,
    /// Model basis term at `r_0_used`, the rate the simulation spends.
    pub analytic_d0_used: f64,
    pub empirical_t1: Option<f64>,
    pub empirical_t2: Option<f64>,
    pub empirical_t3: Option<f64>,
    pub empirical_e2e: Option<f64>,
    pub stderr_e2e: Option<f64>,
    pub mean_chordal_sq: Option<f64>,
    /// Model index entropy of the coefficient coder, bits per dimension.
    pub coded_rate: Option<f64>,
    /// Plug-in entropy of the emitted indices, bits per dimension.
    pub index_entropy: Option<f64>,
    pub trials: usize,
    pub wall_time_s: f64,
}

enum Channels {
    Synthetic,
    Fixed(ChannelBatch),
}

/// Second-order statistics and channel source of an experiment.
pub struct Scenario {
    pub u: Basis,
    pub l: EigenSpectrum,
    factors: Option<((Basis, EigenSpectrum), (Basis, EigenSpectrum))>,
    channels: Channels,
    pub trials: usize,
}

impl Scenario {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        match &cfg.source {
            Source::Synthetic => {
                let (us, ls) = eig_hermitian(&exp_correlation(cfg.nt, cfg.rho_s)?)?;
                let (uf, lf) = eig_hermitian(&exp_correlation(cfg.nc, cfg.rho_f)?)?;
                let (u, l) = kron_eigenbasis(&us, &ls, &uf, &lf)?;
                Ok(Scenario {
                    u,
                    l,
                    factors: Some(((us, ls), (uf, lf))),
                    channels: Channels::Synthetic,
                    trials: cfg.trials,
                })
            }
            Source::Dump(path) => {
                let batch = ingest_channels(path)?;
                Self::from_batch(cfg, batch)
            }
        }
    }

    /// Moment-matched scenario: statistics from the sample covariance, the
    /// realizations themselves replayed as channels.
    pub fn from_batch(cfg: &ExperimentConfig, batch: ChannelBatch) -> Result<Self> {
        if batch.dim() != cfg.dim() {
            return Err(Error::DimensionMismatch {
                expected: cfg.dim(),
                found: batch.dim(),
                context: "dump dimension vs nt*nc",
            });
        }
        let (u, l) = eig_hermitian(&sample_covariance(&batch)?)?;
        let trials = cfg.trials.min(batch.count());
        Ok(Scenario {
            u,
            l,
            factors: None,
            channels: Channels::Fixed(batch),
            trials,
        })
    }

    fn block(&self, first: usize, count: usize, seed: u64) -> Result<ChannelBatch> {
        match &self.channels {
            Channels::Synthetic => sample_channels_range(&self.u, &self.l, first as u64, count, seed),
            Channels::Fixed(b) => {
                let n = b.dim();
                ChannelBatch::from_flat(n, b.as_flat()[first * n..(first + count) * n].to_vec(), b.seed())
            }
        }
    }
}

pub fn resolve_cn(cfg: &ExperimentConfig) -> Result<f64> {
    let n = cfg.dim();
    Ok(match cfg.c_n {
        CnSetting::Default => (n as f64 - 1.0) / n as f64,
        CnSetting::Value(v) => v,
        CnSetting::Estimate => {
            let bits: Vec<u32> = CN_ESTIMATE_BITS.collect();
            estimate_cn(n, &bits, cfg.trials.min(CN_ESTIMATE_TRIALS), cfg.seed)?.c_n
        }
    })
}

pub fn build_model(cfg: &ExperimentConfig) -> Result<MismatchModel> {
    MismatchModel::new(cfg.dim(), cfg.model_p(), cfg.tau as f64, resolve_cn(cfg)?)
}

struct PointPlan {
    record: ResultRecord,
    alloc: rwf::BitAllocation,
}

fn floor_bits(x: f64, cap: u32) -> u32 {
    if x <= 0.0 {
        0
    } else {
        ((x + 1e-9).floor() as u64).min(cap as u64) as u32
    }
}

fn plan_point(cfg: &ExperimentConfig, scn: &Scenario, model: &MismatchModel, r_total: f64) -> Result<PointPlan> {
    let l = &scn.l;
    let n = cfg.dim();
    let tau = cfg.tau as f64;
    let r_eff = effective_rate(r_total, cfg.update_bits, n, tau)?;
    let split = optimal_split(l, model, r_eff)?;
    let th = phase_threshold(l, model)?;
    let alloc = water_level(l, split.r_q)?;
    let analytic_dq = rwf::distortion_at(l, alloc.water_level);
    let analytic_d0 = if r_eff == 0.0 {
        0.0
    } else {
        d0_model(l, model, split.r_0)
    };

    let block_bits = split.r_0 * n as f64 * tau;
    let cap = cfg.max_basis_bits;
    let (bits_s, bits_f) = match cfg.basis {
        BasisMode::Perfect => (0, 0),
        BasisMode::Full => {
            let b = floor_bits(block_bits / cfg.quantized_columns() as f64, cap);
            (b, b)
        }
        BasisMode::Structured => {
            let q = (cfg.p_s + cfg.p_f) as f64;
            let share = cfg.spatial_bit_share.unwrap_or(cfg.p_s as f64 / q);
            (
                floor_bits(share * block_bits / cfg.p_s as f64, cap),
                floor_bits((1.0 - share) * block_bits / cfg.p_f as f64, cap),
            )
        }
    };
    let used_bits = match cfg.basis {
        BasisMode::Perfect => 0.0,
        BasisMode::Full => cfg.quantized_columns() as f64 * bits_s as f64,
        BasisMode::Structured => cfg.p_s as f64 * bits_s as f64 + cfg.p_f as f64 * bits_f as f64,
    };
    let r_0_used = used_bits / (n as f64 * tau);
    Ok(PointPlan {
        record: ResultRecord {
            r_total,
            r_eff,
            r_q: split.r_q,
            r_0: split.r_0,
            regime: split.regime,
            r_th: th.rate,
            basis_never_beneficial: th.never_beneficial,
            column_bits_s: bits_s,
            column_bits_f: bits_f,
            r_0_used,
            analytic_dq,
            analytic_d0,
            analytic_e2e: analytic_dq + analytic_d0,
            analytic_d0_used: if r_eff == 0.0 {
                0.0
            } else {
                d0_model(l, model, r_0_used)
            },
            empirical_t1: None,
            empirical_t2: None,
            empirical_t3: None,
            empirical_e2e: None,
            stderr_e2e: None,
            mean_chordal_sq: None,
            coded_rate: None,
            index_entropy: None,
            trials: 0,
            wall_time_s: 0.0,
        },
        alloc,
    })
}

/// Analytic split, threshold and model distortions for every rate point.
pub fn plan(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let scn = Scenario::build(cfg)?;
    let model = build_model(cfg)?;
    plan_with(cfg, &scn, &model)
}

pub fn plan_with(cfg: &ExperimentConfig, scn: &Scenario, model: &MismatchModel) -> Result<Vec<ResultRecord>> {
    cfg.rates
        .iter()
        .map(|&r| {
            let t = Instant::now();
            let mut rec = plan_point(cfg, scn, model, r)?.record;
            rec.wall_time_s = t.elapsed().as_secs_f64();
            Ok(rec)
        })
        .collect()
}

fn block_basis(cfg: &ExperimentConfig, scn: &Scenario, rec: &ResultRecord, block: u64) -> Result<QuantizedBasis> {
    let seed = derive_seed(cfg.seed, block);
    match cfg.basis {
        BasisMode::Perfect => Ok(QuantizedBasis::exact(&scn.u)),
        BasisMode::Full => quantize_dominant(&scn.u, cfg.quantized_columns(), rec.column_bits_s, seed),
        BasisMode::Structured => {
            let ((us, ls), (uf, lf)) = scn
                .factors
                .as_ref()
                .ok_or_else(|| Error::Parameter("structured basis needs Kronecker factors".into()))?;
            quantize_basis_split(
                us,
                ls,
                uf,
                lf,
                (cfg.p_s, rec.column_bits_s),
                (cfg.p_f, rec.column_bits_f),
                seed,
            )
        }
    }
}

fn simulate_point(cfg: &ExperimentConfig, scn: &Scenario, plan: PointPlan) -> Result<ResultRecord> {
    let mut rec = plan.record;
    let n = cfg.dim();
    let coder_for = |uq: &QuantizedBasis| {
        let mask = cfg.zero_beyond_p.then_some(uq.dominant_modes.as_slice());
        CoefficientCoder::new(&scn.l, &plan.alloc, cfg.quantizer, mask)
    };
    let mut tally = DistortionTally::default();
    let mut indices: Vec<Vec<i64>> = vec![Vec::new(); 2 * n];
    let mut chordal = Vec::new();
    let mut coded_rate = 0.0;
    let tau = cfg.tau;
    let blocks = scn.trials.div_ceil(tau);
    for block in 0..blocks {
        let first = block * tau;
        let count = tau.min(scn.trials - first);
        let uq = if rec.r_eff == 0.0 {
            QuantizedBasis::exact(&scn.u)
        } else {
            block_basis(cfg, scn, &rec, block as u64)?
        };
        if uq.p > 0 {
            chordal.push(uq.mean_chordal_sq());
        }
        let coder = coder_for(&uq)?;
        coded_rate = coder.design_rate();
        let batch = scn.block(first, count, cfg.seed)?;
        let out = (0..count)
            .into_par_iter()
            .map(|k| -> Result<(TrialTerms, Vec<Option<[i64; 2]>>)> {
                let h = batch.realization(k);
                let w: Vec<C64> = scn
                    .u
                    .matrix()
                    .ad_mul(&CVector::from_column_slice(h))
                    .iter()
                    .copied()
                    .collect();
                let cw = coder.encode(&w, cfg.seed, (first + k) as u64)?;
                Ok((trial_terms(h, &scn.u, &uq.matrix, &cw.reconstruction)?, cw.indices))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut block_tally = DistortionTally::default();
        for (terms, idx) in &out {
            block_tally.push(terms)?;
            for (m, pair) in idx.iter().enumerate() {
                if let Some([a, b]) = pair {
                    indices[2 * m].push(*a);
                    indices[2 * m + 1].push(*b);
                }
            }
        }
        tally.merge(&block_tally);
    }
    let report = tally.report()?;
    rec.empirical_t1 = Some(report.empirical_t1);
    rec.empirical_t2 = Some(report.empirical_t2);
    rec.empirical_t3 = Some(report.empirical_t3);
    rec.empirical_e2e = Some(report.empirical_e2e);
    rec.stderr_e2e = Some(report.stderr_e2e);
    rec.mean_chordal_sq = Some(if chordal.is_empty() {
        0.0
    } else {
        chordal.iter().sum::<f64>() / chordal.len() as f64
    });
    rec.coded_rate = Some(coded_rate);
    rec.index_entropy = Some(
        indices
            .iter()
            .map(|v| empirical_entropy(v.iter().copied()))
            .sum::<f64>()
            / n as f64,
    );
    rec.trials = report.trials;
    Ok(rec)
}

/// Full Monte Carlo sweep: analytic plan plus encode/decode validation at
/// every rate point. Deterministic for a given config.
pub fn run_rd_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let scn = Scenario::build(cfg)?;
    let model = build_model(cfg)?;
    run_rd_sweep_with(cfg, &scn, &model)
}

pub fn run_rd_sweep_with(cfg: &ExperimentConfig, scn: &Scenario, model: &MismatchModel) -> Result<Vec<ResultRecord>> {
    cfg.rates
        .iter()
        .map(|&r| {
            let t = Instant::now();
            let p = plan_point(cfg, scn, model, r)?;
            let mut rec = simulate_point(cfg, scn, p)?;
            rec.wall_time_s = t.elapsed().as_secs_f64();
            Ok(rec)
        })
        .collect()
}
