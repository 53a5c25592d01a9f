//! Experiment configuration: a flat TOML table whose keys mirror the fields
//! of [`ExperimentConfig`].
//!
//! ```toml
//! nt = 8
//! nc = 8
//! rho_s = 0.8
//! rho_f = 0.8
//! tau = 10000
//! p_s = 1
//! p_f = 1
//! c_n = "default"        # a number, "default" ((N-1)/N) or "estimate"
//! quantizer = "dithered" # or "lloyd-max"
//! basis = "structured"   # "perfect", "structured" or "full"
//! rates = [0.2, 0.4, 0.6, 0.8, 1.0]
//! trials = 10000
//! seed = 1
//! source = "synthetic"   # or a path to a channel dump
//! update_bits = 0.0
//! zero_beyond_p = false
//! spatial_bit_share = 0.5
//! max_basis_bits = 24
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::MAX_KRON_DIM;
use crate::error::{Error, Result};
use crate::quantizers::rvq::MAX_RVQ_BITS;
use crate::quantizers::QuantizerKind;

/// How the decoder obtains the eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisMode {
    /// `Û = U`; no basis bits.
    Perfect,
    /// Dominant factor columns of `Us`, `Uf` quantized separately.
    Structured,
    /// Dominant columns of the full `N`-dimensional basis quantized directly.
    Full,
}

impl FromStr for BasisMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect" => Ok(BasisMode::Perfect),
            "structured" => Ok(BasisMode::Structured),
            "full" => Ok(BasisMode::Full),
            _ => Err(Error::Format(format!("unknown basis mode '{s}'"))),
        }
    }
}

pub fn parse_quantizer(s: &str) -> Result<QuantizerKind> {
    match s {
        "dithered" => Ok(QuantizerKind::Dithered),
        "lloyd-max" | "lloyd_max" => Ok(QuantizerKind::LloydMax),
        _ => Err(Error::Format(format!("unknown quantizer '{s}'"))),
    }
}

/// Source of the RVQ constant `c_N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CnSetting {
    /// `(N - 1) / N`.
    Default,
    /// Monte Carlo fit at run time.
    Estimate,
    Value(f64),
}

impl FromStr for CnSetting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(CnSetting::Default),
            "estimate" => Ok(CnSetting::Estimate),
            _ => s
                .parse::<f64>()
                .map(CnSetting::Value)
                .map_err(|_| Error::Format(format!("c_n must be a number, 'default' or 'estimate', got '{s}'"))),
        }
    }
}

impl fmt::Display for CnSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CnSetting::Default => f.write_str("default"),
            CnSetting::Estimate => f.write_str("estimate"),
            CnSetting::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for CnSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CnSetting::Value(v) => s.serialize_f64(*v),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for CnSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(CnSetting::Value(v)),
            Raw::Int(v) => Ok(CnSetting::Value(v as f64)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Where channel realizations come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// Draws from `CN(0, Rs ⊗ Rf)` with exponential correlation factors.
    Synthetic,
    /// Channel dump; the statistics are moment-matched from its sample
    /// covariance.
    Dump(PathBuf),
}

impl Serialize for Source {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Source::Synthetic => s.serialize_str("synthetic"),
            Source::Dump(p) => s.serialize_str(&p.to_string_lossy()),
        }
    }
}

impl<'de> Deserialize<'de> for Source {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Source::from(String::deserialize(d)?.as_str()))
    }
}

impl From<&str> for Source {
    fn from(s: &str) -> Self {
        if s == "synthetic" {
            Source::Synthetic
        } else {
            Source::Dump(PathBuf::from(s))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub nt: usize,
    pub nc: usize,
    pub rho_s: f64,
    pub rho_f: f64,
    /// Realizations per basis update.
    pub tau: usize,
    pub p_s: usize,
    pub p_f: usize,
    pub c_n: CnSetting,
    pub quantizer: QuantizerKind,
    pub basis: BasisMode,
    /// Total budgets in bits per complex dimension per realization.
    pub rates: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub source: Source,
    /// Model-update bits charged once per block.
    pub update_bits: f64,
    /// Code only the modes spanned by quantized dominant columns.
    pub zero_beyond_p: bool,
    /// Fraction of the basis bits given to the spatial factor.
    /// `None` splits equally per quantized column.
    pub spatial_bit_share: Option<f64>,
    /// Cap on RVQ bits per column.
    pub max_basis_bits: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            nt: 8,
            nc: 8,
            rho_s: 0.8,
            rho_f: 0.8,
            tau: 10_000,
            p_s: 1,
            p_f: 1,
            c_n: CnSetting::Default,
            quantizer: QuantizerKind::Dithered,
            basis: BasisMode::Structured,
            rates: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            trials: 10_000,
            seed: 1,
            source: Source::Synthetic,
            update_bits: 0.0,
            zero_beyond_p: false,
            spatial_bit_share: None,
            max_basis_bits: MAX_RVQ_BITS,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// `N = nt * nc`.
    pub fn dim(&self) -> usize {
        self.nt * self.nc
    }

    /// Dominant columns `p` of the mismatch model (0 for a perfect basis).
    pub fn model_p(&self) -> usize {
        match self.basis {
            BasisMode::Perfect => 0,
            BasisMode::Structured | BasisMode::Full => self.p_s * self.p_f,
        }
    }

    /// Number of RVQ-quantized columns per update.
    pub fn quantized_columns(&self) -> usize {
        match self.basis {
            BasisMode::Perfect => 0,
            BasisMode::Structured => self.p_s + self.p_f,
            BasisMode::Full => self.p_s * self.p_f,
        }
    }

    /// Applies `key = value` as if it appeared in the config file.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::Format(format!("invalid value '{v}' for {key}")))
        }
        match key {
            "nt" => self.nt = num(key, value)?,
            "nc" => self.nc = num(key, value)?,
            "rho_s" => self.rho_s = num(key, value)?,
            "rho_f" => self.rho_f = num(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "p_s" => self.p_s = num(key, value)?,
            "p_f" => self.p_f = num(key, value)?,
            "c_n" => self.c_n = value.parse()?,
            "quantizer" => self.quantizer = parse_quantizer(value)?,
            "basis" => self.basis = value.parse()?,
            "rates" => {
                self.rates = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| num(key, s))
                    .collect::<Result<_>>()?
            }
            "trials" => self.trials = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "source" => self.source = Source::from(value),
            "update_bits" => self.update_bits = num(key, value)?,
            "zero_beyond_p" => self.zero_beyond_p = num(key, value)?,
            "spatial_bit_share" => self.spatial_bit_share = Some(num(key, value)?),
            "max_basis_bits" => self.max_basis_bits = num(key, value)?,
            _ => return Err(Error::Format(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.nt == 0 || self.nc == 0 || self.tau == 0 || self.trials == 0 {
            return bad("nt, nc, tau and trials must be positive".into());
        }
        if self.dim() > MAX_KRON_DIM {
            return Err(Error::Capacity {
                what: "channel dimension nt*nc",
                requested: self.dim() as u64,
                limit: MAX_KRON_DIM as u64,
            });
        }
        if self.dim() < 2 {
            return bad("nt*nc must be at least 2".into());
        }
        for (name, rho) in [("rho_s", self.rho_s), ("rho_f", self.rho_f)] {
            if !(0.0..1.0).contains(&rho) {
                return bad(format!("{name} must lie in [0, 1), got {rho}"));
            }
        }
        if self.p_s > self.nt || self.p_f > self.nc {
            return bad(format!(
                "p_s = {} / p_f = {} exceed nt = {} / nc = {}",
                self.p_s, self.p_f, self.nt, self.nc
            ));
        }
        if self.basis != BasisMode::Perfect && (self.p_s == 0 || self.p_f == 0) {
            return bad("quantized bases need p_s >= 1 and p_f >= 1".into());
        }
        if let CnSetting::Value(c) = self.c_n {
            if !(c.is_finite() && c > 0.0) {
                return bad(format!("c_n must be positive, got {c}"));
            }
        }
        if self.rates.is_empty() {
            return bad("rate grid is empty".into());
        }
        if self.rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return bad("rates must be finite and >= 0".into());
        }
        if self.rates.windows(2).any(|w| w[1] < w[0]) {
            return bad("rate grid must be sorted ascending".into());
        }
        if !(self.update_bits.is_finite() && self.update_bits >= 0.0) {
            return bad("update_bits must be finite and >= 0".into());
        }
        if let Some(s) = self.spatial_bit_share {
            if !(0.0..=1.0).contains(&s) {
                return bad(format!("spatial_bit_share must lie in [0, 1], got {s}"));
            }
        }
        if self.max_basis_bits > MAX_RVQ_BITS {
            return Err(Error::Capacity {
                what: "max_basis_bits",
                requested: self.max_basis_bits as u64,
                limit: MAX_RVQ_BITS as u64,
            });
        }
        if self.basis == BasisMode::Structured && matches!(self.source, Source::Dump(_)) {
            return bad("a channel dump has no Kronecker factors; use basis = perfect or full".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_defaults() {
        let cfg = ExperimentConfig::from_toml_str("nt = 4\nc_n = \"estimate\"\nrates = [0.0, 1.0]\n").unwrap();
        assert_eq!(cfg.nt, 4);
        assert_eq!(cfg.nc, 8);
        assert_eq!(cfg.c_n, CnSetting::Estimate);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
        let v = ExperimentConfig::from_toml_str("c_n = 0.9\nquantizer = \"lloyd-max\"\nbasis = \"full\"").unwrap();
        assert_eq!(v.c_n, CnSetting::Value(0.9));
        assert_eq!(v.quantizer, QuantizerKind::LloydMax);
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            "nt = 0",
            "rates = [1.0, 0.5]",
            "rho_s = 1.0",
            "p_s = 9",
            "bogus = 1",
            "max_basis_bits = 30",
            "basis = \"structured\"\nsource = \"x.csid\"",
        ] {
            assert!(ExperimentConfig::from_toml_str(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn overrides() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("rates", "0,0.5,1").unwrap();
        cfg.set("c_n", "1.25").unwrap();
        cfg.set("basis", "perfect").unwrap();
        cfg.set("source", "dump.csid").unwrap();
        assert_eq!(cfg.rates, vec![0.0, 0.5, 1.0]);
        assert_eq!(cfg.c_n, CnSetting::Value(1.25));
        assert_eq!(cfg.model_p(), 0);
        assert_eq!(cfg.source, Source::Dump("dump.csid".into()));
        assert!(cfg.set("nope", "1").is_err());
        assert!(cfg.set("nt", "x").is_err());
    }
}
