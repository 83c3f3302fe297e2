//! JSON experiment configuration.
//!
//! Every file carries `"schema_version": 1`. Fields left out take the
//! defaults of the selected `mode`; see the README for the full schema.

use std::fs;
use std::path::Path;

use polyres_core::dynamics::{Lorenz, Rossler, TargetSystem};
use polyres_core::PolyDegree;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    OpenLoop,
    ClosedLoop,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::OpenLoop => "open_loop",
            Mode::ClosedLoop => "closed_loop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    #[default]
    Lorenz,
    Rossler,
}

impl SystemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::Lorenz => "lorenz",
            SystemKind::Rossler => "rossler",
        }
    }

    pub fn target(self) -> TargetSystem {
        match self {
            SystemKind::Lorenz => TargetSystem::Lorenz(Lorenz::default()),
            SystemKind::Rossler => TargetSystem::Rossler(Rossler::default()),
        }
    }
}

/// A single value or a list, so `"n": 10` and `"n": [5, 10]` both parse.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> From<OneOrMany<T>> for Vec<T> {
    fn from(v: OneOrMany<T>) -> Vec<T> {
        match v {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(xs) => xs,
        }
    }
}

/// On-disk form; every field except `mode` is optional.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    mode: Mode,
    #[serde(default)]
    name: Option<String>,
    system: Option<SystemKind>,
    tau: Option<f64>,
    h: Option<f64>,
    n: Option<OneOrMany<usize>>,
    degree: Option<OneOrMany<u8>>,
    spectral_radius: Option<f64>,
    sigma_b: Option<f64>,
    beta: Option<f64>,
    seeds: Option<Vec<u64>>,
    base_seed: Option<u64>,
    realizations: Option<usize>,
    train_samples: Option<usize>,
    washout: Option<usize>,
    eval_samples: Option<usize>,
    x0: Option<[f64; 3]>,
    discard_time: Option<f64>,
    mce_horizon: Option<f64>,
    pdf_steps: Option<usize>,
    pdf_bins: Option<usize>,
    pdf_range: Option<[f64; 2]>,
    valid_fraction: Option<f64>,
    blowup_limit: Option<f64>,
}

/// Fully resolved description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: Option<String>,
    pub mode: Mode,
    pub system: SystemKind,
    /// Sampling interval / prediction horizon τ.
    pub tau: f64,
    /// Internal RK4 step.
    pub h: f64,
    pub n: Vec<usize>,
    pub degree: Vec<PolyDegree>,
    pub spectral_radius: f64,
    pub sigma_b: f64,
    pub beta: f64,
    pub seeds: Vec<u64>,
    /// Inputs used for training, washout included.
    pub train_samples: usize,
    pub washout: usize,
    /// Held-out steps for RMSE (and, closed loop, valid time).
    pub eval_samples: usize,
    pub x0: [f64; 3],
    pub discard_time: f64,
    /// Closed loop: orbit length (time units) averaged by the MCE.
    pub mce_horizon: f64,
    /// Closed loop: steps of the long run whose x-density is compared.
    pub pdf_steps: usize,
    pub pdf_bins: usize,
    pub pdf_range: [f64; 2],
    pub valid_fraction: f64,
    pub blowup_limit: f64,
}

impl ExperimentConfig {
    /// τ = 0.2 one-step prediction: N ∈ {5, 10, 20, 40}, degrees 1 and 2,
    /// 20 realizations, radius 0.95, σ_B = 0.1, β = 1e-4.
    pub fn open_loop_defaults() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: None,
            mode: Mode::OpenLoop,
            system: SystemKind::Lorenz,
            tau: 0.2,
            h: 0.01,
            n: vec![5, 10, 20, 40],
            degree: vec![PolyDegree::Linear, PolyDegree::Quadratic],
            spectral_radius: 0.95,
            sigma_b: 0.1,
            beta: 1e-4,
            seeds: (0..20).collect(),
            train_samples: 10_000,
            washout: 100,
            eval_samples: 10_000,
            x0: [1.0, 1.0, 1.0],
            discard_time: 10.0,
            mce_horizon: 50.0,
            pdf_steps: 500_000,
            pdf_bins: 100,
            pdf_range: [-25.0, 25.0],
            valid_fraction: polyres_core::metrics::DEFAULT_VALID_FRACTION,
            blowup_limit: polyres_core::readout::BLOWUP_LIMIT,
        }
    }

    /// τ = 0.02 autonomous reconstruction: N = 10, degrees 1-3, 10
    /// realizations, radius 0.01, σ_B = 0.01, β = 1e-6.
    pub fn closed_loop_defaults() -> Self {
        Self {
            mode: Mode::ClosedLoop,
            tau: 0.02,
            n: vec![10],
            degree: PolyDegree::ALL.to_vec(),
            spectral_radius: 0.01,
            sigma_b: 0.01,
            beta: 1e-6,
            seeds: (0..10).collect(),
            train_samples: 20_000,
            washout: 1000,
            eval_samples: 2500,
            ..Self::open_loop_defaults()
        }
    }

    pub fn defaults_for(mode: Mode) -> Self {
        match mode {
            Mode::OpenLoop => Self::open_loop_defaults(),
            Mode::ClosedLoop => Self::closed_loop_defaults(),
        }
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        Self::resolve(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    fn resolve(raw: RawConfig) -> std::result::Result<Self, String> {
        if raw.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                raw.schema_version
            ));
        }
        let d = Self::defaults_for(raw.mode);
        let degree = match raw.degree {
            Some(v) => Vec::<u8>::from(v)
                .into_iter()
                .map(|x| PolyDegree::try_from(x).map_err(|e| e.to_string()))
                .collect::<std::result::Result<Vec<_>, _>>()?,
            None => d.degree.clone(),
        };
        let seeds = match (raw.seeds, raw.base_seed, raw.realizations) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err("give either `seeds` or `base_seed`/`realizations`, not both".into())
            }
            (Some(s), None, None) => s,
            (None, base, count) => {
                let base = base.unwrap_or(0);
                let count = count.unwrap_or(d.seeds.len()) as u64;
                (0..count).map(|i| base.wrapping_add(i)).collect()
            }
        };
        let cfg = Self {
            schema_version: raw.schema_version,
            name: raw.name,
            mode: raw.mode,
            system: raw.system.unwrap_or(d.system),
            tau: raw.tau.unwrap_or(d.tau),
            h: raw.h.unwrap_or(d.h),
            n: raw.n.map(Vec::from).unwrap_or(d.n),
            degree,
            spectral_radius: raw.spectral_radius.unwrap_or(d.spectral_radius),
            sigma_b: raw.sigma_b.unwrap_or(d.sigma_b),
            beta: raw.beta.unwrap_or(d.beta),
            seeds,
            train_samples: raw.train_samples.unwrap_or(d.train_samples),
            washout: raw.washout.unwrap_or(d.washout),
            eval_samples: raw.eval_samples.unwrap_or(d.eval_samples),
            x0: raw.x0.unwrap_or(d.x0),
            discard_time: raw.discard_time.unwrap_or(d.discard_time),
            mce_horizon: raw.mce_horizon.unwrap_or(d.mce_horizon),
            pdf_steps: raw.pdf_steps.unwrap_or(d.pdf_steps),
            pdf_bins: raw.pdf_bins.unwrap_or(d.pdf_bins),
            pdf_range: raw.pdf_range.unwrap_or(d.pdf_range),
            valid_fraction: raw.valid_fraction.unwrap_or(d.valid_fraction),
            blowup_limit: raw.blowup_limit.unwrap_or(d.blowup_limit),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("`{name}` must be positive, got {v}"))
            }
        };
        positive("tau", self.tau)?;
        positive("h", self.h)?;
        let steps = (self.tau / self.h).round();
        if steps < 1.0 || (steps * self.h - self.tau).abs() > 1e-9 * self.tau {
            return Err(format!("tau ({}) must be an integer multiple of h ({})", self.tau, self.h));
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return Err("`n` must list at least one reservoir size, all >= 1".into());
        }
        if self.degree.is_empty() {
            return Err("`degree` must list at least one of 1, 2, 3".into());
        }
        if self.seeds.is_empty() {
            return Err("at least one seed is required".into());
        }
        if !(self.spectral_radius >= 0.0 && self.sigma_b >= 0.0 && self.beta >= 0.0) {
            return Err("spectral_radius, sigma_b and beta must be >= 0".into());
        }
        if self.train_samples <= self.washout {
            return Err(format!(
                "train_samples ({}) must exceed washout ({})",
                self.train_samples, self.washout
            ));
        }
        if self.eval_samples == 0 {
            return Err("eval_samples must be >= 1".into());
        }
        if !(self.discard_time >= 0.0) {
            return Err("discard_time must be >= 0".into());
        }
        if self.mode == Mode::ClosedLoop {
            positive("mce_horizon", self.mce_horizon)?;
            positive("valid_fraction", self.valid_fraction)?;
            positive("blowup_limit", self.blowup_limit)?;
            if self.pdf_steps == 0 || self.pdf_bins == 0 {
                return Err("pdf_steps and pdf_bins must be >= 1".into());
            }
            if !(self.pdf_range[1] > self.pdf_range[0]) {
                return Err("pdf_range must be [lo, hi] with hi > lo".into());
            }
        }
        Ok(())
    }

    /// Adds `offset` to every seed.
    pub fn with_seed_offset(mut self, offset: u64) -> Self {
        for s in &mut self.seeds {
            *s = s.wrapping_add(offset);
        }
        self
    }

    /// Closed-loop steps covered by the MCE average.
    pub fn mce_steps(&self) -> usize {
        (self.mce_horizon / self.tau).round().max(1.0) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_open_loop_takes_defaults() {
        let c = ExperimentConfig::from_json(r#"{"schema_version": 1, "mode": "open_loop"}"#).unwrap();
        assert_eq!(c, ExperimentConfig::open_loop_defaults());
        assert_eq!(c.seeds.len(), 20);
    }

    #[test]
    fn closed_loop_defaults() {
        let c = ExperimentConfig::from_json(r#"{"schema_version": 1, "mode": "closed_loop"}"#).unwrap();
        assert_eq!(c.n, vec![10]);
        assert_eq!(c.tau, 0.02);
        assert_eq!(c.mce_steps(), 2500);
        assert_eq!(c.degree.len(), 3);
    }

    #[test]
    fn scalars_or_lists_and_seed_ranges() {
        let c = ExperimentConfig::from_json(
            r#"{"schema_version": 1, "mode": "open_loop", "n": 7, "degree": [2], "base_seed": 100, "realizations": 3}"#,
        )
        .unwrap();
        assert_eq!(c.n, vec![7]);
        assert_eq!(c.degree, vec![PolyDegree::Quadratic]);
        assert_eq!(c.seeds, vec![100, 101, 102]);
        assert_eq!(c.with_seed_offset(5).seeds, vec![105, 106, 107]);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            r#"{"schema_version": 2, "mode": "open_loop"}"#,
            r#"{"schema_version": 1, "mode": "sideways"}"#,
            r#"{"schema_version": 1, "mode": "open_loop", "tau": 0.015}"#,
            r#"{"schema_version": 1, "mode": "open_loop", "degree": [4]}"#,
            r#"{"schema_version": 1, "mode": "open_loop", "seeds": []}"#,
            r#"{"schema_version": 1, "mode": "open_loop", "washout": 20000}"#,
            r#"{"schema_version": 1, "mode": "open_loop", "n": [0]}"#,
            r#"{"schema_version": 1, "mode": "open_loop", "typo_field": 1}"#,
            r#"{"schema_version": 1, "mode": "open_loop", "seeds": [1], "base_seed": 3}"#,
        ];
        for text in bad {
            assert!(ExperimentConfig::from_json(text).is_err(), "{text}");
        }
    }
}
