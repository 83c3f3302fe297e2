//! Checks on the target system and the reservoir that do not involve a
//! trained readout: the maximal Lyapunov exponent and the echo-state
//! (common-signal-induced synchronization) test.

use std::fs;
use std::path::Path;

use polyres_core::dynamics::{generate_trajectory, max_lyapunov_with, FlowMap, LyapunovOptions};
use polyres_core::reservoir::{csis_distance, EsnConfig};
use polyres_core::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{SystemKind, SCHEMA_VERSION};
use crate::error::{HarnessError, Result};

fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json {
        path: path.into(),
        source,
    })
}

fn check_schema(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(HarnessError::Config(format!(
            "unsupported schema_version {v} (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

fn default_x0() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

/// Settings of the `lyapunov` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub system: SystemKind,
    #[serde(default = "default_x0")]
    pub x0: [f64; 3],
    /// Time integrated before measuring, to land on the attractor.
    #[serde(default = "LyapunovConfig::default_transient")]
    pub transient: f64,
    #[serde(default = "LyapunovConfig::default_horizon")]
    pub horizon: f64,
    #[serde(default = "LyapunovConfig::default_h")]
    pub h: f64,
    #[serde(default = "LyapunovConfig::default_renormalize")]
    pub renormalize_every: f64,
    #[serde(default = "LyapunovConfig::default_separation")]
    pub initial_separation: f64,
}

impl LyapunovConfig {
    fn default_transient() -> f64 {
        10.0
    }
    fn default_horizon() -> f64 {
        2000.0
    }
    fn default_h() -> f64 {
        LyapunovOptions::default().h
    }
    fn default_renormalize() -> f64 {
        LyapunovOptions::default().renormalize_every
    }
    fn default_separation() -> f64 {
        LyapunovOptions::default().initial_separation
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = load_json(path)?;
        check_schema(cfg.schema_version)?;
        Ok(cfg)
    }
}

/// Maximal Lyapunov exponent of the configured system.
pub fn run_lyapunov(cfg: &LyapunovConfig) -> Result<f64> {
    let system = cfg.system.target();
    let start = FlowMap::new(system, cfg.h, cfg.h)?.advance(&cfg.x0, cfg.transient)?;
    let opts = LyapunovOptions {
        h: cfg.h,
        renormalize_every: cfg.renormalize_every,
        initial_separation: cfg.initial_separation,
    };
    Ok(max_lyapunov_with(&system, &start, cfg.horizon, &opts)?)
}

/// One reservoir regime of the echo-state check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsisCase {
    pub name: String,
    pub n: usize,
    pub spectral_radius: f64,
    pub sigma_b: f64,
    /// Sampling interval of the driving signal.
    pub tau: f64,
}

/// Settings of the `csis-check` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsisConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub system: SystemKind,
    pub cases: Vec<CsisCase>,
    pub seeds: Vec<u64>,
    /// Driving steps per run.
    pub steps: usize,
    /// Distance the two copies must fall below within `steps`.
    pub threshold: f64,
    #[serde(default = "default_x0")]
    pub x0: [f64; 3],
    #[serde(default = "CsisConfig::default_discard")]
    pub discard_time: f64,
}

impl CsisConfig {
    fn default_discard() -> f64 {
        10.0
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = load_json(path)?;
        check_schema(cfg.schema_version)?;
        if cfg.cases.is_empty() || cfg.seeds.is_empty() || cfg.steps == 0 {
            return Err(HarnessError::Config(
                "csis check needs at least one case, one seed and one step".into(),
            ));
        }
        Ok(cfg)
    }

    pub fn with_seed_offset(mut self, offset: u64) -> Self {
        for s in &mut self.seeds {
            *s = s.wrapping_add(offset);
        }
        self
    }
}

/// Distances between two reservoir copies for one `(case, seed)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsisRun {
    pub case: String,
    pub seed: u64,
    pub distances: Vec<f64>,
    /// First step (0-based) at which the distance is below the threshold.
    pub converged_at: Option<usize>,
}

/// Drives two copies of each reservoir, started from independent uniform
/// states in `[-1, 1]^n`, with the same target signal.
pub fn run_csis(cfg: &CsisConfig) -> Result<Vec<CsisRun>> {
    let mut runs = Vec::new();
    for case in &cfg.cases {
        let map = FlowMap::with_default_step(cfg.system.target(), case.tau)?;
        let inputs = generate_trajectory(&map, &cfg.x0, cfg.discard_time, cfg.steps)?;
        for &seed in &cfg.seeds {
            let esn = EsnConfig {
                n: case.n,
                k: 3,
                spectral_radius: case.spectral_radius,
                sigma_b: case.sigma_b,
                seed,
            };
            // Initial states come from a stream separate from the weights.
            let mut rng = Rng::new(seed ^ 0x5eed_c515);
            let r0: Vec<f64> = (0..case.n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let r1: Vec<f64> = (0..case.n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let distances = csis_distance(&esn, &inputs, &r0, &r1)?;
            let converged_at = distances.iter().position(|d| *d < cfg.threshold);
            runs.push(CsisRun {
                case: case.name.clone(),
                seed,
                distances,
                converged_at,
            });
        }
    }
    Ok(runs)
}
