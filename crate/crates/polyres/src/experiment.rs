//! Open-loop and closed-loop experiments.
//!
//! Every `(n, degree, seed)` cell is an independent job: it builds its own
//! reservoir from its seed, trains its own readout and only reads the shared
//! target data. Cells run on a rayon pool (capped by `POLYRES_THREADS`) and
//! the rows are sorted by `(n, degree, seed)` afterwards, so output does not
//! depend on scheduling.

use polyres_core::dynamics::{generate_trajectory, FlowMap, TargetSystem, Trajectory};
use polyres_core::metrics::{self, histogram_pdf, kl_divergence, Histogram, RunMetrics};
use polyres_core::readout::{AutonomousEsn, PolyDegree, PolyReadout};
use polyres_core::reservoir::{Esn, EsnConfig};
use polyres_core::Error as CoreError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Mode, SystemKind};
use crate::error::{HarnessError, Result};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "POLYRES_THREADS";

/// One realization of one `(n, degree)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub mode: Mode,
    pub system: SystemKind,
    pub n: usize,
    pub degree: PolyDegree,
    pub seed: u64,
    pub tau: f64,
    #[serde(flatten)]
    pub metrics: RunMetrics,
}

impl ResultRow {
    fn sort_key(&self) -> (usize, PolyDegree, u64) {
        (self.n, self.degree, self.seed)
    }
}

pub(crate) fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))
}

fn cells(cfg: &ExperimentConfig) -> Vec<(usize, PolyDegree, u64)> {
    let mut out = Vec::new();
    for &n in &cfg.n {
        for &d in &cfg.degree {
            for &s in &cfg.seeds {
                out.push((n, d, s));
            }
        }
    }
    out
}

fn run_cells<F>(cfg: &ExperimentConfig, cell: F) -> Result<Vec<ResultRow>>
where
    F: Fn(usize, PolyDegree, u64) -> Result<ResultRow> + Sync,
{
    let jobs = cells(cfg);
    let mut rows = thread_pool()?.install(|| {
        jobs.par_iter()
            .map(|&(n, d, s)| cell(n, d, s))
            .collect::<Result<Vec<_>>>()
    })?;
    rows.sort_by_key(ResultRow::sort_key);
    Ok(rows)
}

fn flow_map(cfg: &ExperimentConfig) -> Result<FlowMap<TargetSystem>> {
    Ok(FlowMap::new(cfg.system.target(), cfg.tau, cfg.h)?)
}

/// Target signal sampled every τ after the configured transient.
pub fn target_data(cfg: &ExperimentConfig, len: usize) -> Result<Trajectory> {
    Ok(generate_trajectory(&flow_map(cfg)?, &cfg.x0, cfg.discard_time, len)?)
}

fn esn_config(cfg: &ExperimentConfig, n: usize, seed: u64) -> EsnConfig {
    EsnConfig {
        n,
        k: 3,
        spectral_radius: cfg.spectral_radius,
        sigma_b: cfg.sigma_b,
        seed,
    }
}

/// Reservoir synchronized on the first `train_samples` inputs and a readout
/// trained on the `(r_t, x_{t+1})` pairs after the washout.
struct Trained {
    esn: Esn,
    readout: PolyReadout,
}

fn train_cell(cfg: &ExperimentConfig, data: &Trajectory, n: usize, degree: PolyDegree, seed: u64) -> Result<Trained> {
    let t = cfg.train_samples;
    let mut esn = Esn::build(&esn_config(cfg, n, seed))?;
    let states = esn.drive(&data.slice(0, t), cfg.washout)?;
    let targets = data.slice(cfg.washout + 1, t + 1).to_matrix();
    let readout = PolyReadout::train(&states, &targets, degree, cfg.beta)?;
    Ok(Trained { esn, readout })
}

/// Teacher-forced one-step predictions for `inputs[0..len]`, starting from
/// the state synchronized on everything before `inputs[0]`. Prediction `i`
/// estimates `inputs[i]`.
fn teacher_forced(trained: &Trained, inputs: &Trajectory, tau: f64) -> Result<Trajectory> {
    let mut esn = trained.esn.clone();
    let mut out = Trajectory::with_capacity(tau, trained.readout.l(), inputs.len());
    for x in inputs.iter() {
        out.push(&trained.readout.predict(esn.state())?)?;
        esn.update(x)?;
    }
    Ok(out)
}

fn check_mode(cfg: &ExperimentConfig, mode: Mode) -> Result<()> {
    if cfg.mode != mode {
        return Err(HarnessError::Config(format!(
            "config mode is {} but {} was requested",
            cfg.mode.as_str(),
            mode.as_str()
        )));
    }
    Ok(())
}

/// τ-ahead prediction with the reservoir driven by true data. Each row holds
/// the RMSE over `eval_samples` held-out steps following the training data.
pub fn run_open_loop(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    check_mode(cfg, Mode::OpenLoop)?;
    let data = target_data(cfg, cfg.train_samples + cfg.eval_samples)?;
    run_cells(cfg, |n, degree, seed| {
        let trace = open_loop_cell(cfg, &data, n, degree, seed)?;
        Ok(ResultRow {
            mode: Mode::OpenLoop,
            system: cfg.system,
            n,
            degree,
            seed,
            tau: cfg.tau,
            metrics: RunMetrics {
                rmse: Some(metrics::rmse(&trace.target, &trace.prediction)?),
                ..RunMetrics::default()
            },
        })
    })
}

/// Held-out targets and open-loop predictions of one cell.
#[derive(Debug, Clone)]
pub struct OpenLoopTrace {
    pub target: Trajectory,
    pub prediction: Trajectory,
}

fn open_loop_cell(
    cfg: &ExperimentConfig,
    data: &Trajectory,
    n: usize,
    degree: PolyDegree,
    seed: u64,
) -> Result<OpenLoopTrace> {
    let t = cfg.train_samples;
    let trained = train_cell(cfg, data, n, degree, seed)?;
    let target = data.slice(t, t + cfg.eval_samples);
    let prediction = teacher_forced(&trained, &target, cfg.tau)?;
    Ok(OpenLoopTrace { target, prediction })
}

/// Recomputes one open-loop cell and returns its held-out time series.
pub fn trace_open_loop(cfg: &ExperimentConfig, n: usize, degree: PolyDegree, seed: u64) -> Result<OpenLoopTrace> {
    check_mode(cfg, Mode::OpenLoop)?;
    let data = target_data(cfg, cfg.train_samples + cfg.eval_samples)?;
    open_loop_cell(cfg, &data, n, degree, seed)
}

/// Data shared by all closed-loop cells.
struct ClosedLoopShared {
    data: Trajectory,
    phi: FlowMap<TargetSystem>,
    /// Target x-density from a `pdf_steps` continuation of the data.
    reference_pdf: Histogram,
}

impl ClosedLoopShared {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let phi = flow_map(cfg)?;
        let data = target_data(cfg, cfg.train_samples + cfg.eval_samples)?;
        let last = data.get(data.len() - 1);
        let long = generate_trajectory(&phi, last, 0.0, cfg.pdf_steps)?;
        let reference_pdf = x_histogram(cfg, &long)?;
        Ok(Self {
            data,
            phi,
            reference_pdf,
        })
    }
}

fn x_histogram(cfg: &ExperimentConfig, traj: &Trajectory) -> Result<Histogram> {
    Ok(histogram_pdf(
        &traj.component(0),
        cfg.pdf_range[0],
        cfg.pdf_range[1],
        cfg.pdf_bins,
    )?)
}

/// Everything computed for one closed-loop cell.
#[derive(Debug, Clone)]
pub struct ClosedLoopTrace {
    pub metrics: RunMetrics,
    /// True continuation after the synchronization point (`eval_samples`).
    pub target: Trajectory,
    /// Closed-loop outputs over the same window (shorter if diverged).
    pub prediction: Trajectory,
    /// Outputs `ĥ(r_t)` along the MCE orbit, paired with `conjugacy_errors`.
    pub orbit: Trajectory,
    pub conjugacy_errors: Vec<f64>,
    pub reference_pdf: Histogram,
    pub model_pdf: Option<Histogram>,
    pub readout: PolyReadout,
}

fn closed_loop_cell(
    cfg: &ExperimentConfig,
    shared: &ClosedLoopShared,
    n: usize,
    degree: PolyDegree,
    seed: u64,
) -> Result<ClosedLoopTrace> {
    let t = cfg.train_samples;
    let trained = train_cell(cfg, &shared.data, n, degree, seed)?;
    let target = shared.data.slice(t, t + cfg.eval_samples);
    let rmse = metrics::rmse(&target, &teacher_forced(&trained, &target, cfg.tau)?)?;

    let sys = AutonomousEsn::new(trained.esn.clone(), trained.readout.clone(), cfg.tau)?
        .with_blowup_limit(cfg.blowup_limit);
    let mut diverged = false;

    // Orbit of G from the synchronized state, with its local conjugacy errors.
    let mce_steps = cfg.mce_steps();
    let (orbit, _) = sys.clone().closed_loop_run_partial(mce_steps);
    let conjugacy_errors = if orbit.len() == mce_steps {
        match metrics::conjugacy_errors(&shared.phi, &sys, trained.esn.state(), mce_steps) {
            Ok(e) => e,
            Err(CoreError::Diverged { .. }) => {
                diverged = true;
                Vec::new()
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        diverged = true;
        Vec::new()
    };

    // One long free run from the same state serves the valid time (its
    // prefix) and the invariant density.
    let long_steps = cfg.pdf_steps.max(cfg.eval_samples);
    let (outputs, err) = sys.clone().closed_loop_run_partial(long_steps);
    match err {
        None | Some(CoreError::Diverged { .. }) => {}
        Some(e) => return Err(e.into()),
    }
    diverged |= err.is_some();

    let horizon = cfg.eval_samples.min(outputs.len());
    let prediction = outputs.slice(0, horizon);
    let valid_time = if horizon == 0 {
        0.0
    } else {
        metrics::valid_prediction_time(&target.slice(0, horizon), &prediction, cfg.valid_fraction)?
    };

    let model_pdf = if diverged {
        None
    } else {
        Some(x_histogram(cfg, &outputs.slice(0, cfg.pdf_steps))?)
    };
    let kld = match &model_pdf {
        Some(q) => Some(kl_divergence(&shared.reference_pdf, q)?),
        None => None,
    };
    let mce = (!diverged).then(|| conjugacy_errors.iter().sum::<f64>() / conjugacy_errors.len() as f64);

    Ok(ClosedLoopTrace {
        metrics: RunMetrics {
            rmse: Some(rmse),
            mce,
            kld,
            valid_time: Some(valid_time),
            diverged,
        },
        target,
        prediction,
        orbit,
        conjugacy_errors,
        reference_pdf: shared.reference_pdf.clone(),
        model_pdf,
        readout: trained.readout,
    })
}

/// Autonomous reconstruction. Per cell: train open loop, synchronize on the
/// training data, then
/// * `rmse`: teacher-forced one-step error on the `eval_samples` after it,
/// * `valid_time`: closed-loop forecast against the same window,
/// * `mce`: mean conjugacy error over `mce_horizon` time units of the orbit,
/// * `kld`: density of x over `pdf_steps` closed-loop steps against an
///   equally long run of the target.
///
/// A diverged closed loop is flagged and leaves `mce` and `kld` empty; it
/// does not abort the batch.
pub fn run_closed_loop(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    check_mode(cfg, Mode::ClosedLoop)?;
    let shared = ClosedLoopShared::new(cfg)?;
    run_cells(cfg, |n, degree, seed| {
        let trace = closed_loop_cell(cfg, &shared, n, degree, seed)?;
        Ok(ResultRow {
            mode: Mode::ClosedLoop,
            system: cfg.system,
            n,
            degree,
            seed,
            tau: cfg.tau,
            metrics: trace.metrics,
        })
    })
}

/// Recomputes one closed-loop cell with its full traces.
pub fn trace_closed_loop(cfg: &ExperimentConfig, n: usize, degree: PolyDegree, seed: u64) -> Result<ClosedLoopTrace> {
    check_mode(cfg, Mode::ClosedLoop)?;
    let shared = ClosedLoopShared::new(cfg)?;
    closed_loop_cell(cfg, &shared, n, degree, seed)
}
