//! The `polyres` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use polyres_core::PolyDegree;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Mode, SCHEMA_VERSION};
use crate::diagnostics::{run_csis, run_lyapunov, CsisConfig, LyapunovConfig};
use crate::error::{HarnessError, Result};
use crate::experiment::{run_closed_loop, run_open_loop, trace_closed_loop, trace_open_loop, ResultRow};
use crate::output::{emit_csv, read_csv};
use crate::plot::{emit_plot, PlotData, PlotKind};
use crate::readout_file::save_readout;
use crate::summary::{render, summarize, summarize_excluding, Metric};

#[derive(Debug, Parser)]
#[command(name = "polyres", version, about = "Echo state networks with polynomial readouts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Added to every seed in the configuration.
    #[arg(long, default_value_t = 0)]
    pub seed_offset: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// τ-ahead prediction sweep; writes <stem>.csv and an RMSE-vs-N <stem>.svg.
    OpenLoop(Common),
    /// Autonomous reconstruction ensemble; writes <stem>.csv and an MCE/KLD <stem>.svg.
    ClosedLoop {
        #[command(flatten)]
        common: Common,
        /// Also summarize each cell without its k worst runs.
        #[arg(long, default_value_t = 0)]
        exclude_worst: usize,
    },
    /// Maximal Lyapunov exponent of the target system.
    Lyapunov(Common),
    /// Echo-state check; exits nonzero if any run fails to synchronize.
    CsisCheck(Common),
    /// Draws one figure described by a plot configuration.
    Plot(Common),
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Usage errors exit with 2, failures with 1.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.command) {
        Ok(report) => {
            print!("{report}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into())
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn load_experiment(common: &Common, mode: Mode) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(&common.config)?.with_seed_offset(common.seed_offset);
    if cfg.mode != mode {
        return Err(HarnessError::Config(format!(
            "{}: mode is {}, expected {}",
            common.config.display(),
            cfg.mode.as_str(),
            mode.as_str()
        )));
    }
    Ok(cfg)
}

/// Runs one command and returns the text to print.
pub fn run(command: Command) -> Result<String> {
    match command {
        Command::OpenLoop(c) => open_loop(&c),
        Command::ClosedLoop { common, exclude_worst } => closed_loop(&common, exclude_worst),
        Command::Lyapunov(c) => lyapunov(&c),
        Command::CsisCheck(c) => csis_check(&c),
        Command::Plot(c) => plot(&c),
    }
}

fn write_rows(common: &Common, rows: &[ResultRow], kind: PlotKind, title: &str) -> Result<(PathBuf, PathBuf)> {
    prepare_out(&common.out)?;
    let s = stem(&common.config);
    let csv = common.out.join(format!("{s}.csv"));
    let svg = common.out.join(format!("{s}.svg"));
    emit_csv(rows, &csv)?;
    emit_plot(kind, PlotData::Rows(rows), title, &svg)?;
    Ok((csv, svg))
}

fn open_loop(common: &Common) -> Result<String> {
    let cfg = load_experiment(common, Mode::OpenLoop)?;
    let rows = run_open_loop(&cfg)?;
    let title = cfg.name.clone().unwrap_or_else(|| "open-loop RMSE".into());
    let (csv, svg) = write_rows(common, &rows, PlotKind::RmseVsN, &title)?;
    let mut out = render(&summarize(&rows, Metric::Rmse));
    let _ = writeln!(out, "wrote {} and {}", csv.display(), svg.display());
    Ok(out)
}

fn closed_loop(common: &Common, exclude_worst: usize) -> Result<String> {
    let cfg = load_experiment(common, Mode::ClosedLoop)?;
    let rows = run_closed_loop(&cfg)?;
    let title = cfg.name.clone().unwrap_or_else(|| "closed-loop MCE and KLD".into());
    let (csv, svg) = write_rows(common, &rows, PlotKind::MetricScatter, &title)?;
    let mut out = String::new();
    for m in [Metric::Mce, Metric::Kld, Metric::ValidTime, Metric::Rmse] {
        out.push_str(&render(&summarize(&rows, m)));
    }
    if exclude_worst > 0 {
        let _ = writeln!(out, "-- excluding the {exclude_worst} worst runs per cell --");
        for m in [Metric::Mce, Metric::Kld] {
            out.push_str(&render(&summarize_excluding(&rows, m, exclude_worst)));
        }
    }
    let _ = writeln!(out, "wrote {} and {}", csv.display(), svg.display());
    Ok(out)
}

fn lyapunov(common: &Common) -> Result<String> {
    // The exponent is deterministic; the seed offset has nothing to act on.
    let cfg = LyapunovConfig::load(&common.config)?;
    let lambda = run_lyapunov(&cfg)?;
    prepare_out(&common.out)?;
    let path = common.out.join(format!("{}.json", stem(&common.config)));
    let body = serde_json::json!({ "system": cfg.system, "horizon": cfg.horizon, "lambda": lambda });
    fs::write(&path, format!("{body}\n")).map_err(|e| HarnessError::io(&path, e))?;
    Ok(format!(
        "maximal Lyapunov exponent: {lambda:.4} (Lyapunov time {:.3})\nwrote {}\n",
        1.0 / lambda,
        path.display()
    ))
}

fn csis_check(common: &Common) -> Result<String> {
    let cfg = CsisConfig::load(&common.config)?.with_seed_offset(common.seed_offset);
    let runs = run_csis(&cfg)?;
    prepare_out(&common.out)?;
    let path = common.out.join(format!("{}.csv", stem(&common.config)));
    let mut csv = String::from("case,seed,step,distance\n");
    for r in &runs {
        for (t, d) in r.distances.iter().enumerate() {
            let _ = writeln!(csv, "{},{},{},{:.9e}", r.case, r.seed, t, d);
        }
    }
    fs::write(&path, csv).map_err(|e| HarnessError::io(&path, e))?;
    let mut out = String::new();
    let mut failed = 0;
    for r in &runs {
        match r.converged_at {
            Some(t) => {
                let _ = writeln!(out, "{:<12} seed {:<4} below {:.0e} after {} steps", r.case, r.seed, cfg.threshold, t + 1);
            }
            None => {
                failed += 1;
                let _ = writeln!(out, "{:<12} seed {:<4} NOT synchronized within {} steps", r.case, r.seed, cfg.steps);
            }
        }
    }
    let _ = writeln!(out, "wrote {}", path.display());
    if failed > 0 {
        print!("{out}");
        return Err(HarnessError::Config(format!(
            "{failed} of {} runs did not synchronize",
            runs.len()
        )));
    }
    Ok(out)
}

/// Contents of a `plot` configuration file. Relative paths are resolved
/// against the directory of the plot configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotConfig {
    pub schema_version: u32,
    pub kind: PlotKind,
    #[serde(default)]
    pub title: Option<String>,
    /// Result CSV, for `rmse_vs_n` and `metric_scatter`.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    /// Experiment configuration, for the trace kinds.
    #[serde(default)]
    pub experiment: Option<PathBuf>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub degree: Option<PolyDegree>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Number of samples drawn from the start of a time series or orbit.
    #[serde(default)]
    pub steps: Option<usize>,
}

impl serde::Serialize for PlotKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> serde::Deserialize<'de> for PlotKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        <PlotKind as clap::ValueEnum>::from_str(&s, false)
            .map_err(|_| serde::de::Error::custom(format!("unknown plot kind {s:?}")))
    }
}

impl PlotConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|source| HarnessError::Json {
            path: path.into(),
            source,
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "{}: unsupported schema_version {}",
                path.display(),
                cfg.schema_version
            )));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.csv, &mut cfg.experiment].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

fn plot(common: &Common) -> Result<String> {
    let pc = PlotConfig::load(&common.config)?;
    prepare_out(&common.out)?;
    let s = stem(&common.config);
    let svg = common.out.join(format!("{s}.svg"));
    let title = pc.title.clone().unwrap_or_else(|| pc.kind.as_str().into());
    let missing = |what: &str| HarnessError::Config(format!("plot kind {} needs `{what}`", pc.kind.as_str()));
    let mut out = String::new();
    match pc.kind {
        PlotKind::RmseVsN | PlotKind::MetricScatter => {
            let csv = pc.csv.as_ref().ok_or_else(|| missing("csv"))?;
            let rows = read_csv(csv)?;
            emit_plot(pc.kind, PlotData::Rows(&rows), &title, &svg)?;
        }
        kind => {
            let exp = pc.experiment.as_ref().ok_or_else(|| missing("experiment"))?;
            let cfg = ExperimentConfig::load(exp)?.with_seed_offset(common.seed_offset);
            let n = pc.n.unwrap_or(cfg.n[0]);
            let degree = pc.degree.unwrap_or(cfg.degree[0]);
            let seed = pc.seed.unwrap_or(0).wrapping_add(common.seed_offset);
            let limit = |len: usize| pc.steps.unwrap_or(len).min(len);
            let readout = match (kind, cfg.mode) {
                (PlotKind::Timeseries, Mode::OpenLoop) => {
                    let t = trace_open_loop(&cfg, n, degree, seed)?;
                    let k = limit(t.target.len());
                    let (a, b) = (t.target.slice(0, k), t.prediction.slice(0, k));
                    emit_plot(kind, PlotData::Series { target: &a, prediction: &b }, &title, &svg)?;
                    None
                }
                (_, Mode::ClosedLoop) => {
                    let t = trace_closed_loop(&cfg, n, degree, seed)?;
                    match kind {
                        PlotKind::Timeseries => {
                            let k = limit(t.prediction.len());
                            let (a, b) = (t.target.slice(0, k), t.prediction.slice(0, k));
                            emit_plot(kind, PlotData::Series { target: &a, prediction: &b }, &title, &svg)?;
                        }
                        PlotKind::PhaseXz => {
                            let k = limit(t.conjugacy_errors.len());
                            let orbit = t.orbit.slice(0, k);
                            let data = PlotData::Orbit {
                                orbit: &orbit,
                                errors: &t.conjugacy_errors[..k],
                            };
                            emit_plot(kind, data, &title, &svg)?;
                        }
                        _ => {
                            let data = PlotData::Densities {
                                reference: &t.reference_pdf,
                                model: t.model_pdf.as_ref(),
                            };
                            emit_plot(kind, data, &title, &svg)?;
                        }
                    }
                    let m = &t.metrics;
                    let _ = writeln!(
                        out,
                        "N={n} {} seed {seed}: mce={:?} kld={:?} valid_time={:?} diverged={}",
                        degree.symbol(),
                        m.mce,
                        m.kld,
                        m.valid_time,
                        m.diverged
                    );
                    Some(t.readout)
                }
                _ => {
                    return Err(HarnessError::PlotMismatch {
                        kind: kind.as_str(),
                        data: "an open-loop experiment",
                    })
                }
            };
            if let Some(r) = readout {
                let path = common.out.join(format!("{s}.readout.json"));
                save_readout(&r, &path)?;
                let _ = writeln!(out, "wrote {}", path.display());
            }
        }
    }
    let _ = writeln!(out, "wrote {}", svg.display());
    Ok(out)
}
