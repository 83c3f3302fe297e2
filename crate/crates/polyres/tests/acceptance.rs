//! Acceptance criteria, run against the shipped configurations.
//!
//! Every test prints one `PASS`/`FAIL` line before asserting, so
//! `cargo test -p polyres --test acceptance -- --nocapture` gives a report.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use polyres::diagnostics::{run_csis, run_lyapunov, CsisConfig, LyapunovConfig};
use polyres::summary::{find, summarize, Metric};
use polyres::{run_closed_loop, run_open_loop, ExperimentConfig, ResultRow};
use polyres_core::dynamics::{rk4_step, FlowMap, Lorenz};
use polyres_core::metrics::{histogram_pdf, kl_divergence};
use polyres_core::numerics::ridge_solve;
use polyres_core::readout::{feature_dim, features, PolyDegree, PolyReadout};
use polyres_core::{Matrix, Rng};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn report(id: u32, ok: bool, detail: &str) {
    println!("{} criterion {id}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} failed: {detail}");
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

#[test]
fn criterion_1_lyapunov_exponent() {
    let cfg = LyapunovConfig::load(&configs().join("lorenz.json")).unwrap();
    let (lambda, took) = timed(|| run_lyapunov(&cfg).unwrap());

    let out = tempfile::tempdir().unwrap();
    let cli = Command::new(env!("CARGO_BIN_EXE_polyres"))
        .args(["lyapunov", "--config"])
        .arg(configs().join("lorenz.json"))
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&cli.stdout);
    let printed = format!("{lambda:.4}");

    let ok = (lambda - 0.906).abs() <= 0.03
        && took < Duration::from_secs(60)
        && cli.status.success()
        && stdout.contains(&printed);
    report(
        1,
        ok,
        &format!("lambda = {lambda:.4} (target 0.906 +- 0.03) in {took:.2?}; CLI printed {printed}"),
    );
}

#[test]
fn criterion_2_open_loop_hierarchy() {
    let cfg = ExperimentConfig::load(&configs().join("open_loop_sweep.json")).unwrap();
    let (rows, took) = timed(|| run_open_loop(&cfg).unwrap());
    assert_eq!(rows.len(), 4 * 2 * 20);
    let s = summarize(&rows, Metric::Rmse);
    let mut ok = took < Duration::from_secs(600);
    let mut detail = String::new();
    for n in [5, 10, 20, 40] {
        let l = find(&s, n, PolyDegree::Linear).unwrap().median;
        let q = find(&s, n, PolyDegree::Quadratic).unwrap().median;
        ok &= q < l;
        detail.push_str(&format!("N={n}: Q/L = {q:.3e}/{l:.3e}; "));
    }
    let l40 = find(&s, 40, PolyDegree::Linear).unwrap().median;
    let q40 = find(&s, 40, PolyDegree::Quadratic).unwrap().median;
    let ratio = q40 / l40;
    ok &= ratio <= 0.1;
    report(2, ok, &format!("{detail}ratio at N=40 = {ratio:.3} (<= 0.1) in {took:.1?}"));
}

struct Ensemble {
    rows: Vec<ResultRow>,
    took: Duration,
}

/// The closed-loop ensemble is shared by criteria 3-5.
fn ensemble() -> &'static Ensemble {
    static CELL: OnceLock<Ensemble> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = ExperimentConfig::load(&configs().join("closed_loop_ensemble.json")).unwrap();
        let (rows, took) = timed(|| run_closed_loop(&cfg).unwrap());
        assert_eq!(rows.len(), 3 * 10);
        Ensemble { rows, took }
    })
}

fn of_degree(rows: &[ResultRow], d: PolyDegree) -> Vec<&ResultRow> {
    rows.iter().filter(|r| r.degree == d).collect()
}

#[test]
fn criterion_3_valid_time() {
    let e = ensemble();
    let s = summarize(&e.rows, Metric::ValidTime);
    let l = find(&s, 10, PolyDegree::Linear).unwrap().median;
    let q = find(&s, 10, PolyDegree::Quadratic).unwrap().median;
    let ok = q >= 2.0 * l && e.took < Duration::from_secs(600);
    report(
        3,
        ok,
        &format!(
            "median valid time Q = {q:.2}, L = {l:.2} (ratio {:.2} >= 2); ensemble {:.1?}",
            q / l,
            e.took
        ),
    );
}

#[test]
fn criterion_4_kld_magnitudes() {
    let e = ensemble();
    let q = of_degree(&e.rows, PolyDegree::Quadratic);
    let good = q.iter().filter(|r| r.metrics.kld.is_some_and(|k| k <= 1e-3)).count();
    let l = of_degree(&e.rows, PolyDegree::Linear);
    let poor = l
        .iter()
        .filter(|r| r.metrics.diverged || r.metrics.kld.is_some_and(|k| k >= 1e-2))
        .count();
    let best_q = q
        .iter()
        .filter_map(|r| r.metrics.kld)
        .fold(f64::INFINITY, f64::min);
    let ok = 2 * good >= q.len() && poor >= 1 && e.took < Duration::from_secs(900);
    report(
        4,
        ok,
        &format!(
            "Q seeds with KLD <= 1e-3: {good}/{} (best {best_q:.2e}); L seeds with KLD >= 1e-2 or diverged: {poor}/{}",
            q.len(),
            l.len()
        ),
    );
}

#[test]
fn criterion_5_hierarchical_improvement() {
    let e = ensemble();
    let mut ok = true;
    let mut detail = String::new();
    for m in [Metric::Mce, Metric::Kld] {
        let s = summarize(&e.rows, m);
        let [l, q, c] = PolyDegree::ALL.map(|d| find(&s, 10, d).unwrap().clone());
        ok &= c.median <= q.median && q.median <= l.median && q.iqr() < l.iqr();
        detail.push_str(&format!(
            "{}: median C/Q/L = {:.2e}/{:.2e}/{:.2e}, IQR Q/L = {:.2e}/{:.2e}; ",
            m.name(),
            c.median,
            q.median,
            l.median,
            q.iqr(),
            l.iqr()
        ));
    }
    report(5, ok, detail.trim_end_matches("; "));
}

#[test]
fn criterion_6_echo_state_property() {
    let cfg = CsisConfig::load(&configs().join("csis.json")).unwrap();
    let runs = run_csis(&cfg).unwrap();
    assert_eq!(runs.len(), 2 * 5);
    let worst = runs.iter().map(|r| r.converged_at.map_or(usize::MAX, |t| t + 1)).max().unwrap();
    let ok = cfg.threshold <= 1e-8 && cfg.steps <= 1000 && runs.iter().all(|r| r.converged_at.is_some());
    report(
        6,
        ok,
        &format!(
            "{} runs (2 regimes x 5 seeds) below 1e-8; slowest after {worst} steps",
            runs.len()
        ),
    );
}

fn rk4_order() -> f64 {
    let lorenz = Lorenz::default();
    let x0 = FlowMap::new(lorenz, 0.01, 0.01).unwrap().advance(&[1.0, 1.0, 1.0], 10.0).unwrap();
    let run = |h: f64| {
        let mut x = x0.clone();
        for _ in 0..(1.0 / h).round() as usize {
            x = rk4_step(&lorenz, &x, h).unwrap();
        }
        x
    };
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let (a, b, c) = (run(0.02), run(0.01), run(0.005));
    (d(&a, &b) / d(&b, &c)).log2()
}

fn ridge_oracle_gap() -> f64 {
    let mut rng = Rng::new(77);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let (s, d, l) = (15 + trial, 3 + trial % 5, 2);
        let phi = Matrix::new(s, d, (0..s * d).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let y = Matrix::new(s, l, (0..s * l).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let beta = 1e-3;
        let w = ridge_solve(&phi, &y, beta).unwrap();
        let p = DMatrix::from_row_slice(s, d, phi.as_slice());
        let t = DMatrix::from_row_slice(s, l, y.as_slice());
        let inv = (p.transpose() * &p + DMatrix::identity(d, d) * beta).try_inverse().unwrap();
        let oracle = inv * p.transpose() * t;
        for i in 0..d {
            for j in 0..l {
                worst = worst.max((w[(i, j)] - oracle[(i, j)]).abs());
            }
        }
    }
    worst
}

fn feature_invariants_hold() -> bool {
    let mut rng = Rng::new(5);
    (1..=40).all(|n| {
        let r: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let f: Vec<_> = PolyDegree::ALL.iter().map(|d| features(&r, *d)).collect();
        let dims = [1 + n, 1 + n + n * (n + 1) / 2, 1 + n + n * (n + 1) / 2 + n * (n + 1) * (n + 2) / 6];
        PolyDegree::ALL.iter().zip(&f).zip(dims).all(|((d, v), dim)| v.len() == dim && feature_dim(n, *d) == dim)
            && f[1].starts_with(&f[0])
            && f[2].starts_with(&f[1])
    })
}

fn exact_recovery_gap() -> f64 {
    let mut rng = Rng::new(9);
    let mut worst: f64 = 0.0;
    for d in PolyDegree::ALL {
        let n = 3;
        let dim = feature_dim(n, d);
        let truth = Matrix::new(2, dim, (0..2 * dim).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let samples = 4 * dim;
        let states = Matrix::new(samples, n, (0..samples * n).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let mut targets = Vec::new();
        for i in 0..samples {
            targets.extend(truth.mul_vec(&features(states.row(i), d)).unwrap());
        }
        let targets = Matrix::new(samples, 2, targets).unwrap();
        let fit = PolyReadout::train(&states, &targets, d, 0.0).unwrap();
        worst = worst.max(
            fit.weights()
                .as_slice()
                .iter()
                .zip(truth.transpose().as_slice())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
    }
    worst
}

fn kld_self() -> f64 {
    let mut rng = Rng::new(3);
    let x: Vec<f64> = (0..10_000).map(|_| rng.uniform(-20.0, 20.0)).collect();
    let p = histogram_pdf(&x, -25.0, 25.0, 100).unwrap();
    kl_divergence(&p, &p).unwrap()
}

const SMALL_OPEN: &str = r#"{
  "schema_version": 1, "mode": "open_loop", "n": [4, 8], "degree": [1, 2],
  "realizations": 3, "train_samples": 800, "washout": 50, "eval_samples": 200
}"#;

const SMALL_CLOSED: &str = r#"{
  "schema_version": 1, "mode": "closed_loop", "n": 6, "degree": [1, 2],
  "realizations": 3, "train_samples": 2000, "washout": 200, "eval_samples": 300,
  "mce_horizon": 2, "pdf_steps": 3000
}"#;

fn csv_bytes(dir: &Path, name: &str, body: &str, threads: &str, run: usize) -> Vec<u8> {
    let cfg = dir.join(format!("{name}.json"));
    std::fs::write(&cfg, body).unwrap();
    let out = dir.join(format!("{name}-{threads}-{run}"));
    let mode = if body.contains("open_loop") { "open-loop" } else { "closed-loop" };
    let status = Command::new(env!("CARGO_BIN_EXE_polyres"))
        .arg(mode)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env("POLYRES_THREADS", threads)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    std::fs::read(out.join(format!("{name}.csv"))).unwrap()
}

fn csv_deterministic() -> bool {
    let dir = tempfile::tempdir().unwrap();
    [("small_open", SMALL_OPEN), ("small_closed", SMALL_CLOSED)].iter().all(|(name, body)| {
        let a = csv_bytes(dir.path(), name, body, "1", 0);
        let b = csv_bytes(dir.path(), name, body, "1", 1);
        let c = csv_bytes(dir.path(), name, body, "3", 0);
        !a.is_empty() && a == b && a == c
    })
}

#[test]
fn criterion_7_property_suites() {
    let start = Instant::now();
    let order = rk4_order();
    let ridge = ridge_oracle_gap();
    let features = feature_invariants_hold();
    let recovery = exact_recovery_gap();
    let kld = kld_self();
    let determinism = csv_deterministic();
    let took = start.elapsed();
    let ok = (3.7..=4.3).contains(&order)
        && ridge <= 1e-8
        && features
        && recovery <= 1e-9
        && kld == 0.0
        && determinism
        && took < Duration::from_secs(60);
    report(
        7,
        ok,
        &format!(
            "RK4 order {order:.3}; ridge vs inverse {ridge:.1e}; feature invariants {features}; \
             recovery error {recovery:.1e}; KLD(p,p) = {kld}; byte-identical CSVs {determinism}; {took:.1?}"
        ),
    );
}
