//! Per-cell aggregation of result rows.
//!
//! A diverged run has no MCE or KLD; for medians and quartiles it counts as
//! `+inf`, i.e. as worse than every finished run. Optionally the `k` largest
//! values of a cell can be excluded before aggregating; this is an explicit
//! filter, reported in the summary, never applied silently.

use std::collections::BTreeMap;

use polyres_core::PolyDegree;

use crate::experiment::ResultRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Rmse,
    Mce,
    Kld,
    ValidTime,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Rmse, Metric::Mce, Metric::Kld, Metric::ValidTime];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Rmse => "rmse",
            Metric::Mce => "mce",
            Metric::Kld => "kld",
            Metric::ValidTime => "valid_time",
        }
    }

    /// Value used for ranking; `None` if the metric was never computed.
    pub fn value(self, row: &ResultRow) -> Option<f64> {
        let m = &row.metrics;
        let v = match self {
            Metric::Rmse => m.rmse,
            Metric::Mce => m.mce,
            Metric::Kld => m.kld,
            Metric::ValidTime => m.valid_time,
        };
        match (v, m.diverged, self) {
            (Some(x), _, _) => Some(x),
            (None, true, Metric::Mce | Metric::Kld) => Some(f64::INFINITY),
            _ => None,
        }
    }
}

/// Linear-interpolated quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi || sorted[lo] == sorted[hi] {
        return sorted[lo];
    }
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// Summary of one metric over the seeds of one `(n, degree)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub n: usize,
    pub degree: PolyDegree,
    pub metric: Metric,
    /// Rows carrying a value for the metric (diverged runs included).
    pub count: usize,
    pub diverged: usize,
    /// Largest values dropped by [`summarize_excluding`].
    pub excluded: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

impl CellSummary {
    /// `q3 - q1`; infinite when the upper quartile is a diverged run.
    pub fn iqr(&self) -> f64 {
        if self.q3.is_infinite() {
            return f64::INFINITY;
        }
        self.q3 - self.q1
    }
}

/// Groups rows by `(n, degree)` and summarizes `metric` in each cell.
pub fn summarize(rows: &[ResultRow], metric: Metric) -> Vec<CellSummary> {
    summarize_excluding(rows, metric, 0)
}

/// Like [`summarize`], after dropping the `exclude_worst` largest values of
/// every cell (diverged runs first).
pub fn summarize_excluding(rows: &[ResultRow], metric: Metric, exclude_worst: usize) -> Vec<CellSummary> {
    let mut cells: BTreeMap<(usize, PolyDegree), (Vec<f64>, usize)> = BTreeMap::new();
    for r in rows {
        if let Some(v) = metric.value(r) {
            let e = cells.entry((r.n, r.degree)).or_default();
            e.0.push(v);
            e.1 += usize::from(r.metrics.diverged);
        }
    }
    cells
        .into_iter()
        .filter_map(|((n, degree), (mut v, diverged))| {
            v.sort_by(f64::total_cmp);
            let excluded = exclude_worst.min(v.len().saturating_sub(1));
            let count = v.len();
            v.truncate(count - excluded);
            if v.is_empty() {
                return None;
            }
            Some(CellSummary {
                n,
                degree,
                metric,
                count,
                diverged,
                excluded,
                median: quantile(&v, 0.5),
                q1: quantile(&v, 0.25),
                q3: quantile(&v, 0.75),
                min: v[0],
                max: v[v.len() - 1],
            })
        })
        .collect()
}

/// Looks up the summary of one cell.
pub fn find(summaries: &[CellSummary], n: usize, degree: PolyDegree) -> Option<&CellSummary> {
    summaries.iter().find(|s| s.n == n && s.degree == degree)
}

/// Plain-text table, one line per cell.
pub fn render(summaries: &[CellSummary]) -> String {
    let mut out = String::new();
    for s in summaries {
        out.push_str(&format!(
            "{:<10} N={:<3} {}  median={:.4e}  IQR={:.4e}  [{:.3e}, {:.3e}]  runs={} diverged={}{}\n",
            s.metric.name(),
            s.n,
            s.degree.symbol(),
            s.median,
            s.iqr(),
            s.min,
            s.max,
            s.count,
            s.diverged,
            if s.excluded > 0 {
                format!(" excluded_worst={}", s.excluded)
            } else {
                String::new()
            }
        ));
    }
    out
}
