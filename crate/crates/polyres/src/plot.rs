//! Standalone SVG figures, written by hand.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use polyres_core::dynamics::Trajectory;
use polyres_core::metrics::Histogram;
use polyres_core::PolyDegree;

use crate::error::{HarnessError, Result};
use crate::experiment::ResultRow;
use crate::summary::{median, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum PlotKind {
    /// Per-seed RMSE against reservoir size, log scale.
    RmseVsN,
    /// Target (grey dashed) and prediction (red) for each component.
    Timeseries,
    /// x-z projection of an orbit colored by the local conjugacy error.
    PhaseXz,
    /// Target and model densities of x.
    PdfOverlay,
    /// Per-seed MCE and KLD grouped by readout degree.
    MetricScatter,
}

impl PlotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::RmseVsN => "rmse_vs_n",
            PlotKind::Timeseries => "timeseries",
            PlotKind::PhaseXz => "phase_xz",
            PlotKind::PdfOverlay => "pdf_overlay",
            PlotKind::MetricScatter => "metric_scatter",
        }
    }
}

/// Input of a figure.
#[derive(Debug, Clone, Copy)]
pub enum PlotData<'a> {
    Rows(&'a [ResultRow]),
    Series {
        target: &'a Trajectory,
        prediction: &'a Trajectory,
    },
    Orbit {
        orbit: &'a Trajectory,
        errors: &'a [f64],
    },
    Densities {
        reference: &'a Histogram,
        model: Option<&'a Histogram>,
    },
}

impl PlotData<'_> {
    fn name(&self) -> &'static str {
        match self {
            PlotData::Rows(_) => "result rows",
            PlotData::Series { .. } => "time series",
            PlotData::Orbit { .. } => "an orbit",
            PlotData::Densities { .. } => "densities",
        }
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const GREY: &str = "#7f7f7f";
const RED: &str = "#d62728";

fn degree_color(d: PolyDegree) -> &'static str {
    match d {
        PolyDegree::Linear => "#1f77b4",
        PolyDegree::Quadratic => "#d62728",
        PolyDegree::Cubic => "#2ca02c",
    }
}

fn degree_label(d: PolyDegree) -> &'static str {
    match d {
        PolyDegree::Linear => "L-ESN",
        PolyDegree::Quadratic => "Q-ESN",
        PolyDegree::Cubic => "C-ESN",
    }
}

pub fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        return format!("{v:.0e}");
    }
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn linear(values: impl IntoIterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = bounds(values);
        if lo == hi {
            lo -= 0.5f64.max(lo.abs() * 0.1);
            hi += 0.5f64.max(hi.abs() * 0.1);
        }
        let pad = 0.05 * (hi - lo);
        Axis {
            lo: lo - pad,
            hi: hi + pad,
            log: false,
        }
    }

    fn log(values: impl IntoIterator<Item = f64>) -> Self {
        let (lo, hi) = bounds(values.into_iter().filter(|v| *v > 0.0));
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (1.0, 10.0) };
        Axis {
            lo: lo.log10().floor(),
            hi: hi.log10().ceil().max(lo.log10().floor() + 1.0),
            log: true,
        }
    }

    fn fixed(lo: f64, hi: f64) -> Self {
        Axis { lo, hi, log: false }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.max(1e-300).log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let step = ((self.hi - self.lo) / 8.0).ceil().max(1.0);
            let mut t = Vec::new();
            let mut e = self.lo;
            while e <= self.hi + 1e-9 {
                t.push(10f64.powf(e));
                e += step;
            }
            return t;
        }
        let raw = (self.hi - self.lo) / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let mut t = Vec::new();
        let mut v = (self.lo / step).ceil() * step;
        while v <= self.hi + 1e-9 * step {
            t.push(if v.abs() < 1e-12 * step { 0.0 } else { v });
            v += step;
        }
        t
    }
}

fn bounds(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// A rectangular plotting area inside the document.
struct Panel {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: Axis,
    y: Axis,
    /// Named x positions replacing the numeric ticks.
    categories: Vec<(f64, &'static str)>,
}

impl Panel {
    fn px(&self, x: f64) -> f64 {
        self.left + self.x.frac(x) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + (1.0 - self.y.frac(y)) * self.height
    }

    fn frame(&self, svg: &mut String, xlabel: &str, ylabel: &str) {
        let (l, t, w, h) = (self.left, self.top, self.width, self.height);
        let _ = writeln!(
            svg,
            r#"<rect x="{l:.2}" y="{t:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="black"/>"#
        );
        let xticks: Vec<(f64, String)> = if self.categories.is_empty() {
            self.x.ticks().into_iter().map(|v| (v, fmt_tick(v))).collect()
        } else {
            self.categories.iter().map(|(v, s)| (*v, s.to_string())).collect()
        };
        for (v, label) in xticks {
            let x = self.px(v);
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
                t + h,
                t + h + 5.0,
                t + h + 18.0,
                xml_escape(&label)
            );
        }
        for v in self.y.ticks() {
            let y = self.py(v);
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{l:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
                l - 5.0,
                l - 8.0,
                y + 4.0,
                xml_escape(&fmt_tick(v))
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
            l + w / 2.0,
            t + h + 36.0,
            xml_escape(xlabel)
        );
        let (cx, cy) = (l - 52.0, t + h / 2.0);
        let _ = writeln!(
            svg,
            r#"<text x="{cx:.2}" y="{cy:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 {cx:.2} {cy:.2})">{}</text>"#,
            xml_escape(ylabel)
        );
    }

    fn polyline(&self, svg: &mut String, pts: impl Iterator<Item = (f64, f64)>, color: &str, dash: bool) {
        let mut d = String::new();
        for (x, y) in pts {
            if x.is_finite() && y.is_finite() {
                let _ = write!(d, "{:.2},{:.2} ", self.px(x), self.py(y));
            }
        }
        let dash = if dash { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            d.trim_end()
        );
    }

    fn marker(&self, svg: &mut String, x: f64, y: f64, color: &str, filled: bool) {
        let fill = if filled { color } else { "none" };
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{fill}" stroke="{color}"/>"#,
            self.px(x),
            self.py(y)
        );
    }
}

fn document(title: &str, body: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n\
<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
<text x=\"{:.2}\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n{body}</svg>\n",
        WIDTH / 2.0,
        xml_escape(title)
    )
}

fn legend(svg: &mut String, x: f64, y: f64, entries: &[(&str, &str, bool)]) {
    for (i, (label, color, dash)) in entries.iter().enumerate() {
        let yy = y + 16.0 * i as f64;
        let dash = if *dash { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            x + 20.0,
            x + 25.0,
            yy + 4.0,
            xml_escape(label)
        );
    }
}

fn degrees_in(rows: &[ResultRow]) -> Vec<PolyDegree> {
    let mut d: Vec<_> = rows.iter().map(|r| r.degree).collect();
    d.sort();
    d.dedup();
    d
}

fn rmse_vs_n(rows: &[ResultRow], title: &str) -> Result<String> {
    let pts: Vec<_> = rows
        .iter()
        .filter_map(|r| r.metrics.rmse.map(|v| (r.n as f64, v, r.degree)))
        .collect();
    if pts.is_empty() {
        return Err(HarnessError::PlotMismatch {
            kind: "rmse_vs_n",
            data: "rows without rmse values",
        });
    }
    let degrees = degrees_in(rows);
    let panel = Panel {
        left: 80.0,
        top: 40.0,
        width: WIDTH - 110.0,
        height: HEIGHT - 100.0,
        x: Axis::linear(pts.iter().map(|p| p.0)),
        y: Axis::log(pts.iter().map(|p| p.1)),
        categories: Vec::new(),
    };
    let mut svg = String::new();
    panel.frame(&mut svg, "N", "RMSE");
    let span = panel.x.hi - panel.x.lo;
    for (x, y, d) in &pts {
        let k = degrees.iter().position(|e| e == d).unwrap_or(0) as f64;
        let shift = (k - (degrees.len() as f64 - 1.0) / 2.0) * 0.012 * span;
        panel.marker(&mut svg, x + shift, *y, degree_color(*d), true);
    }
    let entries: Vec<_> = degrees.iter().map(|d| (degree_label(*d), degree_color(*d), false)).collect();
    legend(&mut svg, panel.left + panel.width - 90.0, panel.top + 16.0, &entries);
    Ok(document(title, &svg))
}

fn metric_scatter(rows: &[ResultRow], title: &str) -> Result<String> {
    let degrees = degrees_in(rows);
    let mut svg = String::new();
    let mut any = false;
    for (i, metric) in [Metric::Mce, Metric::Kld].into_iter().enumerate() {
        let vals: Vec<_> = rows.iter().filter_map(|r| metric.value(r).map(|v| (r, v))).collect();
        any |= !vals.is_empty();
        let pw = (WIDTH - 170.0) / 2.0;
        let panel = Panel {
            left: 80.0 + i as f64 * (pw + 80.0),
            top: 40.0,
            width: pw,
            height: HEIGHT - 100.0,
            x: Axis::fixed(0.5, 3.5),
            y: Axis::log(vals.iter().map(|p| p.1)),
            categories: PolyDegree::ALL.iter().map(|d| (d.order() as f64, degree_label(*d))).collect(),
        };
        panel.frame(
            &mut svg,
            "readout",
            if metric == Metric::Mce { "MCE" } else { "KLD" },
        );
        let top = 10f64.powf(panel.y.hi);
        for (j, (r, v)) in vals.iter().enumerate() {
            let rank = vals[..j].iter().filter(|(o, _)| o.degree == r.degree).count();
            let size = vals.iter().filter(|(o, _)| o.degree == r.degree).count().max(2);
            let x = r.degree.order() as f64 + (rank as f64 / (size - 1) as f64 - 0.5) * 0.3;
            let color = degree_color(r.degree);
            if v.is_finite() {
                panel.marker(&mut svg, x, *v, color, true);
            } else {
                panel.marker(&mut svg, x, top, color, false);
            }
        }
        for d in &degrees {
            let cell: Vec<f64> = vals.iter().filter(|(r, _)| r.degree == *d).map(|p| p.1).collect();
            if cell.is_empty() {
                continue;
            }
            let m = median(&cell).min(top);
            let x = d.order() as f64;
            panel.polyline(&mut svg, [(x - 0.25, m), (x + 0.25, m)].into_iter(), "black", false);
        }
    }
    if !any {
        return Err(HarnessError::PlotMismatch {
            kind: "metric_scatter",
            data: "rows without mce or kld values",
        });
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">bars: median; hollow markers at the top: diverged runs</text>"#,
        WIDTH / 2.0,
        HEIGHT - 8.0
    );
    Ok(document(title, &svg))
}

fn timeseries(target: &Trajectory, prediction: &Trajectory, title: &str) -> Result<String> {
    if target.is_empty() {
        return Err(HarnessError::Empty("time series"));
    }
    let dim = target.dim().min(prediction.dim().max(1));
    let names = ["x", "y", "z"];
    let gap = 20.0;
    let ph = (HEIGHT - 60.0 - 40.0 - gap * (dim as f64 - 1.0)) / dim as f64;
    let tau = target.tau();
    let mut svg = String::new();
    for c in 0..dim {
        let tv = target.component(c);
        let pv = if prediction.dim() > c { prediction.component(c) } else { Vec::new() };
        let panel = Panel {
            left: 80.0,
            top: 40.0 + c as f64 * (ph + gap),
            width: WIDTH - 110.0,
            height: ph,
            x: Axis::fixed(0.0, (target.len().max(prediction.len()).max(2) - 1) as f64 * tau),
            y: Axis::linear(tv.iter().chain(pv.iter()).copied()),
            categories: Vec::new(),
        };
        panel.frame(
            &mut svg,
            if c + 1 == dim { "t" } else { "" },
            names.get(c).copied().unwrap_or("component"),
        );
        panel.polyline(&mut svg, tv.iter().enumerate().map(|(i, v)| (i as f64 * tau, *v)), GREY, true);
        panel.polyline(&mut svg, pv.iter().enumerate().map(|(i, v)| (i as f64 * tau, *v)), RED, false);
    }
    legend(
        &mut svg,
        WIDTH - 120.0,
        30.0,
        &[("target", GREY, true), ("prediction", RED, false)],
    );
    Ok(document(title, &svg))
}

/// Blue (small) to red (large) on `[0, 1]`.
fn heat(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t).round() as u8;
    let g = (64.0 + 96.0 * (1.0 - (2.0 * t - 1.0).abs())).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn phase_xz(orbit: &Trajectory, errors: &[f64], title: &str) -> Result<String> {
    if orbit.is_empty() {
        return Err(HarnessError::Empty("orbit"));
    }
    if orbit.dim() < 3 || errors.len() != orbit.len() {
        return Err(HarnessError::PlotMismatch {
            kind: "phase_xz",
            data: "an orbit whose errors do not match its length or that has fewer than 3 components",
        });
    }
    let xs = orbit.component(0);
    let zs = orbit.component(2);
    let panel = Panel {
        left: 80.0,
        top: 40.0,
        width: WIDTH - 190.0,
        height: HEIGHT - 100.0,
        x: Axis::linear(xs.iter().copied()),
        y: Axis::linear(zs.iter().copied()),
        categories: Vec::new(),
    };
    let logs: Vec<f64> = errors.iter().map(|e| e.max(1e-300).log10()).collect();
    let (lo, hi) = bounds(logs.iter().copied());
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let mut svg = String::new();
    panel.frame(&mut svg, "x", "z");
    for ((x, z), l) in xs.iter().zip(&zs).zip(&logs) {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.6" fill="{}"/>"#,
            panel.px(*x),
            panel.py(*z),
            heat((l - lo) / (hi - lo))
        );
    }
    // Color bar.
    let (bx, by, bh) = (WIDTH - 90.0, 40.0, HEIGHT - 100.0);
    for k in 0..50 {
        let t = k as f64 / 49.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{bx:.2}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            by + (1.0 - t) * bh - bh / 50.0,
            bh / 50.0 + 0.5,
            heat(t)
        );
    }
    for (v, y) in [(hi, by + 4.0), (lo, by + bh)] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{y:.2}" font-size="11">{}</text>"#,
            bx + 20.0,
            xml_escape(&format!("{:.1e}", 10f64.powf(v)))
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">conjugacy error</text>"#,
        bx + 8.0,
        by + bh + 20.0
    );
    Ok(document(title, &svg))
}

fn pdf_overlay(reference: &Histogram, model: Option<&Histogram>, title: &str) -> Result<String> {
    if let Some(q) = model {
        if q.n_bins() != reference.n_bins() || q.lo() != reference.lo() || q.hi() != reference.hi() {
            return Err(HarnessError::PlotMismatch {
                kind: "pdf_overlay",
                data: "densities with different binning",
            });
        }
    }
    let p = reference.density();
    let q = model.map(Histogram::density);
    let panel = Panel {
        left: 80.0,
        top: 40.0,
        width: WIDTH - 110.0,
        height: HEIGHT - 100.0,
        x: Axis::fixed(reference.lo(), reference.hi()),
        y: Axis::linear(p.iter().chain(q.iter().flatten()).copied().chain([0.0])),
        categories: Vec::new(),
    };
    let mut svg = String::new();
    panel.frame(&mut svg, "x", "density");
    let centers = |d: &[f64]| -> Vec<(f64, f64)> {
        d.iter().enumerate().map(|(i, v)| (reference.bin_center(i), *v)).collect()
    };
    if let Some(q) = &q {
        panel.polyline(&mut svg, centers(q).into_iter(), RED, false);
    }
    panel.polyline(&mut svg, centers(&p).into_iter(), "black", true);
    let mut entries = vec![("target p(x)", "black", true)];
    if q.is_some() {
        entries.push(("model q(x)", RED, false));
    }
    legend(&mut svg, panel.left + panel.width - 110.0, panel.top + 16.0, &entries);
    Ok(document(title, &svg))
}

/// Renders `data` as `kind`. Combinations that do not fit are rejected.
pub fn render_plot(kind: PlotKind, data: PlotData<'_>, title: &str) -> Result<String> {
    match (kind, data) {
        (PlotKind::RmseVsN | PlotKind::MetricScatter, PlotData::Rows([])) => {
            Err(HarnessError::Empty("result rows"))
        }
        (PlotKind::RmseVsN, PlotData::Rows(rows)) => rmse_vs_n(rows, title),
        (PlotKind::MetricScatter, PlotData::Rows(rows)) => metric_scatter(rows, title),
        (PlotKind::Timeseries, PlotData::Series { target, prediction }) => timeseries(target, prediction, title),
        (PlotKind::PhaseXz, PlotData::Orbit { orbit, errors }) => phase_xz(orbit, errors, title),
        (PlotKind::PdfOverlay, PlotData::Densities { reference, model }) => pdf_overlay(reference, model, title),
        (kind, data) => Err(HarnessError::PlotMismatch {
            kind: kind.as_str(),
            data: data.name(),
        }),
    }
}

/// Renders and writes an SVG file.
pub fn emit_plot(kind: PlotKind, data: PlotData<'_>, title: &str, path: &Path) -> Result<()> {
    let svg = render_plot(kind, data, title)?;
    fs::write(path, svg).map_err(|e| HarnessError::io(path, e))
}
