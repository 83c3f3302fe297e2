//! CSV result files.
//!
//! Column order is fixed by [`CSV_HEADER`]. Reals are written in scientific
//! notation with 10 significant digits; metrics that were not computed (or
//! are undefined because the run diverged) are left blank. `diverged` is
//! `0` or `1`. Lines end with `\n`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use polyres_core::{PolyDegree, RunMetrics};

use crate::config::{Mode, SystemKind};
use crate::error::{HarnessError, Result};
use crate::experiment::ResultRow;

pub const CSV_COLUMNS: [&str; 11] = [
    "mode",
    "system",
    "n",
    "degree",
    "seed",
    "tau",
    "rmse",
    "mce",
    "kld",
    "valid_time",
    "diverged",
];

pub const CSV_HEADER: &str = "mode,system,n,degree,seed,tau,rmse,mce,kld,valid_time,diverged";

fn real(v: f64) -> String {
    format!("{v:.9e}")
}

fn opt_real(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => real(x),
        _ => String::new(),
    }
}

/// Renders rows as CSV text, header included.
pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.mode.as_str(),
            r.system.as_str(),
            r.n,
            r.degree.order(),
            r.seed,
            real(r.tau),
            opt_real(m.rmse),
            opt_real(m.mce),
            opt_real(m.kld),
            opt_real(m.valid_time),
            u8::from(m.diverged),
        );
    }
    out
}

/// Writes `rows` to `path`, replacing any existing file. Empty input is an
/// error and leaves the file system untouched.
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(HarnessError::Empty("no result rows"));
    }
    fs::write(path, to_csv(rows)).map_err(|e| HarnessError::io(path, e))
}

fn field_err(line: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Csv {
        line,
        message: message.into(),
    }
}

fn parse_opt(line: usize, name: &str, s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| field_err(line, format!("`{name}`: not a number: {s:?}")))
}

fn parse_num<T: std::str::FromStr>(line: usize, name: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| field_err(line, format!("`{name}`: invalid value {s:?}")))
}

/// Parses text produced by [`to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(field_err(1, "missing or unexpected header")),
    }
    let mut rows = Vec::new();
    for (i, l) in lines {
        let line = i + 1;
        if l.is_empty() {
            continue;
        }
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != CSV_COLUMNS.len() {
            return Err(field_err(
                line,
                format!("expected {} fields, found {}", CSV_COLUMNS.len(), f.len()),
            ));
        }
        let mode = match f[0] {
            "open_loop" => Mode::OpenLoop,
            "closed_loop" => Mode::ClosedLoop,
            other => return Err(field_err(line, format!("unknown mode {other:?}"))),
        };
        let system = match f[1] {
            "lorenz" => SystemKind::Lorenz,
            "rossler" => SystemKind::Rossler,
            other => return Err(field_err(line, format!("unknown system {other:?}"))),
        };
        let degree = PolyDegree::try_from(parse_num::<u8>(line, "degree", f[3])?)
            .map_err(|e| field_err(line, e.to_string()))?;
        let diverged = match f[10] {
            "0" => false,
            "1" => true,
            other => return Err(field_err(line, format!("`diverged` must be 0 or 1, got {other:?}"))),
        };
        rows.push(ResultRow {
            mode,
            system,
            n: parse_num(line, "n", f[2])?,
            degree,
            seed: parse_num(line, "seed", f[4])?,
            tau: parse_num(line, "tau", f[5])?,
            metrics: RunMetrics {
                rmse: parse_opt(line, "rmse", f[6])?,
                mce: parse_opt(line, "mce", f[7])?,
                kld: parse_opt(line, "kld", f[8])?,
                valid_time: parse_opt(line, "valid_time", f[9])?,
                diverged,
            },
        });
    }
    Ok(rows)
}

/// Reads and parses a CSV file.
pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, rmse: f64, diverged: bool) -> ResultRow {
        ResultRow {
            mode: Mode::ClosedLoop,
            system: SystemKind::Lorenz,
            n: 10,
            degree: PolyDegree::Quadratic,
            seed,
            tau: 0.02,
            metrics: RunMetrics {
                rmse: Some(rmse),
                mce: (!diverged).then_some(1.25e-3),
                kld: (!diverged).then_some(6.4e-5),
                valid_time: Some(4.5),
                diverged,
            },
        }
    }

    #[test]
    fn header_matches_columns() {
        assert_eq!(CSV_HEADER, CSV_COLUMNS.join(","));
    }

    #[test]
    fn round_trip() {
        let rows = vec![row(0, 0.123456789, false), row(7, 3.5, true)];
        let text = to_csv(&rows);
        assert_eq!(parse_csv(&text).unwrap(), rows);
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn layout() {
        let text = to_csv(&[row(3, 0.5, true)]);
        let line = text.lines().nth(1).unwrap();
        assert_eq!(
            line,
            "closed_loop,lorenz,10,2,3,2.000000000e-2,5.000000000e-1,,,4.500000000e0,1"
        );
    }

    #[test]
    fn ten_significant_digits() {
        assert_eq!(real(std::f64::consts::PI), "3.141592654e0");
    }

    #[test]
    fn empty_rows_create_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        assert!(matches!(emit_csv(&[], &path), Err(HarnessError::Empty(_))));
        assert!(!path.exists());
    }

    #[test]
    fn io_error_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("out.csv");
        let err = emit_csv(&[row(0, 1.0, false)], &path).unwrap_err();
        assert!(err.to_string().contains("missing"));
    }

    #[test]
    fn overwrite_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let rows = [row(1, 2.0, false)];
        emit_csv(&rows, &path).unwrap();
        let first = fs::read(&path).unwrap();
        emit_csv(&rows, &path).unwrap();
        assert_eq!(first, fs::read(&path).unwrap());
    }

    #[test]
    fn rejects_bad_fields() {
        let bad = format!("{CSV_HEADER}\nclosed_loop,lorenz,10,4,0,1e0,,,,,0\n");
        assert!(matches!(parse_csv(&bad), Err(HarnessError::Csv { line: 2, .. })));
        assert!(parse_csv("a,b\n").is_err());
    }
}
