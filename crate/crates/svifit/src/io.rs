//! CSV ingestion and plot-ready curve emission.
//!
//! Smile files are two numeric columns, `x` (log-moneyness) and `v` (total
//! implied variance), comma-delimited, UTF-8, `.` decimal separator, with an
//! optional single header detected by a non-numeric first line. Rows may
//! arrive unordered; duplicates in `x` are rejected. All floats are written
//! with 17 significant digits so a written file reloads bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Smile;

/// Dense evaluation points added to an emitted curve.
const DENSE_POINTS: usize = 400;
/// Margin the dense grid extends past the observed abscissae.
const DENSE_MARGIN: f64 = 0.1;

/// Loads a smile from a two-column CSV file.
pub fn load_smile(path: &Path) -> Result<Smile> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_smile_csv(&content)
}

/// Parses CSV text into a sorted, validated smile.
pub fn parse_smile_csv(content: &str) -> Result<Smile> {
    let mut rows: Vec<(f64, f64)> = Vec::new();
    let mut saw_data = false;
    for (idx, line) in content.lines().enumerate() {
        let row = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split(',');
        let fx = fields.next().unwrap_or("").trim();
        let Some(fv) = fields.next().map(str::trim) else {
            return Err(Error::ParseError {
                row,
                column: 2,
                message: "expected two comma-separated fields".to_string(),
            });
        };
        if fields.next().is_some() {
            return Err(Error::ParseError {
                row,
                column: 3,
                message: "expected exactly two fields".to_string(),
            });
        }
        let x = match fx.parse::<f64>() {
            Ok(x) => x,
            Err(_) if !saw_data && rows.is_empty() => continue, // header row
            Err(_) => {
                return Err(Error::ParseError {
                    row,
                    column: 1,
                    message: format!("'{fx}' is not a number"),
                })
            }
        };
        let v = fv.parse::<f64>().map_err(|_| Error::ParseError {
            row,
            column: 2,
            message: format!("'{fv}' is not a number"),
        })?;
        if !x.is_finite() || !v.is_finite() {
            return Err(Error::ParseError {
                row,
                column: if x.is_finite() { 2 } else { 1 },
                message: "values must be finite".to_string(),
            });
        }
        saw_data = true;
        rows.push((x, v));
    }
    if rows.len() < 3 {
        return Err(Error::TooFewPoints { n: rows.len() });
    }
    Smile::from_unsorted(rows)
}

/// Writes a smile as `x,v` CSV with full-precision floats.
pub fn write_smile_csv(smile: &Smile, path: &Path) -> Result<()> {
    let mut out = String::from("x,v\n");
    for i in 0..smile.len() {
        let (x, v) = smile.point(i);
        let _ = writeln!(out, "{x:.16e},{v:.16e}");
    }
    std::fs::write(path, out.as_bytes()).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Emits a plot-ready curve: the fitted value at every observation abscissa
/// (with the observed value alongside) plus a dense 400-point grid spanning
/// `[min x − 0.1, max x + 0.1]`, merged and sorted by `x`. Dense rows leave
/// the observation column empty.
pub fn emit_curve<F>(fitted: F, observed: &Smile, path: &Path) -> Result<()>
where
    F: Fn(f64) -> Result<f64>,
{
    let lo = observed.xs()[0] - DENSE_MARGIN;
    let hi = observed.xs()[observed.len() - 1] + DENSE_MARGIN;

    // (x, fitted, observed?)
    let mut rows: Vec<(f64, f64, Option<f64>)> = Vec::with_capacity(DENSE_POINTS + observed.len());
    for i in 0..observed.len() {
        let (x, v) = observed.point(i);
        rows.push((x, fitted(x)?, Some(v)));
    }
    for k in 0..DENSE_POINTS {
        let x = lo + (hi - lo) * k as f64 / (DENSE_POINTS - 1) as f64;
        rows.push((x, fitted(x)?, None));
    }
    rows.sort_by(|p, q| p.0.total_cmp(&q.0));

    let mut out = String::from("x,v_fitted,v_observed\n");
    for (x, vf, vo) in rows {
        match vo {
            Some(v) => {
                let _ = writeln!(out, "{x:.16e},{vf:.16e},{v:.16e}");
            }
            None => {
                let _ = writeln!(out, "{x:.16e},{vf:.16e},");
            }
        }
    }
    std::fs::write(path, out.as_bytes()).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}
