//! Series files and report output.
//!
//! A series file is either one observation per line or a CSV with header
//! `t,x`. Blank lines and lines starting with `#` are skipped.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{ArchError, Result};
use crate::model::Series;
use crate::scalar::Scalar;

pub fn parse_series<T: Scalar>(text: &str) -> Result<Series<T>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .peekable();
    let csv = match lines.peek() {
        Some((_, first)) if first.contains(',') => {
            let cols: Vec<&str> = first.split(',').map(str::trim).collect();
            if cols != ["t", "x"] {
                return Err(ArchError::Parse(format!("expected CSV header `t,x`, found `{first}`")));
            }
            lines.next();
            true
        }
        Some(_) => false,
        None => return Err(ArchError::Parse("series input is empty".into())),
    };
    let mut x = Vec::new();
    for (lineno, line) in lines {
        let field = if csv {
            let mut parts = line.split(',');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(_), Some(v), None) => v.trim(),
                _ => return Err(ArchError::Parse(format!("line {lineno}: expected two CSV fields"))),
            }
        } else {
            line
        };
        let v: f64 =
            field.parse().map_err(|e| ArchError::Parse(format!("line {lineno}: cannot parse {field:?}: {e}")))?;
        x.push(T::lit(v));
    }
    if x.is_empty() {
        return Err(ArchError::Parse("series input has no observations".into()));
    }
    Series::new(x)
}

pub fn read_series<T: Scalar>(path: &Path) -> Result<Series<T>> {
    parse_series(&fs::read_to_string(path)?)
}

/// CSV text with header `t,x` and `t` counted from 1.
pub fn series_to_csv<T: Scalar>(series: &Series<T>) -> String {
    let mut out = String::from("t,x\n");
    for (t, x) in series.x().iter().enumerate() {
        out.push_str(&format!("{},{}\n", t + 1, x));
    }
    out
}

pub fn write_series<T: Scalar>(path: &Path, series: &Series<T>) -> Result<()> {
    write_text(path, &series_to_csv(series))
}

pub fn to_json<V: Serialize + ?Sized>(value: &V) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| ArchError::Parse(format!("JSON encoding failed: {e}")))
}

/// Writes to `path`, or to standard output when `path` is `None` or `-`.
pub fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) if p != Path::new("-") => write_text(p, text),
        _ => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}
