//! Plain-text vector and matrix files.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so
//! reading a written file gives back the same bits.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn number(token: &str, line: usize) -> Result<f64, ParseError> {
    let v: f64 = token
        .trim()
        .parse()
        .map_err(|_| ParseError { line, message: format!("not a number: `{}`", token.trim()) })?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ParseError { line, message: format!("non-finite value `{}`", token.trim()) })
    }
}

fn content(raw: &str) -> &str {
    raw.split('#').next().unwrap_or("").trim()
}

/// One number per line; blank lines and `#` comments are ignored.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, ParseError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let c = content(raw);
        if !c.is_empty() {
            out.push(number(c, k + 1)?);
        }
    }
    Ok(out)
}

pub fn write_vector(v: &[f64]) -> String {
    let mut out = String::with_capacity(v.len() * 20);
    for x in v {
        writeln!(out, "{x}").expect("writing to a string");
    }
    out
}

/// Comma-separated rows without a header; every row must have the same length.
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>, ParseError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let c = content(raw);
        if c.is_empty() {
            continue;
        }
        let row = c.split(',').map(|t| number(t, k + 1)).collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(ParseError {
                    line: k + 1,
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(ParseError { line: 0, message: "empty matrix".into() });
    }
    Ok(rows)
}

pub fn write_matrix<R: AsRef<[f64]>>(rows: &[R]) -> String {
    let mut out = String::new();
    for row in rows {
        let mut first = true;
        for x in row.as_ref() {
            if !first {
                out.push(',');
            }
            write!(out, "{x}").expect("writing to a string");
            first = false;
        }
        out.push('\n');
    }
    out
}
