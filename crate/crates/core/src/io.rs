//! Plain-text matrix and vector files.
//!
//! Matrix: first line `m n`, then `m` lines of `n` whitespace-separated
//! numbers. Vector: first line `n`, then `n` numbers (one per line on
//! output, any whitespace on input). Lines starting with `#` and blank lines
//! are ignored. Values are written with 17 significant digits so a write
//! followed by a read is exact.

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::numerics::{DenseMatrix, NumericsError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, IoError>;

fn parse_err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        message: message.into(),
    }
}

/// Non-comment lines paired with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_number<T: std::str::FromStr>(token: &str, line: usize) -> Result<T> {
    token
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse '{token}'")))
}

fn parse_value(token: &str, line: usize) -> Result<f64> {
    let v: f64 = parse_number(token, line)?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value '{token}'")));
    }
    Ok(v)
}

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_matrix(a: &DenseMatrix) -> String {
    let mut out = format!("{} {}\n", a.rows(), a.cols());
    for row in a.data().chunks(a.cols()) {
        let line: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<DenseMatrix> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing `m n` header"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(parse_err(hline, "header must be `m n`"));
    }
    let rows: usize = parse_number(dims[0], hline)?;
    let cols: usize = parse_number(dims[1], hline)?;
    if rows == 0 || cols == 0 {
        return Err(parse_err(hline, "dimensions must be positive"));
    }
    let mut data = Vec::with_capacity(rows * cols);
    let mut last_line = hline;
    for r in 0..rows {
        let (lno, line) = lines
            .next()
            .ok_or_else(|| parse_err(last_line + 1, format!("expected {rows} rows, got {r}")))?;
        last_line = lno;
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(parse_value(tok, lno)?);
        }
        let got = data.len() - before;
        if got != cols {
            return Err(parse_err(lno, format!("expected {cols} values, got {got}")));
        }
    }
    if let Some((lno, _)) = lines.next() {
        return Err(parse_err(lno, "unexpected trailing data"));
    }
    Ok(DenseMatrix::new(rows, cols, data)?)
}

pub fn format_vector(v: &[f64]) -> String {
    let mut out = format!("{}\n", v.len());
    for x in v {
        out.push_str(&format_value(*x));
        out.push('\n');
    }
    out
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing length header"))?;
    let len: usize = parse_number(header, hline)?;
    let mut out = Vec::with_capacity(len);
    let mut last = hline;
    for (lno, line) in lines {
        last = lno;
        for tok in line.split_whitespace() {
            if out.len() == len {
                return Err(parse_err(lno, format!("more than {len} values")));
            }
            out.push(parse_value(tok, lno)?);
        }
    }
    if out.len() != len {
        return Err(parse_err(
            last,
            format!("expected {len} values, got {}", out.len()),
        ));
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    parse_matrix(&read(path)?)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    parse_vector(&read(path)?)
}

/// Writes via a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let file_err = |source| IoError::File {
        path: path.display().to_string(),
        source,
    };
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(file_err)?;
    tmp.write_all(contents).map_err(file_err)?;
    tmp.persist(path).map_err(|e| file_err(e.error))?;
    Ok(())
}

pub fn write_matrix(path: &Path, a: &DenseMatrix) -> Result<()> {
    write_atomic(path, format_matrix(a).as_bytes())
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    write_atomic(path, format_vector(v).as_bytes())
}

/// SHA-256 of the 17-digit text serialization, hex encoded.
pub fn matrix_digest(a: &DenseMatrix) -> String {
    Sha256::digest(format_matrix(a).as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
