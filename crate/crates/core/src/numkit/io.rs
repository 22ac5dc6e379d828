//! Plain-text matrix format: a `rows cols` header line, then one row per
//! line with entries separated by single spaces.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Matrix, Vector};

pub fn format_matrix(m: &Matrix) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header token {t:?}"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("header must be `rows cols`, got {header:?}")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        let before = data.len();
        for token in line.split(' ').filter(|t| !t.is_empty()) {
            let x: f64 = token
                .parse()
                .map_err(|_| Error::Parse(format!("row {i}: bad entry {token:?}")))?;
            if !x.is_finite() {
                return Err(Error::Parse(format!("row {i}: non-finite entry")));
            }
            data.push(x);
        }
        if data.len() - before != cols {
            return Err(Error::Parse(format!(
                "row {i} has {} entries, expected {cols}",
                data.len() - before
            )));
        }
    }
    if data.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {rows} rows, found {}",
            data.len() / cols.max(1)
        )));
    }
    Matrix::from_vec(rows, cols, data)
}

/// Vectors are stored as `n x 1` column matrices.
pub fn format_vector(v: &Vector) -> String {
    format_matrix(&vector_as_column(v))
}

pub fn parse_vector(text: &str) -> Result<Vector> {
    let m = parse_matrix(text)?;
    if m.cols() != 1 {
        return Err(Error::Parse(format!("vector file has {} columns", m.cols())));
    }
    Ok(Vector::from(m.as_slice()))
}

pub fn vector_as_column(v: &Vector) -> Matrix {
    Matrix::from_vec(v.len(), 1, v.to_vec()).expect("vector must be nonempty")
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    std::fs::write(path, format_matrix(m))?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    parse_matrix(&std::fs::read_to_string(path)?)
}
