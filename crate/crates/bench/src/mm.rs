//! Matrix Market exchange format.
//!
//! Reads `coordinate` and `array` files with `real` or `integer` fields
//! and `general`, `symmetric` or `skew-symmetric` storage. Writes
//! `coordinate real general` for sparse and `array real general` for dense
//! matrices, with 17 significant digits so values round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pnk_core::dense::DenseBlock;
use pnk_core::sparse::SparseOperator;

use crate::{BenchError, Result};

/// Contents of a Matrix Market file.
#[derive(Debug, Clone)]
pub enum MmMatrix {
    Sparse(SparseOperator),
    Dense(DenseBlock),
}

impl MmMatrix {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            MmMatrix::Sparse(a) => (a.n(), a.n()),
            MmMatrix::Dense(m) => m.shape(),
        }
    }

    pub fn into_sparse(self) -> Result<SparseOperator> {
        match self {
            MmMatrix::Sparse(a) => Ok(a),
            MmMatrix::Dense(m) => Ok(SparseOperator::from_dense(&m)?),
        }
    }

    pub fn into_dense(self) -> DenseBlock {
        match self {
            MmMatrix::Sparse(a) => a.to_dense(),
            MmMatrix::Dense(m) => m,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

fn bad(line: usize, msg: impl Into<String>) -> BenchError {
    BenchError::MatrixMarket { line, msg: msg.into() }
}

/// Formats like C's `%.17g`.
pub fn fmt_g17(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mant = strip_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (16 - exp) as usize, v)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Parses Matrix Market text.
pub fn parse_matrix_market(text: &str) -> Result<MmMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(bad(1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let coordinate = match tokens[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(bad(1, format!("unknown format '{other}'"))),
    };
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(bad(1, format!("field '{other}' is not real"))),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        other => return Err(bad(1, format!("unsupported symmetry '{other}'"))),
    };
    let mut body = lines.filter(|(_, l)| {
        let t = l.trim_start();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = body.next().ok_or_else(|| bad(2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(size_line, format!("bad size '{t}'"))))
        .collect::<Result<_>>()?;
    let number = |line: usize, t: &str| t.parse::<f64>().map_err(|_| bad(line, format!("bad value '{t}'")));

    if coordinate {
        let [rows, cols, nnz] = dims[..] else {
            return Err(bad(size_line, "coordinate size line needs rows cols nnz"));
        };
        if symmetry != Symmetry::General && rows != cols {
            return Err(bad(size_line, "symmetric storage needs a square matrix"));
        }
        let mut trip = Vec::with_capacity(if symmetry == Symmetry::General { nnz } else { 2 * nnz });
        for _ in 0..nnz {
            let (ln, l) = body.next().ok_or_else(|| bad(0, format!("expected {nnz} entries")))?;
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 3 {
                return Err(bad(ln, "entry needs row col value"));
            }
            let i: usize = t[0].parse().map_err(|_| bad(ln, "bad row index"))?;
            let j: usize = t[1].parse().map_err(|_| bad(ln, "bad column index"))?;
            if i == 0 || j == 0 || i > rows || j > cols {
                return Err(bad(ln, format!("index ({i}, {j}) out of range")));
            }
            let v = number(ln, t[2])?;
            trip.push((i - 1, j - 1, v));
            if i != j {
                match symmetry {
                    Symmetry::General => {}
                    Symmetry::Symmetric => trip.push((j - 1, i - 1, v)),
                    Symmetry::Skew => trip.push((j - 1, i - 1, -v)),
                }
            }
        }
        if let Some((ln, _)) = body.next() {
            return Err(bad(ln, "more entries than declared"));
        }
        if rows == cols {
            Ok(MmMatrix::Sparse(SparseOperator::from_triplets(rows, &trip)?))
        } else {
            let mut m = DenseBlock::zeros(rows, cols);
            for (i, j, v) in trip {
                m[(i, j)] += v;
            }
            Ok(MmMatrix::Dense(m))
        }
    } else {
        let [rows, cols] = dims[..] else {
            return Err(bad(size_line, "array size line needs rows cols"));
        };
        if symmetry != Symmetry::General && rows != cols {
            return Err(bad(size_line, "symmetric storage needs a square matrix"));
        }
        let mut m = DenseBlock::zeros(rows, cols);
        for j in 0..cols {
            let start = if symmetry == Symmetry::General { 0 } else { j };
            for i in start..rows {
                if symmetry == Symmetry::Skew && i == j {
                    continue;
                }
                let (ln, l) = body.next().ok_or_else(|| bad(0, "too few array entries"))?;
                let v = number(ln, l.trim())?;
                m[(i, j)] = v;
                match symmetry {
                    Symmetry::General => {}
                    Symmetry::Symmetric => m[(j, i)] = v,
                    Symmetry::Skew => m[(j, i)] = -v,
                }
            }
        }
        if let Some((ln, _)) = body.next() {
            return Err(bad(ln, "more entries than declared"));
        }
        Ok(MmMatrix::Dense(m))
    }
}

pub fn load_matrix_market(path: &Path) -> Result<MmMatrix> {
    let text = fs::read_to_string(path)?;
    parse_matrix_market(&text)
}

pub fn sparse_to_string(a: &SparseOperator) -> String {
    let mut out = String::with_capacity(32 * a.nnz() + 64);
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", a.n(), a.n(), a.nnz());
    for (i, j, v) in a.triplets() {
        let _ = writeln!(out, "{} {} {}", i + 1, j + 1, fmt_g17(v));
    }
    out
}

pub fn dense_to_string(m: &DenseBlock) -> String {
    let mut out = String::with_capacity(24 * m.len() + 64);
    out.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for v in m.iter() {
        out.push_str(&fmt_g17(*v));
        out.push('\n');
    }
    out
}

pub fn write_sparse(path: &Path, a: &SparseOperator) -> Result<()> {
    Ok(fs::write(path, sparse_to_string(a))?)
}

pub fn write_dense(path: &Path, m: &DenseBlock) -> Result<()> {
    Ok(fs::write(path, dense_to_string(m))?)
}
