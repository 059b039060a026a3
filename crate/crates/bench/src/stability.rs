//! Closed-loop stability along a Newton run.

use std::path::Path;

use pnk_core::dense::{self, DenseBlock};
use pnk_core::pnk::SolveReport;
use pnk_core::sparse::SparseOperator;

use crate::mm::fmt_g17;
use crate::{BenchError, Result};

pub const DEFAULT_NMAX: usize = 2000;

/// Real parts of the eigenvalues of `A − X_kBBᵀ` for each `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Sorted in decreasing order; one vector per iterate.
    pub real_parts: Vec<Vec<f64>>,
    /// Spectral abscissa per iterate.
    pub abscissae: Vec<f64>,
}

/// Evaluates `A − S_kS_kᵀBBᵀ` for each factor `S_k` densely.
///
/// Pass an `n × 0` factor for `X_0 = 0`.
pub fn stability_report(
    a: &SparseOperator,
    b: &DenseBlock,
    factors: &[DenseBlock],
    nmax: usize,
) -> Result<StabilityReport> {
    let n = a.n();
    if n > nmax {
        return Err(BenchError::TooLarge { n, nmax });
    }
    if b.nrows() != n || factors.iter().any(|s| s.nrows() != n) {
        return Err(BenchError::Config("factors and B must have n rows".into()));
    }
    let ad = a.to_dense();
    let mut out = StabilityReport {
        real_parts: Vec::new(),
        abscissae: Vec::new(),
    };
    for s in factors {
        let closed = &ad - s * (s.tr_mul(b) * b.transpose());
        let mut re: Vec<f64> = dense::eigenvalues(&closed)?.iter().map(|z| z.re).collect();
        re.sort_by(|x, y| y.total_cmp(x));
        out.abscissae.push(re.first().copied().unwrap_or(f64::NEG_INFINITY));
        out.real_parts.push(re);
    }
    Ok(out)
}

/// Factors `S_k` of the accepted iterates of a run with recorded iterates,
/// `X_0 = 0` first.
pub fn iterate_factors(report: &SolveReport, n: usize) -> Result<Vec<DenseBlock>> {
    let basis = report
        .basis
        .as_ref()
        .ok_or_else(|| BenchError::Config("the run did not record its iterates".into()))?;
    let mut out = Vec::with_capacity(report.iterates.len());
    for it in &report.iterates {
        let r = it.y_factor.nrows();
        if r == 0 {
            out.push(DenseBlock::zeros(n, 0));
        } else {
            out.push(basis.columns(0, r) * &it.y_factor);
        }
    }
    Ok(out)
}

/// Wide CSV: column `k<j>` holds the sorted real parts for iterate `j`.
pub fn write_closed_loop_csv(path: &Path, report: &StabilityReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..report.real_parts.len()).map(|k| format!("k{k}")))?;
    let rows = report.real_parts.iter().map(Vec::len).max().unwrap_or(0);
    for i in 0..rows {
        w.write_record(
            report
                .real_parts
                .iter()
                .map(|col| col.get(i).map(|&v| fmt_g17(v)).unwrap_or_default()),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Rightmost real part of the projected closed loop at every inner
/// iteration, raw and divided by `‖A‖₁`.
pub fn write_projected_csv(path: &Path, report: &SolveReport, a_norm1: f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "m", "rightmost_re", "scaled"])?;
    for h in &report.history {
        w.write_record([
            h.k.to_string(),
            h.m.to_string(),
            fmt_g17(h.proj_abscissa),
            fmt_g17(h.proj_abscissa / a_norm1),
        ])?;
    }
    w.flush()?;
    Ok(())
}
