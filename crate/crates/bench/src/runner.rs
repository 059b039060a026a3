//! Runs configured experiments and writes their CSV reports.

use std::fs;
use std::path::Path;
use std::time::Instant;

use pnk_core::baselines::{galerkin_riccati_solve, inexact_newton_fresh, BaselineReport};
use pnk_core::krylov::SpaceKind;
use pnk_core::pnk::{pnk_solve, PnkConfig, SolveReport};
use pnk_core::LowRankFactor;

use crate::config::{build_problem, ExperimentConfig, Method, Problem};
use crate::mm::fmt_g17;
use crate::Result;

pub const SUMMARY_HEADER: [&str; 7] = [
    "method",
    "newton_steps",
    "basis_dim",
    "memory_vectors",
    "rank",
    "rel_res",
    "seconds",
];
pub const HISTORY_HEADER: [&str; 6] = ["m", "k", "rel_res", "inner_res", "eta", "lambda"];

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub newton_steps: usize,
    pub basis_dim: usize,
    pub memory_vectors: usize,
    pub rank: usize,
    pub rel_res: f64,
    pub seconds: f64,
}

/// One row of `history.csv`; absent quantities are written as empty fields.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    pub m: usize,
    pub k: usize,
    pub rel_res: f64,
    pub inner_res: Option<f64>,
    pub eta: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum MethodReport {
    Pnk(SolveReport),
    Baseline(BaselineReport),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: SummaryRow,
    pub history: Vec<HistoryRecord>,
    pub factor: LowRankFactor,
    pub report: MethodReport,
    pub converged: bool,
}

fn pnk_history(r: &SolveReport) -> Vec<HistoryRecord> {
    r.history
        .iter()
        .map(|h| HistoryRecord {
            m: h.m,
            k: h.k,
            rel_res: h.rel_res,
            inner_res: Some(h.inner_res),
            eta: Some(h.eta),
            lambda: h.lambda,
        })
        .collect()
}

fn galerkin_history(r: &BaselineReport) -> Vec<HistoryRecord> {
    r.residuals
        .iter()
        .enumerate()
        .map(|(i, &res)| HistoryRecord {
            m: i + 1,
            k: 0,
            rel_res: res,
            inner_res: None,
            eta: None,
            lambda: None,
        })
        .collect()
}

fn fresh_history(r: &BaselineReport) -> Vec<HistoryRecord> {
    r.steps
        .iter()
        .enumerate()
        .map(|(k, s)| HistoryRecord {
            m: s.iterations,
            k: k + 1,
            rel_res: s.rel_res,
            inner_res: Some(s.inner_res),
            eta: Some(s.eta),
            lambda: Some(s.lambda),
        })
        .collect()
}

/// Solves `problem` with `method`.
pub fn run_problem(problem: &Problem, method: Method, cfg: &PnkConfig) -> Result<RunOutcome> {
    let Problem { a, b, c } = problem;
    let start = Instant::now();
    let (factor, report, history, newton_steps, basis_dim, memory, rel_res, converged) = match method {
        Method::PnkEk | Method::PnkRk => {
            let kind = if method == Method::PnkEk {
                SpaceKind::Extended
            } else {
                SpaceKind::Rational
            };
            let cfg = PnkConfig { kind, ..cfg.clone() };
            let (p, r) = pnk_solve(a, b, c, None, &cfg)?;
            let h = pnk_history(&r);
            let (k, d, mem, res, conv) = (r.newton_steps, r.basis_dim, r.memory_vectors, r.rel_res, r.converged);
            (p, MethodReport::Pnk(r), h, k, d, mem, res, conv)
        }
        Method::Eksm | Method::Rksm => {
            let kind = if method == Method::Eksm {
                SpaceKind::Extended
            } else {
                SpaceKind::Rational
            };
            let (p, r) = galerkin_riccati_solve(a, b, c, kind, cfg)?;
            let h = galerkin_history(&r);
            let (d, mem, res, conv) = (r.basis_dim, r.memory_vectors, r.rel_res, r.converged);
            (p, MethodReport::Baseline(r), h, 0, d, mem, res, conv)
        }
        Method::InkFresh => {
            let (p, r) = inexact_newton_fresh(a, b, c, cfg)?;
            let h = fresh_history(&r);
            let (k, d, mem, res, conv) = (r.newton_steps, r.basis_dim, r.memory_vectors, r.rel_res, r.converged);
            (p, MethodReport::Baseline(r), h, k, d, mem, res, conv)
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let summary = SummaryRow {
        method,
        newton_steps,
        basis_dim,
        memory_vectors: memory,
        rank: factor.rank(),
        rel_res,
        seconds,
    };
    Ok(RunOutcome {
        summary,
        history,
        factor,
        report,
        converged,
    })
}

/// Builds the problem, solves it and writes `summary.csv` and `history.csv`
/// into `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let problem = build_problem(&cfg.problem, cfg.seed)?;
    let outcome = run_problem(&problem, cfg.method, &cfg.pnk_config())?;
    fs::create_dir_all(&cfg.out_dir)?;
    write_summary(&cfg.out_dir.join("summary.csv"), std::slice::from_ref(&outcome.summary))?;
    write_history(&cfg.out_dir.join("history.csv"), &outcome.history)?;
    Ok(outcome)
}

pub fn summary_fields(row: &SummaryRow) -> [String; 7] {
    [
        row.method.name().to_string(),
        row.newton_steps.to_string(),
        row.basis_dim.to_string(),
        row.memory_vectors.to_string(),
        row.rank.to_string(),
        fmt_g17(row.rel_res),
        fmt_g17(row.seconds),
    ]
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for row in rows {
        w.write_record(summary_fields(row))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_history(path: &Path, rows: &[HistoryRecord]) -> Result<()> {
    let opt = |v: Option<f64>| v.map(fmt_g17).unwrap_or_default();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HISTORY_HEADER)?;
    for r in rows {
        w.write_record([
            r.m.to_string(),
            r.k.to_string(),
            fmt_g17(r.rel_res),
            opt(r.inner_res),
            opt(r.eta),
            opt(r.lambda),
        ])?;
    }
    w.flush()?;
    Ok(())
}
