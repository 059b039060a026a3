//! JSON experiment configuration.

use std::fs;
use std::path::{Path, PathBuf};

use pnk_core::dense::{DenseBlock, C64};
use pnk_core::krylov::SpaceKind;
use pnk_core::pnk::{ForcingMode, PnkConfig, StabilizationMode};
use pnk_core::sparse::SparseOperator;
use serde::{Deserialize, Serialize};

use crate::gen::{gen_laplacian3d, gen_scaled_random, gen_synthetic_nonsymmetric, shift_to_negdef};
use crate::mm::load_matrix_market;
use crate::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    PnkEk,
    PnkRk,
    Eksm,
    Rksm,
    InkFresh,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::PnkEk => "pnk_ek",
            Method::PnkRk => "pnk_rk",
            Method::Eksm => "eksm",
            Method::Rksm => "rksm",
            Method::InkFresh => "ink_fresh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    #[default]
    Superlinear,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabMode {
    #[default]
    None,
    Kernel,
    Definite,
}

/// Matrix files for a `files` problem. Missing `b`/`c` are drawn at random.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemPaths {
    pub a: PathBuf,
    #[serde(default)]
    pub b: Option<PathBuf>,
    #[serde(default)]
    pub c: Option<PathBuf>,
    /// Replace the loaded `T` by `−T − (λ̄ + 1)I`.
    #[serde(default)]
    pub shift_to_negdef: bool,
}

fn one() -> usize {
    1
}

/// Problem specification. `p` and `q` are the column counts of `B` and `Cᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// 3D Laplacian with `n = n0³`; `B`, `C` uniform scaled by `1/(n0 − 1)²`.
    Laplacian3d {
        n0: usize,
        #[serde(default = "one")]
        p: usize,
        #[serde(default = "one")]
        q: usize,
        /// Use `Cᵀ = B`.
        #[serde(default)]
        c_equals_bt: bool,
    },
    /// Nonsymmetric negative definite grid operator with `n = n0²`.
    Synthetic {
        n0: usize,
        #[serde(default = "one")]
        p: usize,
        #[serde(default = "one")]
        q: usize,
    },
    Files {
        paths: ProblemPaths,
        #[serde(default = "one")]
        p: usize,
        #[serde(default = "one")]
        q: usize,
    },
}

fn default_eta_bar() -> f64 {
    0.9
}
fn default_alpha() -> f64 {
    0.01
}
fn default_m_max() -> usize {
    100
}
fn default_defl_tol() -> f64 {
    pnk_core::krylov::DEFAULT_DEFLATION_TOL
}

/// One experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub method: Method,
    pub eps: f64,
    #[serde(default)]
    pub eta_mode: EtaMode,
    #[serde(default = "default_eta_bar")]
    pub eta_bar: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub d: usize,
    #[serde(default = "default_m_max")]
    pub m_max: usize,
    #[serde(default = "default_defl_tol")]
    pub defl_tol: f64,
    #[serde(default)]
    pub trunc_tol: Option<f64>,
    #[serde(default)]
    pub stab_mode: StabMode,
    #[serde(default)]
    pub seed: u64,
    /// Bounds for rational shifts as `[[re, im], [re, im]]`.
    #[serde(default)]
    pub s0: Option<[[f64; 2]; 2]>,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.out_dir);
        if let ProblemSpec::Files { paths, .. } = &mut cfg.problem {
            fix(&mut paths.a);
            paths.b.iter_mut().for_each(fix);
            paths.c.iter_mut().for_each(fix);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.pnk_config().validate()?;
        let (p, q) = match &self.problem {
            ProblemSpec::Laplacian3d { n0, p, q, .. } | ProblemSpec::Synthetic { n0, p, q } => {
                if *n0 < 2 {
                    return Err(BenchError::Config("problem.n0 must be at least 2".into()));
                }
                (*p, *q)
            }
            ProblemSpec::Files { p, q, .. } => (*p, *q),
        };
        if p == 0 || q == 0 {
            return Err(BenchError::Config("problem.p and problem.q must be positive".into()));
        }
        Ok(())
    }

    /// Solver parameters derived from this config.
    pub fn pnk_config(&self) -> PnkConfig {
        PnkConfig {
            kind: match self.method {
                Method::PnkRk | Method::Rksm => SpaceKind::Rational,
                _ => SpaceKind::Extended,
            },
            eps: self.eps,
            forcing: match self.eta_mode {
                EtaMode::Superlinear => ForcingMode::Superlinear,
                EtaMode::Quadratic => ForcingMode::Quadratic,
            },
            eta_bar: self.eta_bar,
            alpha: self.alpha,
            d: self.d,
            m_max: self.m_max,
            defl_tol: self.defl_tol,
            trunc_tol: self.trunc_tol,
            stabilization: match self.stab_mode {
                StabMode::None => None,
                StabMode::Kernel => Some(StabilizationMode::Kernel),
                StabMode::Definite => Some(StabilizationMode::Definite),
            },
            s0: self.s0.map(|[a, b]| [C64::new(a[0], a[1]), C64::new(b[0], b[1])]),
            ..PnkConfig::default()
        }
    }
}

/// Coefficient data of one Riccati equation.
#[derive(Debug, Clone)]
pub struct Problem {
    pub a: SparseOperator,
    pub b: DenseBlock,
    pub c: DenseBlock,
}

/// Builds the problem. `B` is drawn with `seed`, `C` with `seed + 1`.
pub fn build_problem(spec: &ProblemSpec, seed: u64) -> Result<Problem> {
    let random_bc = |n: usize, p: usize, q: usize, scale: f64| {
        (
            gen_scaled_random(n, p, scale, seed),
            gen_scaled_random(n, q, scale, seed.wrapping_add(1)).transpose(),
        )
    };
    match spec {
        ProblemSpec::Laplacian3d { n0, p, q, c_equals_bt } => {
            let a = gen_laplacian3d(*n0)?;
            let scale = 1.0 / ((n0 - 1) * (n0 - 1)) as f64;
            let (b, c) = random_bc(a.n(), *p, *q, scale);
            let c = if *c_equals_bt { b.transpose() } else { c };
            Ok(Problem { a, b, c })
        }
        ProblemSpec::Synthetic { n0, p, q } => {
            let a = gen_synthetic_nonsymmetric(*n0, seed.wrapping_add(2))?;
            let (b, c) = random_bc(a.n(), *p, *q, 1.0);
            Ok(Problem { a, b, c })
        }
        ProblemSpec::Files { paths, p, q } => {
            let mut a = load_matrix_market(&paths.a)?.into_sparse()?;
            if paths.shift_to_negdef {
                a = shift_to_negdef(&a)?;
            }
            let n = a.n();
            let (rb, rc) = random_bc(n, *p, *q, 1.0);
            let b = match &paths.b {
                Some(path) => load_matrix_market(path)?.into_dense(),
                None => rb,
            };
            let c = match &paths.c {
                Some(path) => load_matrix_market(path)?.into_dense(),
                None => rc,
            };
            if b.nrows() != n || c.ncols() != n {
                return Err(BenchError::Config(format!(
                    "B is {}x{} and C is {}x{}, expected n = {n} rows of B and columns of C",
                    b.nrows(),
                    b.ncols(),
                    c.nrows(),
                    c.ncols()
                )));
            }
            Ok(Problem { a, b, c })
        }
    }
}
