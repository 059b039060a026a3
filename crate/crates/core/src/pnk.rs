//! Projected Newton–Kleinman driver.
//!
//! All Newton steps share one growing Krylov space `V_m`. At every
//! iteration the Newton–Kleinman Lyapunov equation of the current iterate
//! is projected onto `V_m` and solved densely; once its residual drops
//! below `η_k‖R(X_k)‖_F` the step is accepted with an exact line search
//! whose coefficients come from projected data only.

mod linesearch;

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

pub use linesearch::{minimize_quartic, LineSearchCoeffs, LineSearchError};

use crate::dense::{self, frob_inner, symmetrize, DenseBlock, DenseError, C64};
use crate::krylov::{
    self, adaptive_shift, ek_expand, ek_init, ek_init_augmented, rk_expand, rk_init, rk_init_augmented, DeflationEvent,
    KrylovBasis, KrylovError, ShiftPool, SpaceKind, SparseSystem, UpdatedSystem,
};
use crate::sparse::SparseOperator;
use crate::LowRankFactor;

/// Failures of the projected Newton–Kleinman solver.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PnkError {
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Krylov(#[from] KrylovError),
    #[error(transparent)]
    Dense(#[from] DenseError),
    #[error("projected Lyapunov solve failed at Newton step {k}, basis iteration {m}: {source}")]
    ProjectedSolve { k: usize, m: usize, source: DenseError },
    #[error("line search failed at Newton step {k}: {source}")]
    LineSearch { k: usize, source: LineSearchError },
}

pub type Result<T> = core::result::Result<T, PnkError>;

/// Schedule for the forcing terms `η_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingMode {
    /// `η_k = 1/(k³ + 1)`.
    Superlinear,
    /// `η_k = min(0.1, 0.9‖R(X_k)‖_F/‖CᵀC‖_F)`.
    Quadratic,
}

/// Which stabilization condition to enforce on the inner residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilizationMode {
    /// `Ker(CᵀC) ⊆ Ker(BBᵀ)`; threshold `σ_min(C)²`.
    Kernel,
    /// `BBᵀ ≤ CᵀC`; threshold `σ_min(B)²`.
    Definite,
}

/// Outer stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// `‖R(X_k)‖_F < ε‖CᵀC‖_F`.
    ScaledByRhs,
    /// `‖R(X_k)‖_F < ε‖R(X_0)‖_F`.
    RelativeToInitial,
}

/// Solver parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PnkConfig {
    pub kind: SpaceKind,
    pub eps: f64,
    pub forcing: ForcingMode,
    pub eta_bar: f64,
    /// Sufficient-decrease constant; only logged.
    pub alpha: f64,
    /// Solve the projected equation every `d` basis iterations.
    pub d: usize,
    pub m_max: usize,
    pub defl_tol: f64,
    /// Relative eigenvalue cut for the returned factor; `ε/10` if unset.
    pub trunc_tol: Option<f64>,
    pub stabilization: Option<StabilizationMode>,
    pub stop_rule: StopRule,
    /// Bounds `s₀⁽¹⁾, s₀⁽²⁾` for adaptive shifts; estimated if unset.
    pub s0: Option<[C64; 2]>,
    pub s0_iterations: usize,
    pub hull_samples: usize,
    /// Keep every accepted projected iterate in the report.
    pub record_iterates: bool,
}

impl Default for PnkConfig {
    fn default() -> Self {
        Self {
            kind: SpaceKind::Extended,
            eps: 1e-8,
            forcing: ForcingMode::Superlinear,
            eta_bar: 0.9,
            alpha: 0.01,
            d: 1,
            m_max: 100,
            defl_tol: krylov::DEFAULT_DEFLATION_TOL,
            trunc_tol: None,
            stabilization: None,
            stop_rule: StopRule::ScaledByRhs,
            s0: None,
            s0_iterations: 20,
            hull_samples: 2000,
            record_iterates: false,
        }
    }
}

impl PnkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(PnkError::Config("eps must lie in (0, 1)"));
        }
        if !(self.eta_bar > 0.0 && self.eta_bar < 1.0) {
            return Err(PnkError::Config("eta_bar must lie in (0, 1)"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0 - self.eta_bar) {
            return Err(PnkError::Config("alpha must lie in (0, 1 - eta_bar)"));
        }
        if self.d == 0 || self.m_max == 0 {
            return Err(PnkError::Config("d and m_max must be positive"));
        }
        if !(self.defl_tol >= 0.0) || self.trunc_tol.is_some_and(|t| !(t >= 0.0)) {
            return Err(PnkError::Config("tolerances must be nonnegative"));
        }
        Ok(())
    }

    fn truncation(&self) -> f64 {
        self.trunc_tol.unwrap_or(self.eps / 10.0)
    }
}

/// `η_k` for the given schedule, clamped to `(0, η̄]`.
///
/// `prev_res` is the scaled residual of the current iterate and only
/// matters for [`ForcingMode::Quadratic`].
pub fn forcing_parameter(k: usize, mode: ForcingMode, prev_res: f64, eta_bar: f64) -> f64 {
    let raw = match mode {
        ForcingMode::Superlinear => {
            let k = k as f64;
            1.0 / (k * k * k + 1.0)
        }
        ForcingMode::Quadratic => 0.1f64.min(0.9 * prev_res),
    };
    raw.min(eta_bar)
}

/// Inner-residual bound that guarantees a stabilizing next iterate.
///
/// Returns the threshold and whether it is zero, in which case the
/// guarantee is vacuous.
pub fn stabilization_threshold(b: &DenseBlock, c: &DenseBlock, mode: StabilizationMode) -> (f64, bool) {
    let m = match mode {
        StabilizationMode::Kernel => c,
        StabilizationMode::Definite => b,
    };
    if m.is_empty() {
        return (0.0, true);
    }
    let sv = m.clone().singular_values();
    let smin = sv.min();
    let thr = smin * smin;
    (thr, !(thr > 0.0))
}

/// `diag(Y, 0)` of order `dim`.
pub fn pad(y: &DenseBlock, dim: usize) -> DenseBlock {
    let mut out = DenseBlock::zeros(dim, dim);
    let k = y.nrows();
    out.view_mut((0, 0), (k, k)).copy_from(y);
    out
}

fn rhs_block(gamma: &DenseBlock, dim: usize) -> DenseBlock {
    let mut out = DenseBlock::zeros(dim, dim);
    let r = gamma.nrows();
    out.view_mut((0, 0), (r, r)).copy_from(&(gamma * gamma.transpose()));
    out
}

/// Projected Newton equation `Q Ỹ + Ỹ Qᵀ = RHS`.
///
/// `Q = T_m − D B_mB_mᵀ` and `RHS = −D B_mB_mᵀ D − E₁γγᵀE₁ᵀ` with
/// `D = diag(Y_k, 0)`.
pub fn assemble_projected_lyapunov(
    t: &DenseBlock,
    b_m: &DenseBlock,
    y_k: &DenseBlock,
    gamma: &DenseBlock,
) -> Result<(DenseBlock, DenseBlock)> {
    let dim = t.nrows();
    if !t.is_square() || b_m.nrows() != dim || y_k.nrows() > dim || !y_k.is_square() || gamma.nrows() > dim {
        return Err(PnkError::Dimension("projected Lyapunov data"));
    }
    let d = pad(y_k, dim);
    let bb = b_m * b_m.transpose();
    let dbb = &d * &bb;
    let q = t - &dbb;
    let mut rhs = -(dbb * &d) - rhs_block(gamma, dim);
    symmetrize(&mut rhs);
    Ok((q, rhs))
}

/// `√2‖Φ Ỹ‖_F` with `Φ = E_{m+1}ᵀT̲_m`, the residual of the projected
/// solution as a solution of the full Lyapunov equation.
pub fn inner_residual_ek(y_tilde: &DenseBlock, boundary: &DenseBlock) -> f64 {
    if boundary.is_empty() {
        return 0.0;
    }
    core::f64::consts::SQRT_2 * (boundary * y_tilde).norm()
}

/// QR data `U = G F` of `U = [V_m Y Θ, Ŵ]` for a rational space.
#[derive(Debug, Clone)]
pub struct ResidualFactor {
    pub g: DenseBlock,
    pub f: DenseBlock,
}

impl ResidualFactor {
    /// `F J Fᵀ` with `J = [[0, I], [I, 0]]`.
    pub fn fjf(&self) -> DenseBlock {
        let c = self.f.ncols() / 2;
        let f1 = self.f.columns(0, c);
        let f2 = self.f.columns(c, c);
        let x = f1 * f2.transpose();
        &x + x.transpose()
    }
}

/// Builds the residual factor of `Y` on the current rational space.
pub fn rational_residual_factor(y: &DenseBlock, basis: &KrylovBasis) -> Result<ResidualFactor> {
    let (w_hat, theta) = basis.rational_frame()?;
    let dim = basis.dim();
    if y.nrows() != dim {
        return Err(PnkError::Dimension("iterate order differs from basis dimension"));
    }
    let c = w_hat.ncols();
    let n = basis.n();
    if c == 0 {
        return Ok(ResidualFactor {
            g: DenseBlock::zeros(n, 0),
            f: DenseBlock::zeros(0, 0),
        });
    }
    let mut u = DenseBlock::zeros(n, 2 * c);
    u.columns_mut(0, c)
        .copy_from(&(basis.v_all().columns(0, dim) * (y * theta)));
    u.columns_mut(c, c).copy_from(w_hat);
    let (g, f) = if 2 * c <= n {
        dense::qr_economy(&u)?
    } else {
        (u, DenseBlock::identity(2 * c, 2 * c))
    };
    Ok(ResidualFactor { g, f })
}

/// `‖F J Fᵀ‖_F` for the projected solution on a rational space.
pub fn inner_residual_rk(y_tilde: &DenseBlock, basis: &KrylovBasis) -> Result<f64> {
    Ok(rational_residual_factor(y_tilde, basis)?.fjf().norm())
}

/// Projected Riccati residual `T Y + Y Tᵀ − Y B_mB_mᵀ Y + E₁γγᵀE₁ᵀ`.
pub fn projected_riccati_residual(y: &DenseBlock, t: &DenseBlock, b_m: &DenseBlock, gamma: &DenseBlock) -> DenseBlock {
    let dim = t.nrows();
    let bb = b_m * b_m.transpose();
    dense::riccati_residual_dense(t, &bb, &rhs_block(gamma, dim), y)
}

/// Out-of-space part of a Riccati residual.
#[derive(Debug, Clone, Copy)]
pub enum Boundary<'a> {
    /// `E_{m+1}ᵀT̲_m` of an extended space.
    Extended(&'a DenseBlock),
    /// A rational space, whose frame supplies the residual factor.
    Rational(&'a KrylovBasis),
}

/// `‖R(V_m Y V_mᵀ)‖_F` from projected data.
pub fn riccati_residual_norm(
    y: &DenseBlock,
    t: &DenseBlock,
    b_m: &DenseBlock,
    gamma: &DenseBlock,
    boundary: Boundary<'_>,
) -> Result<f64> {
    let rp = projected_riccati_residual(y, t, b_m, gamma).norm_squared();
    let out = match boundary {
        Boundary::Extended(phi) => {
            if phi.is_empty() {
                0.0
            } else {
                2.0 * (phi * y).norm_squared()
            }
        }
        Boundary::Rational(basis) => rational_residual_factor(y, basis)?.fjf().norm_squared(),
    };
    Ok((rp + out).sqrt())
}

/// Data of the last accepted iterate needed by the line search.
#[derive(Debug, Clone)]
enum CrossTerm {
    /// `Φ_{m̄} Y_k`.
    Extended(DenseBlock),
    /// QR data of `U_{m̄}` at `Y_k`.
    Rational(ResidualFactor),
}

/// State of the outer iteration.
#[derive(Debug, Clone)]
pub struct NewtonState {
    pub k: usize,
    /// Blocks of the space at the last accepted iterate.
    pub m_bar: usize,
    /// Projected iterate `Y_k`, of the order of `V_{m̄}`.
    pub y: DenseBlock,
    pub eta: f64,
    pub lambdas: Vec<f64>,
    /// `‖R(X_j)‖_F` for `j = 0..=k`.
    pub residuals: Vec<f64>,
    pub eta_bar: f64,
    pub alpha: f64,
    rproj: DenseBlock,
    cross: CrossTerm,
}

impl NewtonState {
    /// `‖R(X_k)‖_F`.
    pub fn residual(&self) -> f64 {
        self.residuals[self.residuals.len() - 1]
    }

    /// Evaluates `Y` on the current space and builds the state for it.
    fn at(basis: &KrylovBasis, y: DenseBlock, k: usize, eta_bar: f64, alpha: f64) -> Result<Self> {
        let t = basis.t();
        let b_m = basis.b_proj();
        let rproj = projected_riccati_residual(&y, &t, &b_m, basis.gamma());
        let (cross, out) = match basis.kind() {
            SpaceKind::Extended => {
                let phi = basis.boundary();
                let py = if phi.is_empty() {
                    DenseBlock::zeros(0, y.ncols())
                } else {
                    &phi * &y
                };
                let out = 2.0 * py.norm_squared();
                (CrossTerm::Extended(py), out)
            }
            SpaceKind::Rational => {
                let f = rational_residual_factor(&y, basis)?;
                let out = f.fjf().norm_squared();
                (CrossTerm::Rational(f), out)
            }
        };
        let res = (rproj.norm_squared() + out).sqrt();
        Ok(Self {
            k,
            m_bar: basis.m(),
            y,
            eta: 0.0,
            lambdas: Vec::new(),
            residuals: alloc::vec![res],
            eta_bar,
            alpha,
            rproj,
            cross,
        })
    }

    /// `X_0 = 0`, held on the first block so that `m̄ = 0` and its
    /// residual is `E₁γγᵀE₁ᵀ`.
    fn zero(kind: SpaceKind, n: usize, gamma: &DenseBlock, eta_bar: f64, alpha: f64) -> Self {
        let r = gamma.nrows();
        let rproj = gamma * gamma.transpose();
        let cross = match kind {
            SpaceKind::Extended => CrossTerm::Extended(DenseBlock::zeros(0, r)),
            SpaceKind::Rational => CrossTerm::Rational(ResidualFactor {
                g: DenseBlock::zeros(n, 0),
                f: DenseBlock::zeros(0, 0),
            }),
        };
        Self {
            k: 0,
            m_bar: 0,
            y: DenseBlock::zeros(r, r),
            eta: 0.0,
            lambdas: Vec::new(),
            residuals: alloc::vec![rproj.norm()],
            eta_bar,
            alpha,
            rproj,
            cross,
        }
    }

    fn advance(&mut self, next: NewtonState, lambda: f64) {
        self.k += 1;
        self.m_bar = next.m_bar;
        self.y = next.y;
        self.rproj = next.rproj;
        self.cross = next.cross;
        self.lambdas.push(lambda);
        self.residuals.push(next.residuals[0]);
    }
}

fn correction_terms(state: &NewtonState, y_tilde: &DenseBlock, basis: &KrylovBasis) -> (DenseBlock, DenseBlock) {
    let dim = basis.dim();
    let z = y_tilde - pad(&state.y, dim);
    let b_m = basis.b_proj();
    let zb = &z * &b_m;
    let m = &zb * zb.transpose();
    (z, m)
}

/// Line-search coefficients on an extended space.
pub fn line_search_coeffs_ek(
    state: &NewtonState,
    y_tilde: &DenseBlock,
    basis: &KrylovBasis,
) -> Result<LineSearchCoeffs> {
    let CrossTerm::Extended(phi_y) = &state.cross else {
        return Err(PnkError::Krylov(KrylovError::WrongKind("n extended")));
    };
    let dim_bar = state.y.nrows();
    let (_, m) = correction_terms(state, y_tilde, basis);
    let phi = basis.boundary();
    let phi_yt = if phi.is_empty() {
        DenseBlock::zeros(0, y_tilde.ncols())
    } else {
        &phi * y_tilde
    };
    let grew = basis.m() > state.m_bar;
    let lead = m.view((0, 0), (dim_bar, dim_bar)).into_owned();
    let mut epsilon = frob_inner(&state.rproj, &lead);
    let gamma = if grew {
        if phi_y.nrows() > 0 {
            let (s, e) = basis.block_range(state.m_bar + 1);
            let block = m.view((s, 0), (e - s, dim_bar)).into_owned();
            epsilon += 2.0 * frob_inner(phi_y, &block);
        }
        0.0
    } else if phi_y.nrows() > 0 {
        2.0 * frob_inner(phi_y, &phi_yt)
    } else {
        0.0
    };
    Ok(LineSearchCoeffs {
        alpha: state.residual() * state.residual(),
        beta: 2.0 * phi_yt.norm_squared(),
        gamma,
        delta: m.norm_squared(),
        epsilon,
        zeta: 0.0,
    })
}

/// Line-search coefficients on a rational space.
///
/// `γ` is evaluated exactly as `⟨F J Fᵀ, (GᵀG̃) F̃ J F̃ᵀ (G̃ᵀG)⟩`; the
/// out-of-space directions of consecutive iterates overlap, so it is in
/// general nonzero even when the space grew.
pub fn line_search_coeffs_rk(
    state: &NewtonState,
    y_tilde: &DenseBlock,
    basis: &KrylovBasis,
) -> Result<LineSearchCoeffs> {
    let CrossTerm::Rational(prev) = &state.cross else {
        return Err(PnkError::Krylov(KrylovError::WrongKind(" rational")));
    };
    let dim_bar = state.y.nrows();
    let dim = basis.dim();
    let (_, m) = correction_terms(state, y_tilde, basis);
    let cur = rational_residual_factor(y_tilde, basis)?;
    let fjf_prev = prev.fjf();
    let fjf_cur = cur.fjf();
    let gg = prev.g.tr_mul(&cur.g);
    let gamma = frob_inner(&fjf_prev, &(&gg * &fjf_cur * gg.transpose()));
    let lead = m.view((0, 0), (dim_bar, dim_bar)).into_owned();
    let gv = prev.g.tr_mul(&basis.v_all().columns(0, dim));
    let epsilon = frob_inner(&state.rproj, &lead) + frob_inner(&fjf_prev, &(&gv * &m * gv.transpose()));
    Ok(LineSearchCoeffs {
        alpha: state.residual() * state.residual(),
        beta: fjf_cur.norm_squared(),
        gamma,
        delta: m.norm_squared(),
        epsilon,
        zeta: 0.0,
    })
}

/// One row of the iteration history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    /// Basis iteration.
    pub m: usize,
    /// Newton index of the iterate the inner equation linearizes at.
    pub k: usize,
    /// `‖R(X_k)‖_F / ‖CᵀC‖_F`.
    pub rel_res: f64,
    /// `‖L‖_F / ‖CᵀC‖_F` of the projected solution.
    pub inner_res: f64,
    pub eta: f64,
    /// Step length when the inner solution was accepted.
    pub lambda: Option<f64>,
    /// Spectral abscissa of the projected closed-loop matrix `Q_m`.
    pub proj_abscissa: f64,
    pub basis_dim: usize,
}

/// Record of an accepted Newton step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Index of the new iterate.
    pub k: usize,
    pub m: usize,
    pub basis_dim: usize,
    pub lambda: f64,
    pub coeffs: LineSearchCoeffs,
    pub res_before: f64,
    pub res_after: f64,
    pub inner_res: f64,
    pub eta: f64,
    pub grew: bool,
    /// Whether `‖R(X_{k+1})‖ ≤ (1 − λα)‖R(X_k)‖` held.
    pub sufficient_decrease: bool,
}

/// Accepted projected iterate kept on request.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    pub m: usize,
    /// `Ŷ` with `X_k = (V Ŷ)(V Ŷ)ᵀ`, on the first `Ŷ.nrows()` basis columns.
    pub y_factor: DenseBlock,
}

/// Outcome of [`pnk_solve`].
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub kind: SpaceKind,
    pub converged: bool,
    pub newton_steps: usize,
    pub lyapunov_solves: usize,
    /// Final basis iteration `m`.
    pub iterations: usize,
    /// Columns of `V_m`.
    pub basis_dim: usize,
    /// Columns stored, `V_{m+1}` included.
    pub memory_vectors: usize,
    pub rank: usize,
    pub rel_res: f64,
    pub rhs_norm: f64,
    pub history: Vec<HistoryRow>,
    pub steps: Vec<StepRecord>,
    pub iterates: Vec<IterateRecord>,
    pub shifts: Vec<C64>,
    pub deflations: Vec<DeflationEvent>,
    pub stabilization_threshold: Option<f64>,
    /// Projected solves skipped because `Q_m` was not stable.
    pub unstable_projections: usize,
    /// Orthonormal basis of the final space, set when iterates are recorded.
    pub basis: Option<DenseBlock>,
}

impl SolveReport {
    fn empty(kind: SpaceKind) -> Self {
        Self {
            kind,
            converged: true,
            newton_steps: 0,
            lyapunov_solves: 0,
            iterations: 0,
            basis_dim: 0,
            memory_vectors: 0,
            rank: 0,
            rel_res: 0.0,
            rhs_norm: 0.0,
            history: Vec::new(),
            steps: Vec::new(),
            iterates: Vec::new(),
            shifts: Vec::new(),
            deflations: Vec::new(),
            stabilization_threshold: None,
            unstable_projections: 0,
            basis: None,
        }
    }
}

/// Inner iteration as seen by a [`PnkObserver`].
pub struct InnerIteration<'a> {
    pub k: usize,
    pub m: usize,
    pub basis: &'a KrylovBasis,
    /// `Y_k` on `V_{m̄}`.
    pub y_k: &'a DenseBlock,
    pub y_tilde: &'a DenseBlock,
    pub inner_res: f64,
    pub outer_res: f64,
}

/// Accepted step as seen by a [`PnkObserver`].
pub struct AcceptedStep<'a> {
    pub k: usize,
    pub m: usize,
    pub basis: &'a KrylovBasis,
    pub y_prev: &'a DenseBlock,
    pub y_tilde: &'a DenseBlock,
    pub y_next: &'a DenseBlock,
    pub coeffs: LineSearchCoeffs,
    pub lambda: f64,
    pub res_prev: f64,
    pub res_next: f64,
    pub grew: bool,
}

/// Hooks called during [`pnk_solve_observed`].
pub trait PnkObserver {
    fn inner(&mut self, _event: &InnerIteration<'_>) {}
    fn accepted(&mut self, _event: &AcceptedStep<'_>) {}
}

struct Silent;

impl PnkObserver for Silent {}

/// Solves `AX + XAᵀ − XBBᵀX + CᵀC = 0` for a low-rank `X ≈ PPᵀ`.
///
/// Without `x0`, `A` should be negative definite. With `x0 = S₀S₀ᵀ` the
/// space starts from `[Cᵀ, S₀]` and `A − X₀BBᵀ` should be stable.
pub fn pnk_solve(
    a: &SparseOperator,
    b: &DenseBlock,
    c: &DenseBlock,
    x0: Option<&LowRankFactor>,
    cfg: &PnkConfig,
) -> Result<(LowRankFactor, SolveReport)> {
    pnk_solve_observed(a, b, c, x0, cfg, &mut Silent)
}

/// [`pnk_solve`] reporting every inner iteration and accepted step.
pub fn pnk_solve_observed(
    a: &SparseOperator,
    b: &DenseBlock,
    c: &DenseBlock,
    x0: Option<&LowRankFactor>,
    cfg: &PnkConfig,
    observer: &mut dyn PnkObserver,
) -> Result<(LowRankFactor, SolveReport)> {
    cfg.validate()?;
    let n = a.n();
    if b.nrows() != n || c.ncols() != n {
        return Err(PnkError::Dimension("B must have n rows and C n columns"));
    }
    if x0.is_some_and(|f| f.dim() != n) {
        return Err(PnkError::Dimension("initial factor must have n rows"));
    }
    let x0 = x0.filter(|f| f.rank() > 0);
    let ct = c.transpose();
    if x0.is_none() && ct.norm() == 0.0 {
        return Ok((LowRankFactor::empty(n), SolveReport::empty(cfg.kind)));
    }
    let sys = SparseSystem::new(a);
    let mut basis = match (cfg.kind, x0) {
        (SpaceKind::Extended, None) => ek_init(&sys, &ct, cfg.defl_tol)?,
        (SpaceKind::Extended, Some(s)) => ek_init_augmented(&sys, &ct, &s.0, cfg.defl_tol)?,
        (SpaceKind::Rational, None) => rk_init(&sys, &ct, cfg.defl_tol)?,
        (SpaceKind::Rational, Some(s)) => rk_init_augmented(&sys, &ct, &s.0, cfg.defl_tol)?,
    };
    basis.attach_b(b)?;
    let gamma = basis.gamma().clone();
    let rhs_norm = (&gamma * gamma.transpose()).norm();
    let y0 = match x0 {
        Some(s) => {
            let vs = basis.v_all().tr_mul(&s.0);
            &vs * vs.transpose()
        }
        None => DenseBlock::zeros(0, 0),
    };
    let mut pool = match (cfg.kind, cfg.s0) {
        (SpaceKind::Rational, Some(s0)) => Some(ShiftPool::new(s0)),
        (SpaceKind::Rational, None) => Some(match x0 {
            Some(s) => {
                let f = sys.factorization()?;
                let u = &s.0 * s.0.tr_mul(b);
                let updated = UpdatedSystem::new(f, &u, &b.transpose())?;
                ShiftPool::estimate(&updated, cfg.s0_iterations)?
            }
            None => ShiftPool::estimate(&sys, cfg.s0_iterations)?,
        }),
        (SpaceKind::Extended, _) => None,
    };
    if let Some(p) = pool.as_mut() {
        p.samples_per_edge = cfg.hull_samples;
    }
    let stab = cfg.stabilization.map(|mode| stabilization_threshold(b, c, mode).0);

    expand(&mut basis, &sys, pool.as_mut(), &y0)?;
    let mut state = match x0 {
        Some(_) => NewtonState::at(&basis, y0, 0, cfg.eta_bar, cfg.alpha)?,
        None => NewtonState::zero(basis.kind(), basis.n(), &gamma, cfg.eta_bar, cfg.alpha),
    };
    let res0 = state.residual();
    let target = match cfg.stop_rule {
        StopRule::ScaledByRhs => cfg.eps * rhs_norm,
        StopRule::RelativeToInitial => cfg.eps * res0,
    };
    let scale = if rhs_norm > 0.0 {
        rhs_norm
    } else {
        res0.max(f64::MIN_POSITIVE)
    };
    state.eta = forcing_parameter(0, cfg.forcing, res0 / scale, cfg.eta_bar);

    let mut report = SolveReport::empty(cfg.kind);
    report.converged = res0 < target;
    report.rhs_norm = rhs_norm;
    report.stabilization_threshold = stab;
    if cfg.record_iterates {
        report.iterates.push(IterateRecord {
            k: 0,
            m: basis.m(),
            y_factor: psd_factor(&state.y, cfg)?,
        });
    }

    let mut loops = 0;
    'outer: while !report.converged {
        loops += 1;
        let m = basis.m();
        if m % cfg.d == 0 || basis.is_invariant() {
            'solve: {
                let t = basis.t();
                let b_m = basis.b_proj();
                let (q, rhs) = assemble_projected_lyapunov(&t, &b_m, &state.y, &gamma)?;
                let proj_abscissa = dense::spectral_abscissa(&q).unwrap_or(f64::NAN);
                let y_tilde = match dense::solve_lyapunov_dense(&q, &(-&rhs)) {
                    Ok(y) => y,
                    Err(DenseError::Unstable { .. }) if !basis.is_invariant() && loops < cfg.m_max => {
                        report.unstable_projections += 1;
                        break 'solve;
                    }
                    Err(source) => return Err(PnkError::ProjectedSolve { k: state.k, m, source }),
                };
                report.lyapunov_solves += 1;
                let inner = match basis.kind() {
                    SpaceKind::Extended => inner_residual_ek(&y_tilde, &basis.boundary()),
                    SpaceKind::Rational => inner_residual_rk(&y_tilde, &basis)?,
                };
                let outer = state.residual();
                observer.inner(&InnerIteration {
                    k: state.k,
                    m,
                    basis: &basis,
                    y_k: &state.y,
                    y_tilde: &y_tilde,
                    inner_res: inner,
                    outer_res: outer,
                });
                report.history.push(HistoryRow {
                    m,
                    k: state.k,
                    rel_res: outer / scale,
                    inner_res: inner / scale,
                    eta: state.eta,
                    lambda: None,
                    proj_abscissa,
                    basis_dim: basis.dim(),
                });
                let mut threshold = state.eta * outer;
                if let Some(s) = stab {
                    threshold = threshold.min(s);
                }
                let grew = m > state.m_bar;
                if inner <= threshold && (grew || basis.is_invariant()) {
                    let coeffs = match basis.kind() {
                        SpaceKind::Extended => line_search_coeffs_ek(&state, &y_tilde, &basis)?,
                        SpaceKind::Rational => line_search_coeffs_rk(&state, &y_tilde, &basis)?,
                    };
                    let lambda =
                        minimize_quartic(&coeffs).map_err(|source| PnkError::LineSearch { k: state.k, source })?;
                    let d = pad(&state.y, basis.dim());
                    let mut y_next = d * (1.0 - lambda) + &y_tilde * lambda;
                    symmetrize(&mut y_next);
                    let next = NewtonState::at(&basis, y_next, state.k + 1, cfg.eta_bar, cfg.alpha)?;
                    let res_next = next.residual();
                    observer.accepted(&AcceptedStep {
                        k: state.k + 1,
                        m,
                        basis: &basis,
                        y_prev: &state.y,
                        y_tilde: &y_tilde,
                        y_next: &next.y,
                        coeffs,
                        lambda,
                        res_prev: outer,
                        res_next,
                        grew,
                    });
                    report.steps.push(StepRecord {
                        k: state.k + 1,
                        m,
                        basis_dim: basis.dim(),
                        lambda,
                        coeffs,
                        res_before: outer,
                        res_after: res_next,
                        inner_res: inner,
                        eta: state.eta,
                        grew,
                        sufficient_decrease: res_next <= (1.0 - lambda * cfg.alpha) * outer,
                    });
                    if let Some(row) = report.history.last_mut() {
                        row.lambda = Some(lambda);
                    }
                    state.advance(next, lambda);
                    state.eta = forcing_parameter(state.k, cfg.forcing, res_next / scale, cfg.eta_bar);
                    if cfg.record_iterates {
                        report.iterates.push(IterateRecord {
                            k: state.k,
                            m,
                            y_factor: psd_factor(&state.y, cfg)?,
                        });
                    }
                    if res_next < target {
                        report.converged = true;
                        break 'outer;
                    }
                }
            }
        }
        if loops >= cfg.m_max {
            break;
        }
        if !basis.is_invariant() {
            expand(&mut basis, &sys, pool.as_mut(), &state.y)?;
        }
    }

    let dim_bar = state.y.nrows();
    let y_hat = psd_factor(&state.y, cfg)?;
    let p = basis.v_all().columns(0, dim_bar) * &y_hat;
    report.newton_steps = state.k;
    report.iterations = basis.m();
    report.basis_dim = basis.dim();
    report.memory_vectors = basis.total_dim();
    report.rank = y_hat.ncols();
    report.rel_res = state.residual() / scale;
    report.shifts = basis.shifts().to_vec();
    report.deflations = basis.deflations().to_vec();
    if cfg.record_iterates {
        report.basis = Some(basis.v_all().columns(0, basis.dim()).into_owned());
    }
    Ok((LowRankFactor(p), report))
}

fn psd_factor(y: &DenseBlock, cfg: &PnkConfig) -> Result<DenseBlock> {
    Ok(dense::truncated_psd_factor(y, cfg.truncation())?)
}

/// Adds one block; reaching an invariant subspace is not an error here.
fn expand(basis: &mut KrylovBasis, sys: &SparseSystem<'_>, pool: Option<&mut ShiftPool>, y: &DenseBlock) -> Result<()> {
    let out = match basis.kind() {
        SpaceKind::Extended => ek_expand(basis, sys),
        SpaceKind::Rational => {
            let pool = pool.ok_or(PnkError::Config("rational space without shift pool"))?;
            let total = basis.total_dim();
            let bp = basis.b_proj_all();
            let closed = basis.t_all() - pad(y, total) * bp * bp.transpose();
            let s = adaptive_shift(&closed, pool)?;
            pool.record(s);
            rk_expand(basis, sys, s)
        }
    };
    match out {
        Ok(()) | Err(KrylovError::InvariantSubspace(_)) => Ok(()),
        Err(e) => Err(e.into()),
    }
}
