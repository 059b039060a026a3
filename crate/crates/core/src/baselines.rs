//! Comparison solvers.
//!
//! [`galerkin_riccati_solve`] projects the Riccati equation itself onto a
//! growing extended or rational space. [`inexact_newton_fresh`] runs
//! inexact Newton–Kleinman where every Lyapunov equation gets its own
//! extended space. [`dense_newton_oracle`] is exact Newton on dense data.

use alloc::vec::Vec;

use nalgebra::DVector;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dense::{self, frob_inner, symmetrize, DenseBlock, DenseError};
use crate::krylov::{
    adaptive_shift, ek_expand, ek_init, rk_expand, rk_init, KrylovBasis, KrylovError, KrylovOperator, ShiftPool,
    SpaceKind, SparseSystem, UpdatedSystem,
};
use crate::pnk::{
    forcing_parameter, inner_residual_ek, minimize_quartic, pad, riccati_residual_norm, stabilization_threshold,
    Boundary, LineSearchCoeffs, PnkConfig, PnkError, Result,
};
use crate::sparse::SparseOperator;
use crate::LowRankFactor;

/// One Newton step of [`inexact_newton_fresh`].
#[derive(Debug, Clone, PartialEq)]
pub struct FreshStep {
    /// Basis iterations spent on this Lyapunov equation.
    pub iterations: usize,
    /// Dimension of the fresh space after each basis iteration.
    pub dims: Vec<usize>,
    pub lambda: f64,
    /// `‖R(X_{k+1})‖_F / ‖CᵀC‖_F`.
    pub rel_res: f64,
    pub inner_res: f64,
    pub eta: f64,
    /// Rank of `X_{k+1}` after compression.
    pub rank: usize,
}

/// Outcome of a baseline solver.
#[derive(Debug, Clone, Default)]
pub struct BaselineReport {
    pub converged: bool,
    /// Newton steps; zero for pure projection.
    pub newton_steps: usize,
    /// Basis iterations, summed over Newton steps.
    pub iterations: usize,
    /// Largest number of basis vectors held at once.
    pub memory_vectors: usize,
    /// Columns of the final projection space.
    pub basis_dim: usize,
    pub rank: usize,
    pub rel_res: f64,
    pub rhs_norm: f64,
    /// Relative residual after every basis iteration (projection) or
    /// every Newton step (fresh spaces).
    pub residuals: Vec<f64>,
    pub steps: Vec<FreshStep>,
    /// Factors `S_k` with `X_k = S_k D_k S_kᵀ` for `k ≥ 1`, `D_k` diagonal with
    /// entries `±1`; `D_k = I` unless a step overshot into indefiniteness.
    pub factors: Vec<DenseBlock>,
}

/// Galerkin projection of the Riccati equation onto `EK_m(A, Cᵀ)` or
/// `RK_m(A, Cᵀ, s)`.
///
/// The projected equation is solved densely at every basis iteration;
/// the residual is taken from projected data.
pub fn galerkin_riccati_solve(
    a: &SparseOperator,
    b: &DenseBlock,
    c: &DenseBlock,
    kind: SpaceKind,
    cfg: &PnkConfig,
) -> Result<(LowRankFactor, BaselineReport)> {
    cfg.validate()?;
    let n = a.n();
    if b.nrows() != n || c.ncols() != n {
        return Err(PnkError::Dimension("B must have n rows and C n columns"));
    }
    let ct = c.transpose();
    if ct.norm() == 0.0 {
        return Ok((
            LowRankFactor::empty(n),
            BaselineReport {
                converged: true,
                ..Default::default()
            },
        ));
    }
    let sys = SparseSystem::new(a);
    let mut basis = match kind {
        SpaceKind::Extended => ek_init(&sys, &ct, cfg.defl_tol)?,
        SpaceKind::Rational => rk_init(&sys, &ct, cfg.defl_tol)?,
    };
    basis.attach_b(b)?;
    let mut pool = match (kind, cfg.s0) {
        (SpaceKind::Extended, _) => None,
        (SpaceKind::Rational, Some(s0)) => Some(ShiftPool::new(s0)),
        (SpaceKind::Rational, None) => Some(ShiftPool::estimate(&sys, cfg.s0_iterations)?),
    };
    if let Some(p) = pool.as_mut() {
        p.samples_per_edge = cfg.hull_samples;
    }
    let gamma = basis.gamma().clone();
    let rhs_norm = (&gamma * gamma.transpose()).norm();
    let mut report = BaselineReport {
        rhs_norm,
        ..Default::default()
    };
    let mut y = DenseBlock::zeros(0, 0);
    for it in 1..=cfg.m_max {
        let grow = match basis.kind() {
            SpaceKind::Extended => ek_expand(&mut basis, &sys),
            SpaceKind::Rational => {
                let pool = pool
                    .as_mut()
                    .ok_or(PnkError::Config("rational space without shift pool"))?;
                let total = basis.total_dim();
                let bp = basis.b_proj_all();
                let closed = basis.t_all() - pad(&y, total) * bp * bp.transpose();
                let s = adaptive_shift(&closed, pool)?;
                pool.record(s);
                rk_expand(&mut basis, &sys, s)
            }
        };
        match grow {
            Ok(()) | Err(KrylovError::InvariantSubspace(_)) => {}
            Err(e) => return Err(e.into()),
        }
        let t = basis.t();
        let b_m = basis.b_proj();
        let dim = t.nrows();
        let mut h = DenseBlock::zeros(gamma.ncols(), dim);
        h.view_mut((0, 0), (gamma.ncols(), gamma.nrows()))
            .copy_from(&gamma.transpose());
        y = dense::solve_riccati_dense(&t, &b_m, &h).map_err(|source| PnkError::ProjectedSolve {
            k: 0,
            m: basis.m(),
            source,
        })?;
        let boundary = match basis.kind() {
            SpaceKind::Extended => basis.boundary(),
            SpaceKind::Rational => DenseBlock::zeros(0, 0),
        };
        let res = match basis.kind() {
            SpaceKind::Extended => riccati_residual_norm(&y, &t, &b_m, &gamma, Boundary::Extended(&boundary))?,
            SpaceKind::Rational => riccati_residual_norm(&y, &t, &b_m, &gamma, Boundary::Rational(&basis))?,
        };
        report.iterations = it;
        report.residuals.push(res / rhs_norm);
        if res < cfg.eps * rhs_norm || basis.is_invariant() {
            report.converged = res < cfg.eps * rhs_norm;
            break;
        }
    }
    let y_hat = dense::truncated_psd_factor(&y, cfg.trunc_tol.unwrap_or(cfg.eps / 10.0))?;
    let p = basis.v_all().columns(0, y.nrows()) * &y_hat;
    report.memory_vectors = basis.total_dim();
    report.basis_dim = basis.dim();
    report.rank = y_hat.ncols();
    report.rel_res = report.residuals.last().copied().unwrap_or(0.0);
    Ok((LowRankFactor(p), report))
}

/// `M ≈ F diag(d) Fᵀ` keeping eigenvalues above `tol` times the largest
/// in magnitude, with `|d| = 1`.
fn signed_factor(m: &DenseBlock, tol: f64) -> (DenseBlock, DVector<f64>) {
    let eig = m.clone().symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let keep: Vec<usize> = (0..m.nrows())
        .filter(|&i| eig.eigenvalues[i].abs() > tol * top)
        .collect();
    let mut f = DenseBlock::zeros(m.nrows(), keep.len());
    let mut d = DVector::zeros(keep.len());
    for (j, &i) in keep.iter().enumerate() {
        let l = eig.eigenvalues[i];
        f.set_column(j, &(eig.eigenvectors.column(i) * l.abs().sqrt()));
        d[j] = l.signum();
    }
    (f, d)
}

/// Orthonormal basis of the columns of `blocks`, rank-revealing.
fn orth(blocks: &[&DenseBlock], n: usize) -> DenseBlock {
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut w = DenseBlock::zeros(n, cols);
    let mut at = 0;
    for b in blocks {
        w.columns_mut(at, b.ncols()).copy_from(*b);
        at += b.ncols();
    }
    crate::krylov::deflate_block(&w, &DenseBlock::zeros(n, 0), 1e-13).q
}

/// Matrices of the form `Q M Qᵀ` expressed on a frame that also holds
/// `A Q` and `Cᵀ`, so that Riccati residuals are exact small matrices.
struct LowRankFrame {
    /// `Q̂ᵀQ`.
    e: DenseBlock,
    /// `Q̂ᵀAQ`.
    aq: DenseBlock,
    /// `Q̂ᵀCᵀ`.
    c: DenseBlock,
    /// `QᵀB`.
    bq: DenseBlock,
}

impl LowRankFrame {
    fn new(a: &SparseOperator, b: &DenseBlock, ct: &DenseBlock, q: &DenseBlock) -> Result<Self> {
        let aq = crate::sparse::spmm(a, q).map_err(KrylovError::from)?;
        let hat = orth(&[ct, q, &aq], q.nrows());
        Ok(Self {
            e: hat.tr_mul(q),
            aq: hat.tr_mul(&aq),
            c: hat.tr_mul(ct),
            bq: q.tr_mul(b),
        })
    }

    /// `R(Q M Qᵀ)` on the frame.
    fn residual(&self, m: &DenseBlock) -> DenseBlock {
        let am = &self.aq * m * self.e.transpose();
        let emb = &self.e * m * &self.bq;
        let mut r = &am + am.transpose() - &emb * emb.transpose() + &self.c * self.c.transpose();
        symmetrize(&mut r);
        r
    }

    /// `Z BBᵀ Z` for `Z = Q M Qᵀ` on the frame.
    fn quadratic(&self, m: &DenseBlock) -> DenseBlock {
        let emb = &self.e * m * &self.bq;
        &emb * emb.transpose()
    }
}

/// Newton steps cap for [`inexact_newton_fresh`].
const MAX_NEWTON_STEPS: usize = 100;

/// Inexact Newton–Kleinman with a fresh extended space per step.
///
/// Step `k` projects `(A − X_kBBᵀ)Z + Z(A − X_kBBᵀ)ᵀ + X_kBBᵀX_k + CᵀC = 0`
/// onto `EK_m(A − X_kBBᵀ, [Cᵀ, X_kB])` until its residual is at most
/// `η_k‖R(X_k)‖_F`, then takes an exact line search step. Closed-loop
/// solves use the Sherman–Morrison–Woodbury identity. `cfg.m_max` caps
/// the basis iterations of each step.
pub fn inexact_newton_fresh(
    a: &SparseOperator,
    b: &DenseBlock,
    c: &DenseBlock,
    cfg: &PnkConfig,
) -> Result<(LowRankFactor, BaselineReport)> {
    cfg.validate()?;
    let n = a.n();
    if b.nrows() != n || c.ncols() != n {
        return Err(PnkError::Dimension("B must have n rows and C n columns"));
    }
    let ct = c.transpose();
    let rhs_norm = (c.transpose() * c).norm();
    if rhs_norm == 0.0 {
        return Ok((
            LowRankFactor::empty(n),
            BaselineReport {
                converged: true,
                ..Default::default()
            },
        ));
    }
    let sys = SparseSystem::new(a);
    let base = sys.factorization()?;
    let stab = cfg.stabilization.map(|mode| stabilization_threshold(b, c, mode).0);
    let trunc = cfg.trunc_tol.unwrap_or(cfg.eps / 10.0);
    let mut s = DenseBlock::zeros(n, 0);
    let mut sign = DVector::zeros(0);
    let mut last = None;
    let mut res = rhs_norm;
    let mut report = BaselineReport {
        rhs_norm,
        residuals: alloc::vec![1.0],
        ..Default::default()
    };
    let mut eta = forcing_parameter(0, cfg.forcing, 1.0, cfg.eta_bar);
    while res >= cfg.eps * rhs_norm {
        if report.newton_steps >= MAX_NEWTON_STEPS {
            break;
        }
        let u = &s * DenseBlock::from_diagonal(&sign) * s.tr_mul(b);
        let updated;
        let op: &dyn FreshOperator = if s.ncols() == 0 {
            &sys
        } else {
            updated = UpdatedSystem::new(base, &u, &b.transpose())?;
            &updated
        };
        let mut start = DenseBlock::zeros(n, ct.ncols() + u.ncols());
        start.columns_mut(0, ct.ncols()).copy_from(&ct);
        start.columns_mut(ct.ncols(), u.ncols()).copy_from(&u);
        let mut basis = op.init(&start, cfg.defl_tol)?;
        let gamma = basis.gamma().clone();
        let mut threshold = eta * res;
        if let Some(t) = stab {
            threshold = threshold.min(t);
        }
        let mut dims = Vec::new();
        let mut accepted = None;
        for it in 1..=cfg.m_max {
            let invariant = match op.expand(&mut basis) {
                Ok(()) => false,
                Err(PnkError::Krylov(KrylovError::InvariantSubspace(_))) => true,
                Err(e) => return Err(e),
            };
            dims.push(basis.dim());
            report.memory_vectors = report.memory_vectors.max(basis.total_dim() + s.ncols());
            let t = basis.t();
            let w = pad(&(&gamma * gamma.transpose()), t.nrows());
            let y = dense::solve_lyapunov_dense(&t, &w).map_err(|source| PnkError::ProjectedSolve {
                k: report.newton_steps,
                m: it,
                source,
            })?;
            let inner = inner_residual_ek(&y, &basis.boundary());
            if inner <= threshold || invariant || it == cfg.m_max {
                accepted = Some((y, inner, it));
                break;
            }
        }
        let Some((y, inner, iterations)) = accepted else {
            break;
        };
        report.iterations += iterations;

        let v = basis.v_all().columns(0, y.nrows()).into_owned();
        let q = orth(&[&s, &v], n);
        let qs = q.tr_mul(&s);
        let qv = q.tr_mul(&v);
        let mx = &qs * DenseBlock::from_diagonal(&sign) * qs.transpose();
        let mt = &qv * &y * qv.transpose();
        let mz = &mt - &mx;
        let frame = LowRankFrame::new(a, b, &ct, &q)?;
        let r0 = frame.residual(&mx);
        let zbz = frame.quadratic(&mz);
        let l = frame.residual(&mt) + &zbz;
        let coeffs = LineSearchCoeffs {
            alpha: r0.norm_squared(),
            beta: l.norm_squared(),
            gamma: frob_inner(&r0, &l),
            delta: zbz.norm_squared(),
            epsilon: frob_inner(&r0, &zbz),
            zeta: frob_inner(&l, &zbz),
        };
        let lambda = minimize_quartic(&coeffs).map_err(|source| PnkError::LineSearch {
            k: report.newton_steps,
            source,
        })?;
        let mut mnext = &mx + &mz * lambda;
        symmetrize(&mut mnext);
        let (f, d) = signed_factor(&mnext, trunc);
        s = &q * &f;
        sign = d;
        res = frame
            .residual(&(&f * DenseBlock::from_diagonal(&sign) * f.transpose()))
            .norm();
        last = Some((q, mnext));
        report.newton_steps += 1;
        report.residuals.push(res / rhs_norm);
        report.steps.push(FreshStep {
            iterations,
            dims,
            lambda,
            rel_res: res / rhs_norm,
            inner_res: inner / rhs_norm,
            eta,
            rank: s.ncols(),
        });
        report.factors.push(s.clone());
        eta = forcing_parameter(report.newton_steps, cfg.forcing, res / rhs_norm, cfg.eta_bar);
    }
    report.converged = res < cfg.eps * rhs_norm;
    report.rel_res = res / rhs_norm;
    let p = match last {
        Some((q, m)) => q * dense::truncated_psd_factor(&m, trunc)?,
        None => DenseBlock::zeros(n, 0),
    };
    report.rank = p.ncols();
    report.basis_dim = report.steps.last().and_then(|st| st.dims.last().copied()).unwrap_or(0);
    Ok((LowRankFactor(p), report))
}

/// Closed-loop operators the fresh-space solver builds spaces for.
trait FreshOperator {
    fn init(&self, start: &DenseBlock, tol: f64) -> Result<KrylovBasis>;
    fn expand(&self, basis: &mut KrylovBasis) -> Result<()>;
}

impl<O: KrylovOperator> FreshOperator for O {
    fn init(&self, start: &DenseBlock, tol: f64) -> Result<KrylovBasis> {
        Ok(ek_init(self, start, tol)?)
    }

    fn expand(&self, basis: &mut KrylovBasis) -> Result<()> {
        Ok(ek_expand(basis, self)?)
    }
}

/// Exact dense Newton–Kleinman from `x0` to `‖R(X)‖_F ≤ 10⁻¹²‖CᵀC‖_F`.
///
/// Returns every iterate, `x0` first. `A − X₀BBᵀ` must be stable.
pub fn dense_newton_oracle(
    a: &DenseBlock,
    b: &DenseBlock,
    c: &DenseBlock,
    x0: Option<&DenseBlock>,
) -> core::result::Result<dense::DenseNewtonRun, DenseError> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || c.ncols() != n || x0.is_some_and(|x| x.shape() != (n, n)) {
        return Err(DenseError::Shape("Newton oracle data do not conform"));
    }
    let x0 = x0.cloned().unwrap_or_else(|| DenseBlock::zeros(n, n));
    let closed = a - &x0 * b * b.transpose();
    if !(dense::spectral_abscissa(&closed)? < 0.0) {
        return Err(DenseError::Shape("A - X0 BBᵀ is not stable"));
    }
    dense::dense_newton(a, &(b * b.transpose()), &(c.transpose() * c), &x0, false, 1e-12, 60)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pnk::pnk_solve;
    use crate::testutil::{laplacian3d, negdef_dense, random};

    fn dense_res(a: &DenseBlock, b: &DenseBlock, c: &DenseBlock, x: &DenseBlock) -> f64 {
        dense::riccati_residual_dense(a, &(b * b.transpose()), &(c.transpose() * c), x).norm()
            / (c.transpose() * c).norm()
    }

    #[test]
    fn galerkin_matches_dense_oracle() {
        let n = 100;
        let ad = negdef_dense(n, 4);
        let a = SparseOperator::from_dense(&ad).unwrap();
        let b = random(n, 2, 5);
        let c = random(2, n, 6);
        let x_ref = dense::solve_riccati_dense(&ad, &b, &c).unwrap();
        for kind in [SpaceKind::Extended, SpaceKind::Rational] {
            let cfg = PnkConfig {
                eps: 1e-10,
                ..PnkConfig::default()
            };
            let (p, rep) = galerkin_riccati_solve(&a, &b, &c, kind, &cfg).unwrap();
            assert!(rep.converged, "{kind:?}");
            let err = (p.to_dense() - &x_ref).norm() / x_ref.norm();
            assert!(err < 1e-6, "{kind:?}: {err}");
            let r = dense_res(&ad, &b, &c, &p.to_dense());
            assert!((r - rep.rel_res).abs() < 1e-8, "{kind:?}: {r} vs {}", rep.rel_res);
        }
    }

    #[test]
    fn galerkin_without_b_is_lyapunov_projection() {
        let n = 60;
        let ad = negdef_dense(n, 7);
        let a = SparseOperator::from_dense(&ad).unwrap();
        let b = DenseBlock::zeros(n, 1);
        let c = random(1, n, 8);
        let (p, rep) = galerkin_riccati_solve(&a, &b, &c, SpaceKind::Extended, &PnkConfig::default()).unwrap();
        assert!(rep.converged);
        let x_ref = dense::solve_lyapunov_dense(&ad, &(c.transpose() * &c)).unwrap();
        assert!((p.to_dense() - &x_ref).norm() / x_ref.norm() < 1e-6);
    }

    #[test]
    fn fresh_first_step_uses_pnk_space() {
        let a = laplacian3d(5);
        let n = a.n();
        let b = random(n, 1, 2).map(|v| v + 0.5);
        let c = random(1, n, 3).map(|v| v + 0.5);
        let cfg = PnkConfig::default();
        let (_, fresh) = inexact_newton_fresh(&a, &b, &c, &cfg).unwrap();
        let (_, shared) = pnk_solve(&a, &b, &c, None, &cfg).unwrap();
        let first = &fresh.steps[0];
        assert_eq!(first.dims.last().copied(), Some(shared.steps[0].basis_dim));
        assert!((first.rel_res - shared.steps[0].res_after / shared.rhs_norm).abs() < 1e-8);
    }

    #[test]
    fn fresh_converges_and_reports_dims() {
        let n = 60;
        let ad = negdef_dense(n, 9);
        let a = SparseOperator::from_dense(&ad).unwrap();
        let b = random(n, 1, 10);
        let c = random(1, n, 11);
        let cfg = PnkConfig {
            eps: 1e-9,
            ..PnkConfig::default()
        };
        let (p, rep) = inexact_newton_fresh(&a, &b, &c, &cfg).unwrap();
        assert!(rep.converged);
        let r = dense_res(&ad, &b, &c, &p.to_dense());
        assert!(r < 1e-8 && (r - rep.rel_res).abs() < 1e-9, "{r} {}", rep.rel_res);
        for st in &rep.steps {
            assert!(st.dims.iter().all(|&d| d > 0));
            assert!(st.dims.windows(2).all(|w| w[0] <= w[1]));
        }
        assert_eq!(rep.factors.len(), rep.newton_steps);
    }

    #[test]
    fn oracle_scalar_case() {
        let one = DenseBlock::from_element(1, 1, 1.0);
        let a = DenseBlock::from_element(1, 1, -1.0);
        let run = dense_newton_oracle(&a, &one, &one, None).unwrap();
        assert!((run.x[(0, 0)] - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        let again = dense_newton_oracle(&a, &one, &one, Some(&run.x)).unwrap();
        assert_eq!(again.steps, 0);
    }

    #[test]
    fn oracle_matches_hamiltonian_and_is_monotone() {
        let n = 50;
        let a = negdef_dense(n, 12);
        let b = random(n, 2, 13);
        let c = random(2, n, 14);
        let run = dense_newton_oracle(&a, &b, &c, None).unwrap();
        let x_ref = dense::solve_riccati_dense(&a, &b, &c).unwrap();
        assert!((&run.x - &x_ref).norm() / x_ref.norm() < 1e-8);
        for w in run.iterates[1..].windows(2) {
            let d = &w[0] - &w[1];
            let lmin = d.symmetric_eigenvalues().min();
            assert!(lmin >= -1e-9 * w[0].norm(), "{lmin}");
        }
    }

    #[test]
    fn zero_c_gives_rank_zero() {
        let a = laplacian3d(3);
        let b = random(27, 1, 1);
        let c = DenseBlock::zeros(1, 27);
        let (p, rep) = galerkin_riccati_solve(&a, &b, &c, SpaceKind::Extended, &PnkConfig::default()).unwrap();
        assert_eq!(p.rank(), 0);
        assert!(rep.converged);
        let (p, _) = inexact_newton_fresh(&a, &b, &c, &PnkConfig::default()).unwrap();
        assert_eq!(p.rank(), 0);
    }
}
