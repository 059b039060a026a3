//! Dense kernels for small projected problems and brute-force oracles.
//!
//! Everything here works on [`DenseBlock`] values held in memory. The sizes
//! involved are the projected dimensions of the solver (a few hundred at
//! most) or desk-scale oracle problems.

use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix, Schur, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;

use crate::pnk::{minimize_quartic, LineSearchCoeffs};

mod eig;

/// Column-major dense real matrix.
pub type DenseBlock = DMatrix<f64>;

/// Double precision complex scalar.
pub type C64 = Complex<f64>;

const SCHUR_MAX_SWEEPS: usize = 200;

/// Failure modes of the dense kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DenseError {
    #[error("non-finite entry in input")]
    NonFinite,
    #[error("shape mismatch: {0}")]
    Shape(&'static str),
    #[error("coefficient matrix is not stable: eigenvalue {re:e}{im:+e}i")]
    Unstable { re: f64, im: f64 },
    #[error("near-singular Sylvester pair at blocks ({row}, {col})")]
    SingularSylvester { row: usize, col: usize },
    #[error("Hamiltonian ordering produced {stable} stable eigenvalues, expected {expected}")]
    HamiltonianOrdering { stable: usize, expected: usize },
    #[error("Hamiltonian has eigenvalues on the imaginary axis")]
    ImaginaryAxis,
    #[error("matrix is indefinite: eigenvalue {0:e} below tolerance")]
    Indefinite(f64),
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("Newton iteration stagnated at relative residual {0:e}")]
    Stagnation(f64),
}

pub type Result<T> = core::result::Result<T, DenseError>;

/// Real Schur decomposition `M = U T Uᵀ` with `T` quasi-upper-triangular.
#[derive(Debug, Clone)]
pub struct SchurForm {
    pub u: DenseBlock,
    pub t: DenseBlock,
    pub eigenvalues: Vec<C64>,
}

impl SchurForm {
    pub fn new(m: &DenseBlock) -> Result<Self> {
        if !m.is_square() {
            return Err(DenseError::Shape("Schur form needs a square matrix"));
        }
        check_finite(m)?;
        let n = m.nrows();
        if n == 0 {
            return Ok(Self {
                u: m.clone(),
                t: m.clone(),
                eigenvalues: Vec::new(),
            });
        }
        let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_SWEEPS * n).ok_or(DenseError::NoConvergence)?;
        let (u, t) = schur.unpack();
        let mut form = Self {
            u,
            t,
            eigenvalues: Vec::with_capacity(n),
        };
        for (start, size) in form.blocks() {
            if size == 1 {
                form.eigenvalues.push(C64::new(form.t[(start, start)], 0.0));
            } else {
                let (l1, l2) = eig2x2(
                    form.t[(start, start)],
                    form.t[(start, start + 1)],
                    form.t[(start + 1, start)],
                    form.t[(start + 1, start + 1)],
                );
                form.eigenvalues.push(l1);
                form.eigenvalues.push(l2);
            }
        }
        Ok(form)
    }

    /// Diagonal blocks of `T` as `(start, size)` pairs.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        let n = self.t.nrows();
        let mut out = Vec::new();
        let mut i = 0;
        while i < n {
            if i + 1 < n && self.t[(i + 1, i)] != 0.0 {
                out.push((i, 2));
                i += 2;
            } else {
                out.push((i, 1));
                i += 1;
            }
        }
        out
    }
}

fn eig2x2(a: f64, b: f64, c: f64, d: f64) -> (C64, C64) {
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let disc = half * half + b * c;
    if disc >= 0.0 {
        let r = disc.sqrt();
        (C64::new(mean + r, 0.0), C64::new(mean - r, 0.0))
    } else {
        let r = (-disc).sqrt();
        (C64::new(mean, r), C64::new(mean, -r))
    }
}

pub(crate) fn check_finite(m: &DenseBlock) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(DenseError::NonFinite)
    }
}

/// Replaces `m` by its symmetric part.
pub fn symmetrize(m: &mut DenseBlock) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Frobenius inner product `⟨X, Y⟩ = trace(Yᵀ X)`.
pub fn frob_inner(x: &DenseBlock, y: &DenseBlock) -> f64 {
    x.dot(y)
}

/// Economy QR with a nonnegative diagonal in `R`.
pub fn qr_economy(m: &DenseBlock) -> Result<(DenseBlock, DenseBlock)> {
    let (rows, cols) = m.shape();
    if rows < cols {
        return Err(DenseError::Shape("qr_economy needs rows >= cols"));
    }
    check_finite(m)?;
    if cols == 0 {
        return Ok((DenseBlock::zeros(rows, 0), DenseBlock::zeros(0, 0)));
    }
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            r.row_mut(j).neg_mut();
            q.column_mut(j).neg_mut();
        }
    }
    Ok((q, r))
}

/// Solves `F Y + Y Fᵀ + W = 0` by the Bartels–Stewart method.
pub fn solve_lyapunov_dense(f: &DenseBlock, w: &DenseBlock) -> Result<DenseBlock> {
    let n = f.nrows();
    if !f.is_square() || w.shape() != (n, n) {
        return Err(DenseError::Shape("Lyapunov coefficients must be conforming squares"));
    }
    check_finite(w)?;
    let schur = SchurForm::new(f)?;
    check_stable(&schur, f)?;
    if n == 0 {
        return Ok(DenseBlock::zeros(0, 0));
    }
    let w_hat = schur.u.transpose() * w * &schur.u;
    let z = solve_quasi_triangular(&schur, &w_hat)?;
    let mut y = &schur.u * z * schur.u.transpose();
    symmetrize(&mut y);
    Ok(y)
}

fn check_stable(schur: &SchurForm, f: &DenseBlock) -> Result<()> {
    let guard = 16.0 * f64::EPSILON * f.norm();
    for ev in &schur.eigenvalues {
        if ev.re >= -guard {
            return Err(DenseError::Unstable { re: ev.re, im: ev.im });
        }
    }
    Ok(())
}

/// Solves `S Z + Z Sᵀ = -W` with `S` quasi-upper-triangular.
fn solve_quasi_triangular(schur: &SchurForm, w: &DenseBlock) -> Result<DenseBlock> {
    let s = &schur.t;
    let n = s.nrows();
    let blocks = schur.blocks();
    let mut z = DenseBlock::zeros(n, n);
    for (bi, &(i0, pi)) in blocks.iter().enumerate().rev() {
        let ie = i0 + pi;
        for (bj, &(j0, pj)) in blocks.iter().enumerate().rev() {
            let je = j0 + pj;
            let mut rhs = -w.view((i0, j0), (pi, pj)).into_owned();
            if ie < n {
                rhs -= s.view((i0, ie), (pi, n - ie)) * z.view((ie, j0), (n - ie, pj));
            }
            if je < n {
                rhs -= z.view((i0, je), (pi, n - je)) * s.view((j0, je), (pj, n - je)).transpose();
            }
            let sii = s.view((i0, i0), (pi, pi)).into_owned();
            let sjj = s.view((j0, j0), (pj, pj)).into_owned();
            let x = small_sylvester(&sii, &sjj, &rhs).ok_or(DenseError::SingularSylvester { row: bi, col: bj })?;
            z.view_mut((i0, j0), (pi, pj)).copy_from(&x);
        }
    }
    Ok(z)
}

/// Solves `P X + X Qᵀ = R` for blocks of order at most two.
fn small_sylvester(p: &DenseBlock, q: &DenseBlock, r: &DenseBlock) -> Option<DenseBlock> {
    let (m, n) = r.shape();
    let dim = m * n;
    let mut k = DenseBlock::zeros(dim, dim);
    for b in 0..n {
        for a in 0..m {
            let row = a + b * m;
            for c in 0..m {
                k[(row, c + b * m)] += p[(a, c)];
            }
            for d in 0..n {
                k[(row, a + d * m)] += q[(b, d)];
            }
        }
    }
    let rhs = DMatrix::from_column_slice(dim, 1, r.as_slice());
    let lu = k.full_piv_lu();
    let x = lu.solve(&rhs)?;
    if !x.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some(DenseBlock::from_column_slice(m, n, x.as_slice()))
}

/// Dense Riccati residual `F Y + Y Fᵀ − Y (GGᵀ) Y + HᵀH`.
pub fn riccati_residual_dense(f: &DenseBlock, gg: &DenseBlock, hh: &DenseBlock, y: &DenseBlock) -> DenseBlock {
    let fy = f * y;
    let mut r = &fy + fy.transpose() - y * gg * y + hh;
    symmetrize(&mut r);
    r
}

/// Stabilizing solution of `F Y + Y Fᵀ − Y G Gᵀ Y + Hᵀ H = 0`.
///
/// The stable invariant subspace of the Hamiltonian is read off an
/// ordered complex Schur form and polished by Newton steps. When the
/// ordering cannot isolate exactly `n` stable eigenvalues a dense
/// Newton iteration with exact line search takes over.
pub fn solve_riccati_dense(f: &DenseBlock, g: &DenseBlock, h: &DenseBlock) -> Result<DenseBlock> {
    let n = f.nrows();
    if !f.is_square() || g.nrows() != n || h.ncols() != n {
        return Err(DenseError::Shape("Riccati factors do not conform"));
    }
    check_finite(f)?;
    check_finite(g)?;
    check_finite(h)?;
    if n == 0 {
        return Ok(DenseBlock::zeros(0, 0));
    }
    let gg = g * g.transpose();
    let hh = h.transpose() * h;
    if gg.norm() == 0.0 {
        return solve_lyapunov_dense(f, &hh);
    }
    match hamiltonian_solution(f, &gg, &hh) {
        Ok(y) => Ok(newton_polish(f, &gg, &hh, y)),
        Err(DenseError::ImaginaryAxis) => Err(DenseError::ImaginaryAxis),
        Err(err) => {
            let zero = DenseBlock::zeros(n, n);
            match dense_newton(f, &gg, &hh, &zero, true, 1e-13, 100) {
                Ok(run) => Ok(run.x),
                Err(_) => Err(err),
            }
        }
    }
}

fn hamiltonian_solution(f: &DenseBlock, gg: &DenseBlock, hh: &DenseBlock) -> Result<DenseBlock> {
    let n = f.nrows();
    let mut ham = DMatrix::<C64>::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            ham[(i, j)] = C64::new(f[(j, i)], 0.0);
            ham[(i, j + n)] = C64::new(-gg[(i, j)], 0.0);
            ham[(i + n, j)] = C64::new(-hh[(i, j)], 0.0);
            ham[(i + n, j + n)] = C64::new(-f[(i, j)], 0.0);
        }
    }
    let scale = ham.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let schur = Schur::try_new(ham, f64::EPSILON, SCHUR_MAX_SWEEPS * 2 * n).ok_or(DenseError::NoConvergence)?;
    let (mut q, mut t) = schur.unpack();
    let axis_tol = 1e3 * f64::EPSILON * scale;
    let mut stable = 0;
    for i in 0..2 * n {
        let re = t[(i, i)].re;
        if re.abs() <= axis_tol {
            return Err(DenseError::ImaginaryAxis);
        }
        if re < 0.0 {
            let mut k = i;
            while k > stable {
                swap_adjacent(&mut t, &mut q, k - 1);
                k -= 1;
            }
            stable += 1;
        }
    }
    if stable != n {
        return Err(DenseError::HamiltonianOrdering { stable, expected: n });
    }
    let u11 = q.view((0, 0), (n, n)).transpose();
    let u21 = q.view((n, 0), (n, n)).transpose();
    // Y = U21 U11⁻¹, computed as Yᵀ = U11⁻ᵀ U21ᵀ.
    let lu = u11.lu();
    let yt = lu
        .solve(&u21)
        .ok_or(DenseError::HamiltonianOrdering { stable, expected: n })?;
    let mut y = DenseBlock::from_fn(n, n, |i, j| yt[(j, i)].re);
    if !y.iter().all(|v| v.is_finite()) {
        return Err(DenseError::HamiltonianOrdering { stable, expected: n });
    }
    symmetrize(&mut y);
    Ok(y)
}

/// Swaps the diagonal entries `k` and `k + 1` of a complex triangular Schur form.
fn swap_adjacent(t: &mut DMatrix<C64>, q: &mut DMatrix<C64>, k: usize) {
    let n = t.nrows();
    let a = t[(k, k)];
    let b = t[(k + 1, k + 1)];
    let c = t[(k, k + 1)];
    let v1 = c;
    let v2 = b - a;
    let nrm = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    if nrm == 0.0 {
        return;
    }
    let (v1, v2) = (v1 / nrm, v2 / nrm);
    // Columns of the rotation: [v, w] with w = [-conj(v2), conj(v1)].
    let w1 = -v2.conj();
    let w2 = v1.conj();
    for i in 0..n {
        let x = t[(i, k)];
        let y = t[(i, k + 1)];
        t[(i, k)] = x * v1 + y * v2;
        t[(i, k + 1)] = x * w1 + y * w2;
        let x = q[(i, k)];
        let y = q[(i, k + 1)];
        q[(i, k)] = x * v1 + y * v2;
        q[(i, k + 1)] = x * w1 + y * w2;
    }
    for j in 0..n {
        let x = t[(k, j)];
        let y = t[(k + 1, j)];
        t[(k, j)] = v1.conj() * x + v2.conj() * y;
        t[(k + 1, j)] = w1.conj() * x + w2.conj() * y;
    }
    t[(k + 1, k)] = C64::new(0.0, 0.0);
}

fn newton_polish(f: &DenseBlock, gg: &DenseBlock, hh: &DenseBlock, y: DenseBlock) -> DenseBlock {
    let mut best = y;
    let mut best_res = riccati_residual_dense(f, gg, hh, &best).norm();
    for _ in 0..2 {
        let closed = f - &best * gg;
        let rhs = &best * gg * &best + hh;
        let Ok(next) = solve_lyapunov_dense(&closed, &rhs) else {
            break;
        };
        let res = riccati_residual_dense(f, gg, hh, &next).norm();
        if res < best_res {
            best = next;
            best_res = res;
        } else {
            break;
        }
    }
    best
}

/// Outcome of a dense Newton–Kleinman run.
#[derive(Debug, Clone)]
pub struct DenseNewtonRun {
    pub x: DenseBlock,
    pub steps: usize,
    pub residuals: Vec<f64>,
    pub iterates: Vec<DenseBlock>,
}

/// Dense Newton–Kleinman on `F X + X Fᵀ − X GGᵀ X + HᵀH = 0` from `x0`.
///
/// `tol` is relative to `‖HᵀH‖_F`. With `line_search` the step length
/// minimizes the exact residual quartic on `(0, 2]`.
pub fn dense_newton(
    f: &DenseBlock,
    gg: &DenseBlock,
    hh: &DenseBlock,
    x0: &DenseBlock,
    line_search: bool,
    tol: f64,
    max_steps: usize,
) -> Result<DenseNewtonRun> {
    let scale = hh.norm().max(f64::MIN_POSITIVE);
    let mut x = x0.clone();
    let mut res = riccati_residual_dense(f, gg, hh, &x);
    let mut res_norm = res.norm();
    let mut run = DenseNewtonRun {
        x: x.clone(),
        steps: 0,
        residuals: alloc::vec![res_norm / scale],
        iterates: alloc::vec![x.clone()],
    };
    let mut stalled = 0;
    while res_norm > tol * scale {
        if run.steps >= max_steps {
            return Err(DenseError::Stagnation(res_norm / scale));
        }
        let closed = f - &x * gg;
        let rhs = &x * gg * &x + hh;
        let next = solve_lyapunov_dense(&closed, &rhs)?;
        let step = if line_search {
            let z = &next - &x;
            let lres = {
                let cn = &closed * &next;
                &cn + cn.transpose() + &rhs
            };
            let zgz = &z * gg * &z;
            let coeffs = LineSearchCoeffs {
                alpha: res_norm * res_norm,
                beta: lres.norm_squared(),
                gamma: frob_inner(&res, &lres),
                delta: zgz.norm_squared(),
                epsilon: frob_inner(&res, &zgz),
                zeta: frob_inner(&lres, &zgz),
            };
            let lambda = minimize_quartic(&coeffs).unwrap_or(1.0);
            &x + z * lambda
        } else {
            next
        };
        x = step;
        symmetrize(&mut x);
        res = riccati_residual_dense(f, gg, hh, &x);
        let new_norm = res.norm();
        run.steps += 1;
        run.residuals.push(new_norm / scale);
        run.iterates.push(x.clone());
        if new_norm >= 0.5 * res_norm {
            stalled += 1;
            if stalled >= 4 {
                return Err(DenseError::Stagnation(new_norm / scale));
            }
        } else {
            stalled = 0;
        }
        res_norm = new_norm;
    }
    run.x = x;
    Ok(run)
}

/// Factor `Ŷ` with `ŶŶᵀ ≈ Y`, keeping eigenvalues above `tol·λ_max(Y)`.
pub fn truncated_psd_factor(y: &DenseBlock, tol: f64) -> Result<DenseBlock> {
    let n = y.nrows();
    if !y.is_square() {
        return Err(DenseError::Shape("truncated_psd_factor needs a square matrix"));
    }
    check_finite(y)?;
    if n == 0 {
        return Ok(DenseBlock::zeros(0, 0));
    }
    let mut sym = y.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, SCHUR_MAX_SWEEPS * n).ok_or(DenseError::NoConvergence)?;
    let vals = &eig.eigenvalues;
    let norm = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if norm == 0.0 {
        return Ok(DenseBlock::zeros(n, 0));
    }
    let lmin = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if lmin < -tol * norm {
        return Err(DenseError::Indefinite(lmin));
    }
    let lmax = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut keep: Vec<usize> = (0..n).filter(|&i| vals[i] > tol * lmax).collect();
    keep.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let mut out = DenseBlock::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let s = vals[i].sqrt();
        let mut col = out.column_mut(c);
        col.copy_from(&eig.eigenvectors.column(i));
        col *= s;
        // Fix the sign so the largest entry is positive.
        let (imax, _) = col.iter().enumerate().fold(
            (0, 0.0f64),
            |acc, (k, v)| {
                if v.abs() > acc.1 {
                    (k, v.abs())
                } else {
                    acc
                }
            },
        );
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }
    Ok(out)
}

/// Largest real part among the eigenvalues of `m`.
pub fn spectral_abscissa(m: &DenseBlock) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().fold(f64::NEG_INFINITY, |acc, z| acc.max(z.re)))
}

/// Eigenvalues of a general real matrix.
pub fn eigenvalues(m: &DenseBlock) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(DenseError::Shape("eigenvalues need a square matrix"));
    }
    check_finite(m)?;
    eig::eigenvalues_only(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        }
    }

    fn random(rows: usize, cols: usize, seed: u64) -> DenseBlock {
        let mut r = lcg(seed);
        DenseBlock::from_fn(rows, cols, |_, _| r())
    }

    fn random_stable(n: usize, seed: u64) -> DenseBlock {
        let m = random(n, n, seed);
        let shift = spectral_abscissa(&m).unwrap();
        m - DenseBlock::identity(n, n) * (shift + 0.5)
    }

    /// Kronecker-system oracle for `F Y + Y Fᵀ + W = 0`.
    fn kron_lyapunov(f: &DenseBlock, w: &DenseBlock) -> DenseBlock {
        let n = f.nrows();
        let eye = DenseBlock::identity(n, n);
        let k = eye.kronecker(f) + f.kronecker(&eye);
        let rhs = -DMatrix::from_column_slice(n * n, 1, w.as_slice());
        let x = k.lu().solve(&rhs).unwrap();
        DenseBlock::from_column_slice(n, n, x.as_slice())
    }

    #[test]
    fn qr_examples() {
        let m = DenseBlock::identity(3, 2);
        let (q, r) = qr_economy(&m).unwrap();
        assert!((q - &m).norm() < 1e-15);
        assert!((r - DenseBlock::identity(2, 2)).norm() < 1e-15);

        let m = DenseBlock::from_column_slice(2, 1, &[3.0, 4.0]);
        let (q, r) = qr_economy(&m).unwrap();
        assert!((q[(0, 0)] - 0.6).abs() < 1e-15 && (q[(1, 0)] - 0.8).abs() < 1e-15);
        assert!((r[(0, 0)] - 5.0).abs() < 1e-14);

        let m = random(50, 4, 7);
        let (q, r) = qr_economy(&m).unwrap();
        assert!((&q * &r - &m).norm() <= 1e-13 * m.norm());
        assert!((q.transpose() * &q - DenseBlock::identity(4, 4)).norm() < 1e-13);
        for j in 0..4 {
            assert!(r[(j, j)] >= 0.0);
            for i in j + 1..4 {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
        let (q2, r2) = qr_economy(&m).unwrap();
        assert_eq!(q, q2);
        assert_eq!(r, r2);
    }

    #[test]
    fn qr_rejects_bad_input() {
        assert!(matches!(qr_economy(&random(2, 3, 1)), Err(DenseError::Shape(_))));
        let mut m = random(4, 2, 1);
        m[(1, 1)] = f64::NAN;
        assert_eq!(qr_economy(&m), Err(DenseError::NonFinite));
    }

    #[test]
    fn schur_form_invariants() {
        for seed in 0..20 {
            let n = 3 + (seed as usize % 10);
            let m = random(n, n, seed);
            let s = SchurForm::new(&m).unwrap();
            assert!((s.u.transpose() * &s.u - DenseBlock::identity(n, n)).norm() <= 1e-12 * n as f64);
            assert!((&s.u * &s.t * s.u.transpose() - &m).norm() <= 1e-10 * m.norm());
            assert_eq!(s.eigenvalues.len(), n);
            let trace: f64 = s.eigenvalues.iter().map(|z| z.re).sum();
            assert!((trace - m.trace()).abs() < 1e-10);
        }
    }

    #[test]
    fn lyapunov_examples() {
        let f = -DenseBlock::identity(2, 2);
        let w = DenseBlock::identity(2, 2) * 2.0;
        let y = solve_lyapunov_dense(&f, &w).unwrap();
        assert!((y - DenseBlock::identity(2, 2)).norm() < 1e-14);

        let y = solve_lyapunov_dense(&random_stable(5, 3), &DenseBlock::zeros(5, 5)).unwrap();
        assert_eq!(y.norm(), 0.0);

        let f = random_stable(8, 11);
        let w0 = random(8, 8, 12);
        let w = &w0 * w0.transpose();
        let y = solve_lyapunov_dense(&f, &w).unwrap();
        let oracle = kron_lyapunov(&f, &w);
        assert!((&y - &oracle).norm() <= 1e-10 * oracle.norm());
        let res = &f * &y + &y * f.transpose() + &w;
        assert!(res.norm() <= 1e-10 * w.norm());
    }

    #[test]
    fn lyapunov_matches_kronecker_oracle_up_to_twelve() {
        for seed in 0..40u64 {
            let n = 1 + (seed as usize % 12);
            let f = random_stable(n, 100 + seed);
            let mut w = random(n, n, 200 + seed);
            symmetrize(&mut w);
            let y = solve_lyapunov_dense(&f, &w).unwrap();
            let oracle = kron_lyapunov(&f, &w);
            assert!((&y - &oracle).norm() <= 1e-9 * oracle.norm().max(1e-300), "seed {seed}");
        }
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        let f = DenseBlock::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.5]);
        let err = solve_lyapunov_dense(&f, &DenseBlock::identity(2, 2)).unwrap_err();
        assert!(matches!(err, DenseError::Unstable { re, .. } if (re - 0.5).abs() < 1e-14));
        let rot = DenseBlock::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matches!(
            solve_lyapunov_dense(&rot, &DenseBlock::identity(2, 2)),
            Err(DenseError::Unstable { .. })
        ));
    }

    #[test]
    fn riccati_scalar() {
        let f = DenseBlock::from_element(1, 1, -1.0);
        let g = DenseBlock::from_element(1, 1, 1.0);
        let y = solve_riccati_dense(&f, &g, &g).unwrap();
        assert!((y[(0, 0)] - (2.0f64.sqrt() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn riccati_lyapunov_limit() {
        let f = random_stable(6, 5);
        let h = random(2, 6, 6);
        let y = solve_riccati_dense(&f, &DenseBlock::zeros(6, 1), &h).unwrap();
        let lyap = solve_lyapunov_dense(&f, &(h.transpose() * &h)).unwrap();
        assert!((y - &lyap).norm() <= 1e-12 * lyap.norm());
    }

    fn check_riccati(f: &DenseBlock, g: &DenseBlock, h: &DenseBlock) {
        let y = solve_riccati_dense(f, g, h).unwrap();
        let gg = g * g.transpose();
        let hh = h.transpose() * h;
        let res = riccati_residual_dense(f, &gg, &hh, &y);
        assert!(res.norm() <= 1e-9 * hh.norm(), "residual {}", res.norm() / hh.norm());
        assert!((&y - y.transpose()).norm() == 0.0);
        let lmin = y.clone().symmetric_eigenvalues().min();
        assert!(lmin >= -1e-10 * y.norm());
        assert!(spectral_abscissa(&(f - &y * &gg)).unwrap() < 0.0);
    }

    #[test]
    fn riccati_random_stable_ten() {
        check_riccati(&random_stable(10, 21), &random(10, 2, 22), &random(3, 10, 23));
    }

    #[test]
    fn riccati_hundred_stabilizable_instances() {
        for seed in 0..100u64 {
            let n = 2 + (seed as usize % 14);
            // Unstable drift is allowed: full-rank G keeps the pair stabilizable.
            let f = random(n, n, 300 + seed) + DenseBlock::identity(n, n) * 0.2;
            let g = random(n, n, 400 + seed) + DenseBlock::identity(n, n);
            let h = random(1 + seed as usize % 3, n, 500 + seed);
            check_riccati(&f, &g, &h);
        }
    }

    #[test]
    fn dense_newton_fallback_agrees() {
        let f = random_stable(7, 31);
        let g = random(7, 2, 32);
        let h = random(2, 7, 33);
        let gg = &g * g.transpose();
        let hh = h.transpose() * &h;
        let run = dense_newton(&f, &gg, &hh, &DenseBlock::zeros(7, 7), true, 1e-13, 50).unwrap();
        let y = solve_riccati_dense(&f, &g, &h).unwrap();
        assert!((&run.x - &y).norm() <= 1e-9 * y.norm());
    }

    #[test]
    fn truncation_examples() {
        let y = DenseBlock::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1e-16]));
        let f = truncated_psd_factor(&y, 1e-12).unwrap();
        assert_eq!(f.ncols(), 1);

        let f = truncated_psd_factor(&DenseBlock::identity(3, 3), 1e-12).unwrap();
        assert_eq!(f.ncols(), 3);
        assert!((&f * f.transpose() - DenseBlock::identity(3, 3)).norm() < 1e-14);

        let z = random(20, 3, 41);
        let y = &z * z.transpose();
        let f = truncated_psd_factor(&y, 1e-12).unwrap();
        assert_eq!(f.ncols(), 3);
        assert!((&f * f.transpose() - &y).norm() <= 1e-10 * y.norm());

        let bad = DenseBlock::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -0.1]));
        assert!(matches!(
            truncated_psd_factor(&bad, 1e-12),
            Err(DenseError::Indefinite(_))
        ));
    }

    #[test]
    fn abscissa_examples() {
        assert_eq!(spectral_abscissa(&-DenseBlock::identity(5, 5)).unwrap(), -1.0);
        let rot = DenseBlock::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(spectral_abscissa(&rot).unwrap().abs() < 1e-15);
        // Kronecker sum of tridiag(1,-2,1) with n0 = 2 (h = 1): eigenvalues of T are -1, -3.
        let t = DenseBlock::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -2.0]);
        let i2 = DenseBlock::identity(2, 2);
        let a = t.kronecker(&i2).kronecker(&i2) + i2.kronecker(&t).kronecker(&i2) + i2.kronecker(&i2).kronecker(&t);
        assert!((spectral_abscissa(&a).unwrap() + 3.0).abs() < 1e-13);
    }
}
