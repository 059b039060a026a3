//! Test problem generators.

use pnk_core::dense::DenseBlock;
use pnk_core::sparse::{spmm, spmm_transpose, SparseOperator};
use rand_pcg::rand_core::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use crate::{BenchError, Result};

/// Uniform `[0, 1)` stream from a seeded PCG64; 53 random bits per sample.
pub struct Uniform(Pcg64);

impl Uniform {
    pub fn new(seed: u64) -> Self {
        Self(Pcg64::seed_from_u64(seed))
    }

    pub fn sample(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// 3D finite-difference Laplacian on an `n0 × n0 × n0` grid.
///
/// `A = T⊗I⊗I + I⊗T⊗I + I⊗I⊗T` with `T = tridiag(1, −2, 1)/(n0 − 1)²`.
pub fn gen_laplacian3d(n0: usize) -> Result<SparseOperator> {
    if n0 < 2 {
        return Err(BenchError::Config("n0 must be at least 2".into()));
    }
    let h = 1.0 / ((n0 - 1) * (n0 - 1)) as f64;
    let n = n0 * n0 * n0;
    let mut trip = Vec::with_capacity(7 * n);
    for z in 0..n0 {
        for y in 0..n0 {
            for x in 0..n0 {
                let i = x + n0 * (y + n0 * z);
                trip.push((i, i, -6.0 * h));
                for (c, stride) in [(x, 1), (y, n0), (z, n0 * n0)] {
                    if c > 0 {
                        trip.push((i, i - stride, h));
                    }
                    if c + 1 < n0 {
                        trip.push((i, i + stride, h));
                    }
                }
            }
        }
    }
    Ok(SparseOperator::from_triplets(n, &trip)?)
}

/// `n × cols` block with entries `scale · U[0, 1)`, filled column by column.
pub fn gen_scaled_random(n: usize, cols: usize, scale: f64, seed: u64) -> DenseBlock {
    let mut u = Uniform::new(seed);
    let mut m = DenseBlock::zeros(n, cols);
    for j in 0..cols {
        for i in 0..n {
            m[(i, j)] = scale * u.sample();
        }
    }
    m
}

/// Largest eigenvalue of the symmetric part of `M`, from above.
///
/// Dense for small `n`, otherwise Lanczos with full reorthogonalization;
/// the returned value is the top Ritz value plus its residual norm.
pub fn symmetric_part_max_eigenvalue(m: &SparseOperator) -> Result<f64> {
    let n = m.n();
    if n == 0 {
        return Err(BenchError::Eigen("empty matrix".into()));
    }
    if n <= 400 {
        let d = m.to_dense();
        let s = (&d + d.transpose()) * 0.5;
        return Ok(s.symmetric_eigenvalues().max());
    }
    let apply = |x: &DenseBlock| -> Result<DenseBlock> { Ok((spmm(m, x)? + spmm_transpose(m, x)?) * 0.5) };
    let kmax = n.min(400);
    let mut rng = Uniform::new(0x5eed);
    let mut q = DenseBlock::from_fn(n, 1, |_, _| 1.0 + 0.1 * rng.sample());
    q /= q.norm();
    let mut basis = DenseBlock::zeros(n, kmax + 1);
    basis.set_column(0, &q.column(0));
    let mut alpha = Vec::with_capacity(kmax);
    let mut beta: Vec<f64> = Vec::with_capacity(kmax);
    for k in 0..kmax {
        let v = basis.column(k).into_owned();
        let mut w = apply(&DenseBlock::from_column_slice(n, 1, v.as_slice()))?;
        let a = v.dot(&w.column(0));
        alpha.push(a);
        for _ in 0..2 {
            let vk = basis.columns(0, k + 1);
            let coeff = vk.tr_mul(&w);
            w -= vk * coeff;
        }
        let b = w.norm();
        beta.push(b);
        let done = k + 1 == kmax || b <= f64::EPSILON * a.abs().max(1.0);
        if (k + 1) % 10 == 0 || done {
            let dim = k + 1;
            let mut t = DenseBlock::zeros(dim, dim);
            for i in 0..dim {
                t[(i, i)] = alpha[i];
                if i + 1 < dim {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = t.symmetric_eigen();
            let (idx, &theta) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.total_cmp(y.1))
                .expect("nonempty tridiagonal");
            let res = b * eig.eigenvectors[(dim - 1, idx)].abs();
            if done || res <= 1e-10 * theta.abs().max(f64::MIN_POSITIVE) {
                return Ok(theta + res);
            }
        }
        basis.set_column(k + 1, &(w.column(0) / b));
    }
    Err(BenchError::Eigen("Lanczos did not converge".into()))
}

/// `A = −T − (λ̄ + 1) I` with `λ̄` the largest eigenvalue of `(−T − Tᵀ)/2`,
/// so that the symmetric part of `A` is at most `−I`.
pub fn shift_to_negdef(t: &SparseOperator) -> Result<SparseOperator> {
    let neg = t.affine(-1.0, 0.0);
    let lambda = symmetric_part_max_eigenvalue(&neg)?;
    Ok(t.affine(-1.0, -(lambda + 1.0)))
}

/// Nonsymmetric stable fixture on an `n0 × n0` grid.
///
/// A five-point pattern with random positive couplings plus a random skew
/// part, shifted to be negative definite by [`shift_to_negdef`].
pub fn gen_synthetic_nonsymmetric(n0: usize, seed: u64) -> Result<SparseOperator> {
    if n0 < 2 {
        return Err(BenchError::Config("n0 must be at least 2".into()));
    }
    let n = n0 * n0;
    let mut u = Uniform::new(seed);
    let mut trip = Vec::with_capacity(5 * n);
    for y in 0..n0 {
        for x in 0..n0 {
            let i = x + n0 * y;
            trip.push((i, i, 4.0 + u.sample()));
            for (ok, j) in [(x + 1 < n0, i + 1), (y + 1 < n0, i + n0)] {
                if ok {
                    let sym = u.sample();
                    let skew = 2.0 * u.sample();
                    trip.push((i, j, sym + skew));
                    trip.push((j, i, sym - skew));
                }
            }
        }
    }
    let t = SparseOperator::from_triplets(n, &trip)?;
    shift_to_negdef(&t)
}
