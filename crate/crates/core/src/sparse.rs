//! Sparse storage, products and direct solves for the large coefficient matrix.

mod lu;
pub mod ordering;

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::dense::{DenseBlock, C64};
use lu::ShiftedCsc;
pub use lu::{Field, LuFactors, PivotFailure};

/// Errors raised by the sparse kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SparseError {
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
    #[error("invalid compressed-column structure: {0}")]
    Structure(&'static str),
    #[error("non-finite value")]
    NonFinite,
    #[error("structurally singular: no pivot candidate in column {column}")]
    StructurallySingular { column: usize },
    #[error("numerically singular: pivot {magnitude:e} in column {column}")]
    NumericallySingular { column: usize, magnitude: f64 },
    #[error("complex factorization cannot produce a real solution")]
    ComplexShift,
    #[error("capacitance matrix is singular (condition estimate {0:e})")]
    SingularCapacitance(f64),
}

pub type Result<T> = core::result::Result<T, SparseError>;

/// Square sparse real matrix in compressed-column form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut count = vec![0usize; n + 1];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(SparseError::Structure("triplet index out of range"));
            }
            if !v.is_finite() {
                return Err(SparseError::NonFinite);
            }
            count[j + 1] += 1;
        }
        for j in 0..n {
            count[j + 1] += count[j];
        }
        let mut next = count.clone();
        let mut entries = vec![(0usize, 0.0f64); triplets.len()];
        for &(i, j, v) in triplets {
            entries[next[j]] = (i, v);
            next[j] += 1;
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        col_ptr.push(0);
        for j in 0..n {
            let col = &mut entries[count[j]..count[j + 1]];
            col.sort_by_key(|e| e.0);
            for &(i, v) in col.iter() {
                if row_idx.len() > col_ptr[j] && *row_idx.last().unwrap() == i {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self::assemble(n, col_ptr, row_idx, values))
    }

    /// Builds from raw compressed-column arrays, validating them.
    pub fn from_csc(n: usize, col_ptr: Vec<usize>, row_idx: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if col_ptr.len() != n + 1 || col_ptr[0] != 0 || row_idx.len() != values.len() {
            return Err(SparseError::Structure("array lengths"));
        }
        if col_ptr[n] != row_idx.len() || col_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(SparseError::Structure("column pointers"));
        }
        for j in 0..n {
            let rows = &row_idx[col_ptr[j]..col_ptr[j + 1]];
            if rows.iter().any(|&i| i >= n) || rows.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SparseError::Structure("row indices must be sorted and in range"));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SparseError::NonFinite);
        }
        Ok(Self::assemble(n, col_ptr, row_idx, values))
    }

    fn assemble(n: usize, col_ptr: Vec<usize>, row_idx: Vec<usize>, values: Vec<f64>) -> Self {
        let mut op = Self {
            n,
            col_ptr,
            row_idx,
            values,
            symmetric: false,
        };
        op.symmetric = op.detect_symmetry();
        op
    }

    fn detect_symmetry(&self) -> bool {
        let t = self.transpose_parts();
        t.0 == self.col_ptr && t.1 == self.row_idx && t.2 == self.values
    }

    fn transpose_parts(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let n = self.n;
        let mut ptr = vec![0usize; n + 1];
        for &i in &self.row_idx {
            ptr[i + 1] += 1;
        }
        for i in 0..n {
            ptr[i + 1] += ptr[i];
        }
        let mut next = ptr.clone();
        let mut idx = vec![0usize; self.row_idx.len()];
        let mut val = vec![0.0; self.values.len()];
        for j in 0..n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                idx[next[i]] = j;
                val[next[i]] = self.values[p];
                next[i] += 1;
            }
        }
        (ptr, idx, val)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
            symmetric: true,
        }
    }

    /// Sparse copy of a dense square matrix, dropping exact zeros.
    pub fn from_dense(m: &DenseBlock) -> Result<Self> {
        if !m.is_square() {
            return Err(SparseError::Dimension("dense source must be square"));
        }
        let n = m.nrows();
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let v = m[(i, j)];
                if !v.is_finite() {
                    return Err(SparseError::NonFinite);
                }
                if v != 0.0 {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self::assemble(n, col_ptr, row_idx, values))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn transpose(&self) -> Self {
        let (col_ptr, row_idx, values) = self.transpose_parts();
        Self {
            n: self.n,
            col_ptr,
            row_idx,
            values,
            symmetric: self.symmetric,
        }
    }

    /// Iterates over stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |j| {
            (self.col_ptr[j]..self.col_ptr[j + 1]).map(move |p| (self.row_idx[p], j, self.values[p]))
        })
    }

    pub fn to_dense(&self) -> DenseBlock {
        let mut m = DenseBlock::zeros(self.n, self.n);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    /// `α A + β I`.
    pub fn affine(&self, alpha: f64, beta: f64) -> Self {
        let mut trip: Vec<(usize, usize, f64)> = self.triplets().map(|(i, j, v)| (i, j, alpha * v)).collect();
        if beta != 0.0 {
            trip.extend((0..self.n).map(|i| (i, i, beta)));
        }
        Self::from_triplets(self.n, &trip).expect("indices of a valid operator")
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| {
                self.values[self.col_ptr[j]..self.col_ptr[j + 1]]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Fill-reducing elimination order for `A + Aᵀ`.
    pub fn fill_reducing_ordering(&self) -> Vec<usize> {
        ordering::minimum_degree(self.n, &self.col_ptr, &self.row_idx)
    }

    /// `y += (A − sI) x` for one column.
    fn shifted_mul_add<T: Field>(&self, shift: T, x: &[T], y: &mut [T]) {
        for j in 0..self.n {
            let xj = x[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[p]] += T::from_real(self.values[p]) * xj;
            }
            y[j] -= shift * xj;
        }
    }
}

/// `A X`.
pub fn spmm(a: &SparseOperator, x: &DenseBlock) -> Result<DenseBlock> {
    if x.nrows() != a.n {
        return Err(SparseError::Dimension("spmm operand rows"));
    }
    let mut y = DenseBlock::zeros(a.n, x.ncols());
    for c in 0..x.ncols() {
        let xc = x.column(c);
        let mut yc = y.column_mut(c);
        for j in 0..a.n {
            let xj = xc[j];
            if xj == 0.0 {
                continue;
            }
            for p in a.col_ptr[j]..a.col_ptr[j + 1] {
                yc[a.row_idx[p]] += a.values[p] * xj;
            }
        }
    }
    Ok(y)
}

/// `Aᵀ X`.
pub fn spmm_transpose(a: &SparseOperator, x: &DenseBlock) -> Result<DenseBlock> {
    if x.nrows() != a.n {
        return Err(SparseError::Dimension("spmm operand rows"));
    }
    let mut y = DenseBlock::zeros(a.n, x.ncols());
    for c in 0..x.ncols() {
        let xc = x.column(c);
        for j in 0..a.n {
            let mut acc = 0.0;
            for p in a.col_ptr[j]..a.col_ptr[j + 1] {
                acc += a.values[p] * xc[a.row_idx[p]];
            }
            y[(j, c)] = acc;
        }
    }
    Ok(y)
}

#[derive(Debug, Clone)]
enum Factors {
    Real(LuFactors<f64>),
    Complex(LuFactors<C64>),
}

/// Reusable LU factorization of `A − sI`.
#[derive(Debug, Clone)]
pub struct Factorization<'a> {
    a: &'a SparseOperator,
    shift: C64,
    factors: Factors,
}

const DIAGONAL_PREFERENCE: f64 = 0.1;

/// Factors `A − shift·I` after a fill-reducing ordering.
pub fn factorize(a: &SparseOperator, shift: C64) -> Result<Factorization<'_>> {
    let order = a.fill_reducing_ordering();
    factorize_with_ordering(a, shift, &order)
}

/// As [`factorize`] with a precomputed column order.
pub fn factorize_with_ordering<'a>(a: &'a SparseOperator, shift: C64, order: &[usize]) -> Result<Factorization<'a>> {
    if order.len() != a.n {
        return Err(SparseError::Dimension("ordering length"));
    }
    if !(shift.re.is_finite() && shift.im.is_finite()) {
        return Err(SparseError::NonFinite);
    }
    let scale = a.norm1() + shift.re.hypot(shift.im);
    let tiny = 8.0 * (a.n as f64) * f64::EPSILON * scale;
    let map_err = |e: PivotFailure| match e {
        PivotFailure::Structural { column } => SparseError::StructurallySingular { column },
        PivotFailure::Numerical { column, magnitude } => SparseError::NumericallySingular { column, magnitude },
    };
    let factors = if shift.im == 0.0 {
        let view = ShiftedCsc {
            col_ptr: &a.col_ptr,
            row_idx: &a.row_idx,
            values: &a.values,
            shift: shift.re,
        };
        Factors::Real(LuFactors::factor(&view, a.n, order, DIAGONAL_PREFERENCE, tiny).map_err(map_err)?)
    } else {
        let view = ShiftedCsc {
            col_ptr: &a.col_ptr,
            row_idx: &a.row_idx,
            values: &a.values,
            shift,
        };
        Factors::Complex(LuFactors::factor(&view, a.n, order, DIAGONAL_PREFERENCE, tiny).map_err(map_err)?)
    };
    Ok(Factorization { a, shift, factors })
}

fn refined_solve<T: Field>(a: &SparseOperator, shift: T, lu: &LuFactors<T>, b: &[T], x: &mut [T], work: &mut [T]) {
    let n = a.n;
    x.copy_from_slice(b);
    lu.solve_in_place(x, work);
    let mut r: Vec<T> = b.to_vec();
    let mut ax = vec![T::zero(); n];
    a.shifted_mul_add(shift, x, &mut ax);
    for i in 0..n {
        r[i] -= ax[i];
    }
    lu.solve_in_place(&mut r, work);
    for i in 0..n {
        x[i] += r[i];
    }
}

impl<'a> Factorization<'a> {
    pub fn operator(&self) -> &'a SparseOperator {
        self.a
    }

    pub fn shift(&self) -> C64 {
        self.shift
    }

    pub fn n(&self) -> usize {
        self.a.n
    }

    /// Stored entries of the triangular factors.
    pub fn factor_nnz(&self) -> usize {
        match &self.factors {
            Factors::Real(f) => f.nnz(),
            Factors::Complex(f) => f.nnz(),
        }
    }

    /// `(A − sI)⁻¹ B` for a real shift, with one refinement step.
    pub fn solve(&self, rhs: &DenseBlock) -> Result<DenseBlock> {
        let n = self.a.n;
        if rhs.nrows() != n {
            return Err(SparseError::Dimension("right-hand side rows"));
        }
        let Factors::Real(lu) = &self.factors else {
            return Err(SparseError::ComplexShift);
        };
        let mut out = DenseBlock::zeros(n, rhs.ncols());
        let mut work = vec![0.0; n];
        let mut x = vec![0.0; n];
        for c in 0..rhs.ncols() {
            let b: Vec<f64> = rhs.column(c).iter().copied().collect();
            refined_solve(self.a, self.shift.re, lu, &b, &mut x, &mut work);
            out.column_mut(c).copy_from_slice(&x);
        }
        Ok(out)
    }

    /// `(A − sI)⁻¹ B` for complex data and any shift.
    pub fn solve_complex(&self, rhs: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        let n = self.a.n;
        if rhs.nrows() != n {
            return Err(SparseError::Dimension("right-hand side rows"));
        }
        match &self.factors {
            Factors::Complex(lu) => {
                let mut out = DMatrix::<C64>::zeros(n, rhs.ncols());
                let mut work = vec![C64::new(0.0, 0.0); n];
                let mut x = vec![C64::new(0.0, 0.0); n];
                for c in 0..rhs.ncols() {
                    let b: Vec<C64> = rhs.column(c).iter().copied().collect();
                    refined_solve(self.a, self.shift, lu, &b, &mut x, &mut work);
                    out.column_mut(c).copy_from_slice(&x);
                }
                Ok(out)
            }
            Factors::Real(_) => {
                let re = self.solve(&rhs.map(|z| z.re))?;
                let im = self.solve(&rhs.map(|z| z.im))?;
                Ok(DMatrix::from_fn(n, rhs.ncols(), |i, j| {
                    C64::new(re[(i, j)], im[(i, j)])
                }))
            }
        }
    }

    /// `(A − sI) X` for real `X`; the shift must be real.
    pub fn apply(&self, x: &DenseBlock) -> Result<DenseBlock> {
        let mut y = spmm(self.a, x)?;
        if self.shift.re != 0.0 {
            y -= x * self.shift.re;
        }
        Ok(y)
    }
}

/// Free-function form of [`Factorization::solve`].
pub fn solve(f: &Factorization<'_>, rhs: &DenseBlock) -> Result<DenseBlock> {
    f.solve(rhs)
}

/// Solver for `(A − sI − U Vt) x = b` via the Sherman–Morrison–Woodbury identity.
#[derive(Debug, Clone)]
pub struct SmwSolver<'f, 'a> {
    base: &'f Factorization<'a>,
    u: DenseBlock,
    vt: DenseBlock,
    ainv_u: DenseBlock,
    capacitance: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

const CAPACITANCE_COND_LIMIT: f64 = 1e14;

impl<'f, 'a> SmwSolver<'f, 'a> {
    pub fn new(base: &'f Factorization<'a>, u: &DenseBlock, vt: &DenseBlock) -> Result<Self> {
        let n = base.n();
        let k = u.ncols();
        if u.nrows() != n || vt.ncols() != n || vt.nrows() != k {
            return Err(SparseError::Dimension("SMW update factors"));
        }
        if u.iter().chain(vt.iter()).any(|v| !v.is_finite()) {
            return Err(SparseError::NonFinite);
        }
        let ainv_u = base.solve(u)?;
        let capacitance = if k == 0 || u.norm() == 0.0 || vt.norm() == 0.0 {
            None
        } else {
            let cap = DenseBlock::identity(k, k) - vt * &ainv_u;
            let lu = cap.clone().lu();
            let inv = lu
                .try_inverse()
                .ok_or(SparseError::SingularCapacitance(f64::INFINITY))?;
            let cond = norm1_dense(&cap) * norm1_dense(&inv);
            if !(cond < CAPACITANCE_COND_LIMIT) {
                return Err(SparseError::SingularCapacitance(cond));
            }
            Some(lu)
        };
        Ok(Self {
            base,
            u: u.clone(),
            vt: vt.clone(),
            ainv_u,
            capacitance,
        })
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn solve(&self, rhs: &DenseBlock) -> Result<DenseBlock> {
        let x0 = self.base.solve(rhs)?;
        let Some(cap) = &self.capacitance else {
            return Ok(x0);
        };
        let t = cap
            .solve(&(&self.vt * &x0))
            .ok_or(SparseError::SingularCapacitance(f64::INFINITY))?;
        Ok(x0 + &self.ainv_u * t)
    }

    /// `(A − sI − U Vt) X`.
    pub fn apply(&self, x: &DenseBlock) -> Result<DenseBlock> {
        let mut y = self.base.apply(x)?;
        if self.u.ncols() > 0 {
            y -= &self.u * (&self.vt * x);
        }
        Ok(y)
    }

    /// `(A − sI − U Vt)ᵀ X`, real shift assumed.
    pub fn apply_transpose(&self, x: &DenseBlock) -> Result<DenseBlock> {
        let mut y = spmm_transpose(self.base.operator(), x)?;
        let s = self.base.shift().re;
        if s != 0.0 {
            y -= x * s;
        }
        if self.u.ncols() > 0 {
            y -= self.vt.transpose() * (self.u.transpose() * x);
        }
        Ok(y)
    }
}

fn norm1_dense(m: &DenseBlock) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// One-shot solve of `(A − sI − U Vt) x = rhs`, where `F` factors `A − sI`.
pub fn smw_solve(f: &Factorization<'_>, u: &DenseBlock, vt: &DenseBlock, rhs: &DenseBlock) -> Result<DenseBlock> {
    SmwSolver::new(f, u, vt)?.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
        move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        }
    }

    fn random(rows: usize, cols: usize, seed: u64) -> DenseBlock {
        let mut r = lcg(seed);
        DenseBlock::from_fn(rows, cols, |_, _| r())
    }

    /// Kronecker-sum Laplacian with `tridiag(1, -2, 1) / (n0 - 1)²` per direction.
    pub(crate) fn laplacian3d(n0: usize) -> SparseOperator {
        let h2 = ((n0 - 1) * (n0 - 1)) as f64;
        let n = n0 * n0 * n0;
        let mut trip = Vec::new();
        for z in 0..n0 {
            for y in 0..n0 {
                for x in 0..n0 {
                    let i = x + n0 * (y + n0 * z);
                    trip.push((i, i, -6.0 * h2));
                    let mut link = |j: usize| trip.push((i, j, h2));
                    if x > 0 {
                        link(i - 1);
                    }
                    if x + 1 < n0 {
                        link(i + 1);
                    }
                    if y > 0 {
                        link(i - n0);
                    }
                    if y + 1 < n0 {
                        link(i + n0);
                    }
                    if z > 0 {
                        link(i - n0 * n0);
                    }
                    if z + 1 < n0 {
                        link(i + n0 * n0);
                    }
                }
            }
        }
        SparseOperator::from_triplets(n, &trip).unwrap()
    }

    fn random_sparse(n: usize, density: f64, seed: u64) -> SparseOperator {
        let mut r = lcg(seed);
        let mut trip = Vec::new();
        for j in 0..n {
            trip.push((j, j, -4.0 - r().abs()));
            for i in 0..n {
                if i != j && r() + 0.5 < density {
                    trip.push((i, j, r()));
                }
            }
        }
        SparseOperator::from_triplets(n, &trip).unwrap()
    }

    #[test]
    fn triplets_sum_duplicates_and_detect_symmetry() {
        let a = SparseOperator::from_triplets(2, &[(0, 0, -1.0), (0, 0, -1.0), (1, 1, -2.0), (0, 1, 1.0), (1, 0, 1.0)])
            .unwrap();
        assert_eq!(a.nnz(), 4);
        assert!(a.is_symmetric());
        assert_eq!(a.to_dense(), DenseBlock::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -2.0]));
        let b = SparseOperator::from_triplets(2, &[(0, 1, 1.0)]).unwrap();
        assert!(!b.is_symmetric());
        assert!(SparseOperator::from_triplets(2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn csc_validation() {
        assert!(SparseOperator::from_csc(2, vec![0, 1, 2], vec![0, 1], vec![1.0, 1.0]).is_ok());
        assert!(SparseOperator::from_csc(2, vec![0, 2, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(SparseOperator::from_csc(2, vec![0, 1, 2], vec![0, 1], vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn spmm_examples() {
        let x = random(6, 3, 1);
        assert_eq!(spmm(&SparseOperator::identity(6), &x).unwrap(), x);
        let a = random_sparse(40, 0.2, 2);
        let e = DenseBlock::identity(40, 40);
        let ae = spmm(&a, &e.columns(7, 1).into_owned()).unwrap();
        assert_eq!(ae, a.to_dense().columns(7, 1).into_owned());
        let x = random(40, 5, 3);
        let dense = a.to_dense();
        assert!((spmm(&a, &x).unwrap() - &dense * &x).norm() < 1e-13 * x.norm() * dense.norm());
        assert!((spmm_transpose(&a, &x).unwrap() - dense.transpose() * &x).norm() < 1e-13 * x.norm() * dense.norm());
        assert!(spmm(&a, &random(39, 1, 4)).is_err());
    }

    #[test]
    fn minus_identity_solve() {
        let a = SparseOperator::identity(5).affine(-1.0, 0.0);
        let f = factorize(&a, C64::new(0.0, 0.0)).unwrap();
        let b = random(5, 2, 9);
        assert!((f.solve(&b).unwrap() + &b).norm() < 1e-15);
        assert_eq!(f.solve(&DenseBlock::zeros(5, 1)).unwrap().norm(), 0.0);
    }

    #[test]
    fn laplacian_backward_error() {
        let a = laplacian3d(5);
        let f = factorize(&a, C64::new(0.0, 0.0)).unwrap();
        for seed in 0..20 {
            let b = random(a.n(), 1, 100 + seed);
            let x = f.solve(&b).unwrap();
            let r = spmm(&a, &x).unwrap() - &b;
            assert!(r.norm() <= 1e-12 * b.norm());
        }
    }

    #[test]
    fn exact_eigenvalue_shift_is_singular() {
        // Eigenvalues of the n0 = 3 Laplacian: sum of three of {-2 ± √2, -2} times (n0-1)² = 4.
        let a = laplacian3d(3);
        let lam = 4.0 * (3.0 * (-2.0));
        let err = factorize(&a, C64::new(lam, 0.0)).unwrap_err();
        assert!(matches!(err, SparseError::NumericallySingular { .. }), "{err:?}");
        let z = SparseOperator::from_triplets(3, &[(0, 0, 1.0), (1, 1, 1.0), (0, 2, 1.0)]).unwrap();
        assert!(matches!(
            factorize(&z, C64::new(0.0, 0.0)),
            Err(SparseError::StructurallySingular { .. })
        ));
    }

    #[test]
    fn block_solve_matches_dense_oracle() {
        for (n, seed) in [(30usize, 1u64), (120, 2), (200, 3)] {
            let a = random_sparse(n, 0.05, seed);
            let f = factorize(&a, C64::new(0.0, 0.0)).unwrap();
            let b = random(n, 4, seed + 10);
            let x = f.solve(&b).unwrap();
            let oracle = a.to_dense().lu().solve(&b).unwrap();
            assert!((&x - &oracle).norm() <= 1e-10 * oracle.norm());
            for c in 0..4 {
                let xc = f.solve(&b.columns(c, 1).into_owned()).unwrap();
                assert_eq!(xc.column(0), x.column(c));
            }
        }
    }

    #[test]
    fn complex_shift_backward_error() {
        let a = random_sparse(60, 0.1, 8);
        let s = C64::new(0.3, 1.7);
        let f = factorize(&a, s).unwrap();
        assert_eq!(f.solve(&random(60, 1, 1)), Err(SparseError::ComplexShift));
        let mut r = lcg(77);
        let b = DMatrix::<C64>::from_fn(60, 2, |_, _| C64::new(r(), r()));
        let x = f.solve_complex(&b).unwrap();
        let ad = a.to_dense().map(|v| C64::new(v, 0.0)) - DMatrix::<C64>::identity(60, 60) * s;
        let res = &ad * &x - &b;
        let nrm = |m: &DMatrix<C64>| m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(nrm(&res) <= 1e-10 * nrm(&b));
    }

    #[test]
    fn unsymmetric_pivoting_needed() {
        // Zero diagonal forces off-diagonal pivots.
        let a = SparseOperator::from_triplets(3, &[(1, 0, 2.0), (0, 1, 3.0), (2, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let f = factorize(&a, C64::new(0.0, 0.0)).unwrap();
        let b = random(3, 1, 5);
        let x = f.solve(&b).unwrap();
        assert!((spmm(&a, &x).unwrap() - &b).norm() < 1e-14);
    }

    #[test]
    fn smw_examples() {
        let a = random_sparse(5, 0.5, 21);
        let f = factorize(&a, C64::new(0.0, 0.0)).unwrap();
        let b = random(5, 2, 22);
        let plain = f.solve(&b).unwrap();
        assert_eq!(
            smw_solve(&f, &DenseBlock::zeros(5, 1), &DenseBlock::zeros(1, 5), &b).unwrap(),
            plain
        );

        let u = random(5, 1, 23);
        let vt = random(1, 5, 24);
        let x = smw_solve(&f, &u, &vt, &b).unwrap();
        let oracle = (a.to_dense() - &u * &vt).lu().solve(&b).unwrap();
        assert!((&x - &oracle).norm() <= 1e-12 * oracle.norm());

        let a = random_sparse(50, 0.1, 25);
        let f = factorize(&a, C64::new(0.0, 0.0)).unwrap();
        let u = random(50, 3, 26);
        let vt = random(3, 50, 27);
        let w = random(50, 2, 28);
        let rhs = spmm(&a, &w).unwrap() - &u * (&vt * &w);
        let x = smw_solve(&f, &u, &vt, &rhs).unwrap();
        assert!((&x - &w).norm() <= 1e-9 * w.norm());
    }

    #[test]
    fn smw_detects_singular_capacitance() {
        // A = -I and U Vt = -I makes A - U Vt singular.
        let a = SparseOperator::identity(2).affine(-1.0, 0.0);
        let f = factorize(&a, C64::new(0.0, 0.0)).unwrap();
        let u = -DenseBlock::identity(2, 2);
        let vt = DenseBlock::identity(2, 2);
        let err = smw_solve(&f, &u, &vt, &DenseBlock::identity(2, 1)).unwrap_err();
        assert!(matches!(err, SparseError::SingularCapacitance(_)));
    }
}
