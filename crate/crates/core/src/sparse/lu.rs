//! Left-looking sparse LU with threshold partial pivoting.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;
use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

#[allow(unused_imports)]
use num_traits::Float;

use crate::dense::C64;

/// Scalars the factorization runs over: `f64` and `C64`.
pub trait Field:
    Copy
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn finite(self) -> bool;
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
}

impl Field for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.re.hypot(self.im)
    }
    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Why a pivot could not be found.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PivotFailure {
    /// No candidate entry in the column at all.
    Structural { column: usize },
    /// Candidates exist but all are negligible.
    Numerical { column: usize, magnitude: f64 },
}

/// `P A Q = L U` with unit lower `L` (diagonal implicit) and `U` storing its diagonal last.
#[derive(Debug, Clone)]
pub struct LuFactors<T> {
    n: usize,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<T>,
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<T>,
    pinv: Vec<usize>,
    q: Vec<usize>,
}

const UNSET: usize = usize::MAX;

/// Column access to a matrix `A − s I` in CSC form.
pub(crate) struct ShiftedCsc<'a, T> {
    pub col_ptr: &'a [usize],
    pub row_idx: &'a [usize],
    pub values: &'a [f64],
    pub shift: T,
}

impl<T: Field> ShiftedCsc<'_, T> {
    /// Entries of column `j`, with the shift folded into the diagonal.
    fn column(&self, j: usize, out: &mut Vec<(usize, T)>) {
        out.clear();
        let mut has_diag = false;
        for p in self.col_ptr[j]..self.col_ptr[j + 1] {
            let i = self.row_idx[p];
            let mut v = T::from_real(self.values[p]);
            if i == j {
                v -= self.shift;
                has_diag = true;
            }
            out.push((i, v));
        }
        if !has_diag && self.shift != T::zero() {
            out.push((j, -self.shift));
        }
    }
}

impl<T: Field> LuFactors<T> {
    /// Factors `A − sI` with columns taken in the order `q`.
    ///
    /// `tol` is the diagonal preference threshold; a pivot below `tiny`
    /// in modulus is reported as numerically singular.
    pub(crate) fn factor(
        a: &ShiftedCsc<'_, T>,
        n: usize,
        q: &[usize],
        tol: f64,
        tiny: f64,
    ) -> Result<Self, PivotFailure> {
        let mut lu = Self {
            n,
            l_ptr: Vec::with_capacity(n + 1),
            l_idx: Vec::new(),
            l_val: Vec::new(),
            u_ptr: Vec::with_capacity(n + 1),
            u_idx: Vec::new(),
            u_val: Vec::new(),
            pinv: vec![UNSET; n],
            q: q.to_vec(),
        };
        lu.l_ptr.push(0);
        lu.u_ptr.push(0);
        let mut x = vec![T::zero(); n];
        let mut marked = vec![false; n];
        let mut stack = Vec::new();
        let mut pstack = Vec::new();
        let mut post = Vec::with_capacity(n);
        let mut col = Vec::new();

        for (k, &c) in q.iter().enumerate() {
            a.column(c, &mut col);
            post.clear();
            for &(i, _) in &col {
                if !marked[i] {
                    lu.dfs(i, &mut marked, &mut stack, &mut pstack, &mut post);
                }
            }
            for &i in &post {
                marked[i] = false;
            }
            for &(i, v) in &col {
                x[i] = v;
            }
            // Reverse post-order is a topological order of the dependencies.
            for &j in post.iter().rev() {
                let jj = lu.pinv[j];
                if jj == UNSET {
                    continue;
                }
                let xj = x[j];
                for p in lu.l_ptr[jj]..lu.l_ptr[jj + 1] {
                    let i = lu.l_idx[p];
                    x[i] -= lu.l_val[p] * xj;
                }
            }
            let mut ipiv = UNSET;
            let mut amax = -1.0f64;
            for &i in post.iter().rev() {
                if lu.pinv[i] == UNSET {
                    let t = x[i].modulus();
                    if t > amax {
                        amax = t;
                        ipiv = i;
                    }
                } else {
                    lu.u_idx.push(lu.pinv[i]);
                    lu.u_val.push(x[i]);
                }
            }
            if ipiv == UNSET {
                return Err(PivotFailure::Structural { column: c });
            }
            if !(amax > tiny) {
                return Err(PivotFailure::Numerical {
                    column: c,
                    magnitude: amax,
                });
            }
            if lu.pinv[c] == UNSET && x[c].modulus() >= tol * amax {
                ipiv = c;
            }
            let pivot = x[ipiv];
            lu.u_idx.push(k);
            lu.u_val.push(pivot);
            lu.u_ptr.push(lu.u_idx.len());
            lu.pinv[ipiv] = k;
            for &i in post.iter().rev() {
                if lu.pinv[i] == UNSET {
                    lu.l_idx.push(i);
                    lu.l_val.push(x[i] / pivot);
                }
                x[i] = T::zero();
            }
            lu.l_ptr.push(lu.l_idx.len());
        }
        for i in lu.l_idx.iter_mut() {
            *i = lu.pinv[*i];
        }
        Ok(lu)
    }

    /// Depth-first search in the graph of the partial `L`, appending in post-order.
    fn dfs(
        &self,
        start: usize,
        marked: &mut [bool],
        stack: &mut Vec<usize>,
        pstack: &mut Vec<usize>,
        post: &mut Vec<usize>,
    ) {
        stack.clear();
        pstack.clear();
        stack.push(start);
        marked[start] = true;
        pstack.push(self.first_child(start));
        while let Some(&j) = stack.last() {
            let jj = self.pinv[j];
            let end = if jj == UNSET { 0 } else { self.l_ptr[jj + 1] };
            let top = pstack.len() - 1;
            let mut p = pstack[top];
            let mut descended = false;
            while p < end {
                let i = self.l_idx[p];
                p += 1;
                if !marked[i] {
                    pstack[top] = p;
                    marked[i] = true;
                    stack.push(i);
                    pstack.push(self.first_child(i));
                    descended = true;
                    break;
                }
            }
            if !descended {
                stack.pop();
                pstack.pop();
                post.push(j);
            }
        }
    }

    fn first_child(&self, j: usize) -> usize {
        let jj = self.pinv[j];
        if jj == UNSET {
            0
        } else {
            self.l_ptr[jj]
        }
    }

    /// Overwrites `b` with `(A − sI)⁻¹ b`.
    pub(crate) fn solve_in_place(&self, b: &mut [T], work: &mut [T]) {
        let n = self.n;
        for i in 0..n {
            work[self.pinv[i]] = b[i];
        }
        for j in 0..n {
            let xj = work[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                let i = self.l_idx[p];
                work[i] -= self.l_val[p] * xj;
            }
        }
        for j in (0..n).rev() {
            let end = self.u_ptr[j + 1] - 1;
            let xj = work[j] / self.u_val[end];
            work[j] = xj;
            for p in self.u_ptr[j]..end {
                let i = self.u_idx[p];
                work[i] -= self.u_val[p] * xj;
            }
        }
        for k in 0..n {
            b[self.q[k]] = work[k];
        }
    }

    /// Stored entries in `L` and `U`.
    pub fn nnz(&self) -> usize {
        self.l_idx.len() + self.u_idx.len() + self.n
    }
}
