//! Low-rank solvers for large continuous-time algebraic Riccati equations
//!
//! ```text
//! A X + X Aᵀ − X B Bᵀ X + Cᵀ C = 0
//! ```
//!
//! with `A` large and sparse and `B`, `C` thin. The main entry point is
//! [`pnk::pnk_solve`], a projected Newton–Kleinman iteration in which every
//! Newton step is solved on one shared, growing extended or rational block
//! Krylov space, with an exact line search evaluated on projected data.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the command
//! line and timing live in the companion `pnk-bench` crate.

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod dense;
pub mod krylov;
pub mod pnk;
pub mod sparse;
#[cfg(test)]
mod testutil;

pub use dense::{DenseBlock, C64};
pub use pnk::{pnk_solve, PnkConfig, SolveReport};
pub use sparse::SparseOperator;

/// Factor `Z` of a symmetric positive semidefinite matrix `X = Z Zᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor(pub DenseBlock);

impl LowRankFactor {
    pub fn empty(n: usize) -> Self {
        Self(DenseBlock::zeros(n, 0))
    }

    pub fn rank(&self) -> usize {
        self.0.ncols()
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// The represented matrix `Z Zᵀ`; intended for small `n`.
    pub fn to_dense(&self) -> DenseBlock {
        &self.0 * self.0.transpose()
    }
}
