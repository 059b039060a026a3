//! Shared fixtures for unit tests.

use alloc::vec::Vec;

use crate::dense::DenseBlock;
use crate::sparse::SparseOperator;

pub(crate) fn lcg(seed: u64) -> impl FnMut() -> f64 {
    let mut s = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
    move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    }
}

pub(crate) fn random(rows: usize, cols: usize, seed: u64) -> DenseBlock {
    let mut r = lcg(seed);
    DenseBlock::from_fn(rows, cols, |_, _| r())
}

pub(crate) fn laplacian3d(n0: usize) -> SparseOperator {
    let h2 = ((n0 - 1) * (n0 - 1)) as f64;
    let n = n0 * n0 * n0;
    let mut trip = Vec::new();
    for z in 0..n0 {
        for y in 0..n0 {
            for x in 0..n0 {
                let i = x + n0 * (y + n0 * z);
                trip.push((i, i, -6.0 * h2));
                let coords = [(x, 1), (y, n0), (z, n0 * n0)];
                for &(c, stride) in &coords {
                    if c > 0 {
                        trip.push((i, i - stride, h2));
                    }
                    if c + 1 < n0 {
                        trip.push((i, i + stride, h2));
                    }
                }
            }
        }
    }
    SparseOperator::from_triplets(n, &trip).unwrap()
}

/// Dense nonsymmetric matrix with symmetric part below `-1`.
pub(crate) fn negdef_dense(n: usize, seed: u64) -> DenseBlock {
    let g = random(n, n, seed);
    let sym = (&g + g.transpose()) * 0.5;
    let skew = (&g - g.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigenvalues();
    let top = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    sym - DenseBlock::identity(n, n) * (top + 1.0) + skew * 2.0
}

pub(crate) fn negdef_sparse(n: usize, seed: u64) -> SparseOperator {
    SparseOperator::from_dense(&negdef_dense(n, seed)).unwrap()
}
