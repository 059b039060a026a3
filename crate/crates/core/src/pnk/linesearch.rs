//! Exact line search on the residual quartic.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dense::{eigenvalues, DenseBlock};

/// Coefficients of `p(λ) = ‖R(X + λZ)‖²_F`.
///
/// `p(λ) = (1−λ)²α + λ²β + λ⁴δ + 2λ(1−λ)γ − 2λ²(1−λ)ε − 2λ³ζ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LineSearchCoeffs {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub zeta: f64,
}

/// Failure of [`minimize_quartic`].
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum LineSearchError {
    #[error("line search needs a positive current residual (alpha = {0:e})")]
    NonPositiveAlpha(f64),
    #[error("no descent value of the residual quartic on (0, 2]")]
    Degenerate,
}

impl LineSearchCoeffs {
    /// Monomial coefficients `[c0, c1, c2, c3, c4]` of `p`.
    pub fn monomials(&self) -> [f64; 5] {
        let Self {
            alpha,
            beta,
            gamma,
            delta,
            epsilon,
            zeta,
        } = *self;
        [
            alpha,
            -2.0 * alpha + 2.0 * gamma,
            alpha + beta - 2.0 * gamma - 2.0 * epsilon,
            2.0 * epsilon - 2.0 * zeta,
            delta,
        ]
    }

    pub fn p(&self, lambda: f64) -> f64 {
        let c = self.monomials();
        (((c[4] * lambda + c[3]) * lambda + c[2]) * lambda + c[1]) * lambda + c[0]
    }

    /// Derivative `p′(λ)`.
    pub fn dp(&self, lambda: f64) -> f64 {
        let c = self.monomials();
        ((4.0 * c[4] * lambda + 3.0 * c[3]) * lambda + 2.0 * c[2]) * lambda + c[1]
    }

    fn ddp(&self, lambda: f64) -> f64 {
        let c = self.monomials();
        (12.0 * c[4] * lambda + 6.0 * c[3]) * lambda + 2.0 * c[2]
    }
}

/// Real roots of `d[0] + d[1] x + d[2] x² + d[3] x³`.
fn cubic_real_roots(d: [f64; 4]) -> Option<Vec<f64>> {
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Some(Vec::new());
    }
    let d = d.map(|v| v / scale);
    let mut roots = Vec::new();
    if d[3].abs() > 1e-13 {
        let comp = DenseBlock::from_row_slice(
            3,
            3,
            &[-d[2] / d[3], -d[1] / d[3], -d[0] / d[3], 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        );
        for z in eigenvalues(&comp).ok()? {
            if z.im.abs() <= 1e-7 * (1.0 + z.re.abs()) {
                roots.push(z.re);
            }
        }
    } else if d[2].abs() > 1e-13 {
        let disc = d[1] * d[1] - 4.0 * d[2] * d[0];
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let t = -0.5 * (d[1] + d[1].signum() * sq);
            roots.push(t / d[2]);
            if t != 0.0 {
                roots.push(d[0] / t);
            }
        }
    } else if d[1] != 0.0 {
        roots.push(-d[0] / d[1]);
    }
    Some(roots)
}

/// Minimizer of the residual quartic over `(0, 2]`.
///
/// Candidates are the real stationary points in `(0, 2]` and the endpoint
/// `2`; a uniform grid takes over if the cubic roots cannot be trusted or
/// give no descent.
pub fn minimize_quartic(c: &LineSearchCoeffs) -> Result<f64, LineSearchError> {
    if !(c.alpha > 0.0) {
        return Err(LineSearchError::NonPositiveAlpha(c.alpha));
    }
    let m = c.monomials();
    let deriv = [m[1], 2.0 * m[2], 3.0 * m[3], 4.0 * m[4]];
    let mut candidates = alloc::vec![2.0];
    if let Some(roots) = cubic_real_roots(deriv) {
        for mut r in roots {
            for _ in 0..4 {
                let h = c.ddp(r);
                if h == 0.0 {
                    break;
                }
                let next = r - c.dp(r) / h;
                if !next.is_finite() {
                    break;
                }
                r = next;
            }
            if r > 0.0 && r <= 2.0 {
                candidates.push(r);
            }
        }
    }
    let best = candidates
        .iter()
        .copied()
        .min_by(|a, b| c.p(*a).total_cmp(&c.p(*b)))
        .unwrap_or(2.0);
    if c.p(best) < c.alpha {
        return Ok(best);
    }
    grid_minimizer(c, 20_000).ok_or(LineSearchError::Degenerate)
}

fn grid_minimizer(c: &LineSearchCoeffs, points: usize) -> Option<f64> {
    let mut best = (f64::INFINITY, 0.0);
    for i in 1..=points {
        let l = 2.0 * i as f64 / points as f64;
        let v = c.p(l);
        if v < best.0 {
            best = (v, l);
        }
    }
    (best.0 < c.alpha).then_some(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coeffs(alpha: f64, beta: f64, gamma: f64, delta: f64, epsilon: f64, zeta: f64) -> LineSearchCoeffs {
        LineSearchCoeffs {
            alpha,
            beta,
            gamma,
            delta,
            epsilon,
            zeta,
        }
    }

    #[test]
    fn exact_newton_step() {
        let l = minimize_quartic(&coeffs(3.0, 0.0, 0.0, 0.0, 0.0, 0.0)).unwrap();
        assert!((l - 1.0).abs() < 1e-14);
    }

    #[test]
    fn symmetric_quadratic() {
        let l = minimize_quartic(&coeffs(1.0, 1.0, 0.0, 0.0, 0.0, 0.0)).unwrap();
        assert!((l - 0.5).abs() < 1e-14);
    }

    #[test]
    fn rejects_zero_alpha() {
        assert!(matches!(
            minimize_quartic(&coeffs(0.0, 1.0, 0.0, 0.0, 0.0, 0.0)),
            Err(LineSearchError::NonPositiveAlpha(_))
        ));
    }

    #[test]
    fn no_descent_is_degenerate() {
        // p(λ) = (1−λ)² + λ² + 2λ(1−λ)·1 = 1 is flat.
        let c = coeffs(1.0, 1.0, 1.0, 0.0, 0.0, 0.0);
        assert_eq!(minimize_quartic(&c), Err(LineSearchError::Degenerate));
    }

    #[test]
    fn polynomial_forms_agree() {
        let c = coeffs(2.0, 0.3, -0.1, 0.05, 0.4, 0.0);
        for &l in &[0.0, 0.25, 0.5, 1.0, 1.5, 2.0] {
            let direct =
                (1.0 - l) * (1.0 - l) * c.alpha + l * l * c.beta + l.powi(4) * c.delta + 2.0 * l * (1.0 - l) * c.gamma
                    - 2.0 * l * l * (1.0 - l) * c.epsilon
                    - 2.0 * l.powi(3) * c.zeta;
            assert!((c.p(l) - direct).abs() < 1e-14);
        }
        let h = 1e-6;
        assert!((c.dp(0.7) - (c.p(0.7 + h) - c.p(0.7 - h)) / (2.0 * h)).abs() < 1e-7);
    }

    proptest! {
        #[test]
        fn matches_fine_grid(
            alpha in 0.01f64..10.0,
            beta in 0.0f64..5.0,
            delta in 0.0f64..5.0,
            epsilon in -3.0f64..3.0,
        ) {
            // Space-growth geometry: γ = ζ = 0.
            let c = coeffs(alpha, beta, 0.0, delta, epsilon, 0.0);
            let l = minimize_quartic(&c).unwrap();
            prop_assert!(l > 0.0 && l <= 2.0);
            let g = grid_minimizer(&c, 2_000_000).unwrap();
            prop_assert!(c.p(l) <= c.p(g) + 1e-12 * alpha);
            prop_assert!(c.dp(0.0) < 0.0);
        }

        #[test]
        fn general_coefficients_give_descent(
            alpha in 0.01f64..10.0,
            beta in 0.0f64..5.0,
            gamma in -1.0f64..1.0,
            delta in 0.0f64..5.0,
            epsilon in -3.0f64..3.0,
            zeta in -1.0f64..1.0,
        ) {
            let c = coeffs(alpha, beta, gamma, delta, epsilon, zeta);
            if let Ok(l) = minimize_quartic(&c) {
                prop_assert!(l > 0.0 && l <= 2.0);
                prop_assert!(c.p(l) < alpha);
            } else {
                prop_assert!(grid_minimizer(&c, 100_000).is_none());
            }
        }
    }
}
