//! Eigenvalues of general real matrices without Schur vectors.
//!
//! Balancing, Householder reduction to Hessenberg form and a Francis
//! double-shift QR sweep, all on a flat column-major buffer so that the
//! inner loops stay contiguous at sizes of a few thousand.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::{DenseBlock, DenseError, Result, C64};

const EXCEPTIONAL_EVERY: usize = 10;

struct Hess {
    n: usize,
    a: Vec<f64>,
}

impl Hess {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i + j * self.n]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i + j * self.n] = v;
    }
}

fn balance(h: &mut Hess) {
    let n = h.n;
    let radix = 2.0_f64;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += h.at(j, i).abs();
                    r += h.at(i, j).abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= radix * radix;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let inv = 1.0 / f;
                for j in 0..n {
                    h.a[i + j * n] *= inv;
                }
                for v in &mut h.a[i * n..(i + 1) * n] {
                    *v *= f;
                }
            }
        }
    }
}

/// Householder vector for `x`: returns `(beta, tau)` and overwrites `x[1..]`
/// with the tail of `v` (`v[0] = 1`).
fn householder(x: &mut [f64]) -> (f64, f64) {
    let alpha = x[0];
    let tail: f64 = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    if tail == 0.0 {
        return (alpha, 0.0);
    }
    let beta = -alpha.signum() * alpha.hypot(tail);
    let tau = (beta - alpha) / beta;
    let scale = 1.0 / (alpha - beta);
    for v in &mut x[1..] {
        *v *= scale;
    }
    (beta, tau)
}

fn reduce_to_hessenberg(h: &mut Hess) {
    let n = h.n;
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let col = &mut h.a[k * n + k + 1..(k + 1) * n];
        let (beta, tau) = householder(col);
        v[0] = 1.0;
        v[1..len].copy_from_slice(&col[1..]);
        col[0] = beta;
        col[1..].iter_mut().for_each(|x| *x = 0.0);
        if tau == 0.0 {
            continue;
        }
        let v = &v[..len];
        for j in k + 1..n {
            let c = &mut h.a[j * n + k + 1..(j + 1) * n];
            let s: f64 = c.iter().zip(v).map(|(a, b)| a * b).sum();
            let s = tau * s;
            c.iter_mut().zip(v).for_each(|(a, b)| *a -= s * b);
        }
        w.iter_mut().for_each(|x| *x = 0.0);
        for (jj, &vj) in v.iter().enumerate() {
            let j = k + 1 + jj;
            let c = &h.a[j * n..(j + 1) * n];
            w.iter_mut().zip(c).for_each(|(a, b)| *a += vj * b);
        }
        for (jj, &vj) in v.iter().enumerate() {
            let j = k + 1 + jj;
            let s = tau * vj;
            let c = &mut h.a[j * n..(j + 1) * n];
            c.iter_mut().zip(&w).for_each(|(a, b)| *a -= s * b);
        }
    }
}

/// Eigenvalues of the 2 × 2 block `[a b; c d]`, computed through the
/// standardising rotation.
fn standard_2x2(mut a: f64, mut b: f64, mut c: f64, mut d: f64) -> (C64, C64) {
    let eps = f64::EPSILON;
    if c == 0.0 {
    } else if b == 0.0 {
        core::mem::swap(&mut a, &mut d);
        b = -c;
        c = 0.0;
    } else if a - d == 0.0 && b.signum() != c.signum() {
    } else {
        let temp = a - d;
        let p = 0.5 * temp;
        let bcmax = b.abs().max(c.abs());
        let bcmis = b.abs().min(c.abs()) * b.signum() * c.signum();
        let scale = p.abs().max(bcmax);
        let z = p / scale * p + bcmax / scale * bcmis;
        if z >= 4.0 * eps {
            let z = p + p.signum() * scale.sqrt() * z.sqrt();
            a = d + z;
            d -= bcmax / z * bcmis;
            b -= c;
            c = 0.0;
        } else {
            let sigma = b + c;
            let tau = sigma.hypot(temp);
            let cs = (0.5 * (1.0 + sigma.abs() / tau)).sqrt();
            let sn = -(p / (tau * cs)) * sigma.signum();
            let aa = a * cs + b * sn;
            let bb = -a * sn + b * cs;
            let cc = c * cs + d * sn;
            let dd = -c * sn + d * cs;
            b = bb * cs + dd * sn;
            c = -aa * sn + cc * cs;
            let mid = 0.5 * ((aa * cs + cc * sn) + (-bb * sn + dd * cs));
            a = mid;
            d = mid;
            if c != 0.0 {
                if b == 0.0 {
                    b = -c;
                    c = 0.0;
                } else if b.signum() == c.signum() {
                    let p = c.signum() * b.abs().sqrt() * c.abs().sqrt();
                    a = mid + p;
                    d = mid - p;
                    b -= c;
                    c = 0.0;
                }
            }
        }
    }
    let im = if c == 0.0 { 0.0 } else { b.abs().sqrt() * c.abs().sqrt() };
    (C64::new(a, im), C64::new(d, -im))
}

fn hessenberg_qr(h: &mut Hess) -> Result<Vec<C64>> {
    let n = h.n;
    let mut eig = vec![C64::new(0.0, 0.0); n];
    if n == 0 {
        return Ok(eig);
    }
    let ulp = f64::EPSILON;
    let smlnum = f64::MIN_POSITIVE * (n as f64 / ulp);
    let itmax = 30 * n.max(10);
    let mut kdefl = 0usize;
    let mut i = n as isize - 1;
    while i >= 0 {
        let iu = i as usize;
        let mut l = 0usize;
        let mut split = false;
        for _ in 0..=itmax {
            let mut k = iu;
            while k > l {
                let sub = h.at(k, k - 1).abs();
                if sub <= smlnum {
                    break;
                }
                let mut tst = h.at(k - 1, k - 1).abs() + h.at(k, k).abs();
                if tst == 0.0 {
                    if k >= l + 2 {
                        tst += h.at(k - 1, k - 2).abs();
                    }
                    if k + 1 < n {
                        tst += h.at(k + 1, k).abs();
                    }
                }
                if sub <= ulp * tst {
                    let ab = sub.max(h.at(k - 1, k).abs());
                    let ba = sub.min(h.at(k - 1, k).abs());
                    let diff = (h.at(k - 1, k - 1) - h.at(k, k)).abs();
                    let aa = h.at(k, k).abs().max(diff);
                    let bb = h.at(k, k).abs().min(diff);
                    let s = aa + ab;
                    if ba * (ab / s) <= smlnum.max(ulp * (bb * (aa / s))) {
                        break;
                    }
                }
                k -= 1;
            }
            l = k;
            if l > 0 {
                h.set(l, l - 1, 0.0);
            }
            if l + 1 >= iu {
                split = true;
                break;
            }
            kdefl += 1;

            let (h11, h12, h21, h22) = if kdefl % (2 * EXCEPTIONAL_EVERY) == 0 {
                let s = h.at(iu, iu - 1).abs() + h.at(iu - 1, iu - 2).abs();
                let d = 0.75 * s + h.at(iu, iu);
                (d, -0.4375 * s, s, d)
            } else if kdefl % EXCEPTIONAL_EVERY == 0 {
                let s = h.at(l + 1, l).abs() + h.at(l + 2, l + 1).abs();
                let d = 0.75 * s + h.at(l, l);
                (d, -0.4375 * s, s, d)
            } else {
                (h.at(iu - 1, iu - 1), h.at(iu - 1, iu), h.at(iu, iu - 1), h.at(iu, iu))
            };
            let s = h11.abs() + h12.abs() + h21.abs() + h22.abs();
            let (rt1r, rt1i, rt2r, rt2i) = if s == 0.0 {
                (0.0, 0.0, 0.0, 0.0)
            } else {
                let (h11, h12, h21, h22) = (h11 / s, h12 / s, h21 / s, h22 / s);
                let tr = 0.5 * (h11 + h22);
                let det = (h11 - tr) * (h22 - tr) - h12 * h21;
                let rtdisc = det.abs().sqrt();
                if det >= 0.0 {
                    (tr * s, rtdisc * s, tr * s, -rtdisc * s)
                } else {
                    let r1 = tr + rtdisc;
                    let r2 = tr - rtdisc;
                    let r = if (r1 - h22).abs() <= (r2 - h22).abs() {
                        r1 * s
                    } else {
                        r2 * s
                    };
                    (r, 0.0, r, 0.0)
                }
            };

            let mut m = iu - 2;
            let mut v = [0.0f64; 3];
            loop {
                let mut h21s = h.at(m + 1, m);
                let s = (h.at(m, m) - rt2r).abs() + rt2i.abs() + h21s.abs();
                h21s /= s;
                v[0] = h21s * h.at(m, m + 1) + (h.at(m, m) - rt1r) * ((h.at(m, m) - rt2r) / s) - rt1i * (rt2i / s);
                v[1] = h21s * (h.at(m, m) + h.at(m + 1, m + 1) - rt1r - rt2r);
                v[2] = h21s * h.at(m + 2, m + 1);
                let s = v[0].abs() + v[1].abs() + v[2].abs();
                v.iter_mut().for_each(|x| *x /= s);
                if m == l {
                    break;
                }
                let h00 = h.at(m, m - 1).abs() * (v[1].abs() + v[2].abs());
                let h01 = v[0].abs() * (h.at(m - 1, m - 1).abs() + h.at(m, m).abs() + h.at(m + 1, m + 1).abs());
                if h00 <= ulp * h01 {
                    break;
                }
                m -= 1;
            }

            for k in m..iu {
                let nr = 3.min(iu - k + 1);
                if k > m {
                    for (r, slot) in v.iter_mut().enumerate().take(nr) {
                        *slot = h.at(k + r, k - 1);
                    }
                }
                let (beta, t1) = householder(&mut v[..nr]);
                if k > m {
                    h.set(k, k - 1, beta);
                    h.set(k + 1, k - 1, 0.0);
                    if k + 2 < iu + 1 && nr == 3 {
                        h.set(k + 2, k - 1, 0.0);
                    }
                } else if m > l {
                    let x = h.at(k, k - 1);
                    h.set(k, k - 1, x * (1.0 - t1));
                }
                let v2 = v[1];
                let t2 = t1 * v2;
                if nr == 3 {
                    let v3 = v[2];
                    let t3 = t1 * v3;
                    for j in k..=iu {
                        let c = &mut h.a[j * n + k..j * n + k + 3];
                        let sum = c[0] + v2 * c[1] + v3 * c[2];
                        c[0] -= sum * t1;
                        c[1] -= sum * t2;
                        c[2] -= sum * t3;
                    }
                    for j in l..=(k + 3).min(iu) {
                        let sum = h.at(j, k) + v2 * h.at(j, k + 1) + v3 * h.at(j, k + 2);
                        h.a[j + k * n] -= sum * t1;
                        h.a[j + (k + 1) * n] -= sum * t2;
                        h.a[j + (k + 2) * n] -= sum * t3;
                    }
                } else {
                    for j in k..=iu {
                        let c = &mut h.a[j * n + k..j * n + k + 2];
                        let sum = c[0] + v2 * c[1];
                        c[0] -= sum * t1;
                        c[1] -= sum * t2;
                    }
                    for j in l..=iu {
                        let sum = h.at(j, k) + v2 * h.at(j, k + 1);
                        h.a[j + k * n] -= sum * t1;
                        h.a[j + (k + 1) * n] -= sum * t2;
                    }
                }
            }
        }
        if !split {
            return Err(DenseError::NoConvergence);
        }
        if l == iu {
            eig[iu] = C64::new(h.at(iu, iu), 0.0);
        } else {
            let (e1, e2) = standard_2x2(h.at(l, l), h.at(l, iu), h.at(iu, l), h.at(iu, iu));
            eig[l] = e1;
            eig[iu] = e2;
        }
        kdefl = 0;
        i = l as isize - 1;
    }
    Ok(eig)
}

/// Eigenvalues of a square matrix, in the order they deflate.
pub(super) fn eigenvalues_only(m: &DenseBlock) -> Result<Vec<C64>> {
    let n = m.nrows();
    let mut h = Hess {
        n,
        a: m.as_slice().to_vec(),
    };
    balance(&mut h);
    reduce_to_hessenberg(&mut h);
    hessenberg_qr(&mut h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn two_by_two_blocks() {
        let (a, b) = standard_2x2(0.0, 1.0, -1.0, 0.0);
        assert!((a - C64::new(0.0, 1.0)).norm() < 1e-15 && (b - C64::new(0.0, -1.0)).norm() < 1e-15);
        let (a, b) = standard_2x2(1.0, 2.0, 0.0, 3.0);
        assert_eq!((a.re, b.re, a.im), (1.0, 3.0, 0.0));
        let (a, b) = standard_2x2(2.0, 1.0, 1.0, 2.0);
        let mut r = [a.re, b.re];
        r.sort_by(f64::total_cmp);
        assert!((r[0] - 1.0).abs() < 1e-15 && (r[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn hessenberg_reduction_is_similar() {
        let n = 9;
        let m = DenseBlock::from_fn(n, n, |i, j| {
            ((3 * i + 7 * j) % 11) as f64 - 5.0 + if i == j { 2.0 } else { 0.0 }
        });
        let mut h = Hess {
            n,
            a: m.as_slice().to_vec(),
        };
        reduce_to_hessenberg(&mut h);
        let hm = DenseBlock::from_column_slice(n, n, &h.a);
        for j in 0..n {
            for i in j + 2..n {
                assert_eq!(hm[(i, j)], 0.0);
            }
        }
        assert!((hm.trace() - m.trace()).abs() < 1e-12);
        assert!((hm.norm() - m.norm()).abs() < 1e-12 * m.norm());
    }

    #[test]
    fn companion_roots() {
        // x^4 - 10x^3 + 35x^2 - 50x + 24 = (x-1)(x-2)(x-3)(x-4)
        let mut c = DenseBlock::zeros(4, 4);
        for i in 1..4 {
            c[(i, i - 1)] = 1.0;
        }
        for (i, coef) in [-24.0, 50.0, -35.0, 10.0].into_iter().enumerate() {
            c[(i, 3)] = coef;
        }
        let e = sorted(eigenvalues_only(&c).unwrap());
        for (k, z) in e.iter().enumerate() {
            assert!((z - C64::new(k as f64 + 1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn rotation_blocks_and_triangular() {
        let m = DenseBlock::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 0.0, 4.0, 5.0, 0.0, 0.0, 6.0]);
        let e = sorted(eigenvalues_only(&m).unwrap());
        assert_eq!(e.iter().map(|z| z.re).collect::<Vec<_>>(), [1.0, 4.0, 6.0]);
        let r = DenseBlock::from_row_slice(2, 2, &[-1.0, 3.0, -3.0, -1.0]);
        let e = sorted(eigenvalues_only(&r).unwrap());
        assert!((e[0] - C64::new(-1.0, -3.0)).norm() < 1e-14 && (e[1] - C64::new(-1.0, 3.0)).norm() < 1e-14);
    }

    #[test]
    fn agrees_with_schur_form() {
        let mut seed = 7u64;
        for n in [1, 2, 5, 17, 40] {
            let m = DenseBlock::from_fn(n, n, |_, _| {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            });
            let ours = sorted(eigenvalues_only(&m).unwrap());
            let theirs = sorted(super::super::SchurForm::new(&m).unwrap().eigenvalues);
            for (a, b) in ours.iter().zip(&theirs) {
                assert!((a - b).norm() < 1e-10, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn tridiagonal_toeplitz_spectrum() {
        let n = 60;
        let m = DenseBlock::from_fn(n, n, |i, j| match i as isize - j as isize {
            0 => -2.0,
            1 => 1.0,
            -1 => 4.0,
            _ => 0.0,
        });
        // eigenvalues -2 + 2 sqrt(1*4) cos(k pi / (n+1))
        let mut want: Vec<f64> = (1..=n)
            .map(|k| -2.0 + 4.0 * (k as f64 * core::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect();
        want.sort_by(f64::total_cmp);
        let got = sorted(eigenvalues_only(&m).unwrap());
        for (g, w) in got.iter().zip(&want) {
            assert!((g.re - w).abs() < 1e-9 && g.im.abs() < 1e-9, "{g} vs {w}");
        }
    }
}
