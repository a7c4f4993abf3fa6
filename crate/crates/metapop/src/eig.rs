//! Dense real eigenvalues via balancing, Hessenberg reduction, and the
//! Francis double-shift QR iteration with exceptional shifts.
//!
//! The matrices this crate cares about (rank-one connectivity structures and
//! bordered block forms built from them) have spectra with large multiplicity
//! clusters. They are exactly the inputs on which an implicit-QR loop without
//! exceptional shifts can stall, so the iteration here follows the classic
//! EISPACK schedule: ad-hoc shifts after 10 and 20 stalled sweeps and a hard
//! failure after 30 per eigenvalue.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

const RADIX: f64 = 2.0;

/// Diagonal similarity scaling (EISPACK `balanc`); improves the conditioning
/// of the eigenvalue problem and costs O(n^2) per sweep.
fn balance(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    let sqrdx = RADIX * RADIX;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                let mut c_scaled = c;
                while c_scaled < g {
                    f *= RADIX;
                    c_scaled *= sqrdx;
                }
                g = r * RADIX;
                while c_scaled > g {
                    f /= RADIX;
                    c_scaled /= sqrdx;
                }
                if (c_scaled + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[(i, j)] *= g;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Reduction to upper Hessenberg form by stabilized elementary similarity
/// transformations (EISPACK `elmhes`).
fn hessenberg(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    if n < 3 {
        return;
    }
    for m in 1..n - 1 {
        // pivot: largest magnitude in column m-1 at or below row m
        let mut x = 0.0_f64;
        let mut i_pivot = m;
        for i in m..n {
            if a[(i, m - 1)].abs() > x.abs() {
                x = a[(i, m - 1)];
                i_pivot = i;
            }
        }
        if i_pivot != m {
            for j in (m - 1)..n {
                a.swap((i_pivot, j), (m, j));
            }
            for j in 0..n {
                a.swap((j, i_pivot), (j, m));
            }
        }
        if x != 0.0 {
            for i in (m + 1)..n {
                let mut y = a[(i, m - 1)];
                if y != 0.0 {
                    y /= x;
                    a[(i, m - 1)] = y;
                    for j in m..n {
                        let v = a[(m, j)];
                        a[(i, j)] -= y * v;
                    }
                    for j in 0..n {
                        let v = a[(j, i)];
                        a[(j, m)] += y * v;
                    }
                }
            }
        }
    }
    // zero the entries below the first subdiagonal (they hold multipliers)
    for i in 2..n {
        for j in 0..(i - 1) {
            a[(i, j)] = 0.0;
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR
/// (EISPACK `hqr`).
fn hqr(a: &mut DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = a.nrows();
    let mut eig = Vec::with_capacity(n);
    let mut anorm = 0.0_f64;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }
    if anorm == 0.0 {
        return Ok(vec![Complex::new(0.0, 0.0); n]);
    }
    let eps = f64::EPSILON;
    let mut nn = n as isize - 1;
    let mut t = 0.0_f64;
    while nn >= 0 {
        let mut its = 0;
        loop {
            // Look for a small subdiagonal element. The local test is
            // floored at the whole-matrix scale: zeroing any entry below
            // eps * ||A|| is backward stable, and the zero-eigenvalue
            // clusters of rank-one structures leave trailing blocks of
            // junk magnitude that never satisfy a purely local test.
            let mut l = nn;
            while l >= 1 {
                let s = a[(l as usize - 1, l as usize - 1)].abs()
                    + a[(l as usize, l as usize)].abs();
                let tst = s.max(anorm);
                if a[(l as usize, l as usize - 1)].abs() <= eps * tst {
                    a[(l as usize, l as usize - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let x = a[(nn as usize, nn as usize)];
            if l == nn {
                eig.push(Complex::new(x + t, 0.0));
                nn -= 1;
                break;
            }
            let y = a[(nn as usize - 1, nn as usize - 1)];
            let w = a[(nn as usize, nn as usize - 1)] * a[(nn as usize - 1, nn as usize)];
            if l == nn - 1 {
                // 2x2 block
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let x_shift = x + t;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    eig.push(Complex::new(x_shift + z, 0.0));
                    if z != 0.0 {
                        eig.push(Complex::new(x_shift - w / z, 0.0));
                    } else {
                        eig.push(Complex::new(x_shift, 0.0));
                    }
                } else {
                    eig.push(Complex::new(x_shift + p, z));
                    eig.push(Complex::new(x_shift + p, -z));
                }
                nn -= 2;
                break;
            }
            if its == 30 {
                return Err(Error::NonConvergence {
                    iterations: 30,
                    residual: a[(nn as usize, nn as usize - 1)].abs(),
                });
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for i in 0..=nn as usize {
                    a[(i, i)] -= x;
                }
                let s = a[(nn as usize, nn as usize - 1)].abs()
                    + a[(nn as usize - 1, nn as usize - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            // look for two consecutive small subdiagonal elements
            let mut m = nn - 2;
            let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
            while m >= l {
                let mu = m as usize;
                let z = a[(mu, mu)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(mu + 1, mu)] + a[(mu, mu + 1)];
                q = a[(mu + 1, mu + 1)] - z - rr - ss;
                r = a[(mu + 2, mu + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[(mu, mu - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs()
                    * (a[(mu - 1, mu - 1)].abs() + z.abs() + a[(mu + 1, mu + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in (m as usize + 2)..=(nn as usize) {
                a[(i, i - 2)] = 0.0;
                if i as isize != m + 2 {
                    a[(i, i - 3)] = 0.0;
                }
            }
            // double QR sweep on rows l..nn
            let mut p = p;
            let mut q = q;
            let mut r = r;
            for k in (m as usize)..=(nn as usize - 1) {
                if k as isize != m {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = if k < nn as usize - 1 {
                        a[(k + 2, k - 1)]
                    } else {
                        0.0
                    };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s == 0.0 {
                    continue;
                }
                if k as isize == m {
                    if l != m {
                        a[(k, k - 1)] = -a[(k, k - 1)];
                    }
                } else {
                    a[(k, k - 1)] = -s * x;
                }
                p += s;
                let x2 = p / s;
                let y2 = q / s;
                let z2 = r / s;
                q /= p;
                r /= p;
                // row modification
                for j in k..=(nn as usize) {
                    let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                    if k < nn as usize - 1 {
                        pp += r * a[(k + 2, j)];
                        a[(k + 2, j)] -= pp * z2;
                    }
                    a[(k + 1, j)] -= pp * y2;
                    a[(k, j)] -= pp * x2;
                }
                // column modification
                let mmin = if (nn as usize) < k + 3 {
                    nn as usize
                } else {
                    k + 3
                };
                for i in (l as usize)..=mmin {
                    let mut pp = x2 * a[(i, k)] + y2 * a[(i, k + 1)];
                    if k < nn as usize - 1 {
                        pp += z2 * a[(i, k + 2)];
                        a[(i, k + 2)] -= pp * r;
                    }
                    a[(i, k + 1)] -= pp * q;
                    a[(i, k)] -= pp;
                }
            }
        }
    }
    Ok(eig)
}

/// All eigenvalues of a general real square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch("matrix must be square".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigenvalue input".into()));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![Complex::new(m[(0, 0)], 0.0)]);
    }
    let mut a = m.clone();
    balance(&mut a);
    hessenberg(&mut a);
    hqr(&mut a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sorted_re_im(eig: &[Complex<f64>]) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = eig.iter().map(|z| (z.re, z.im)).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn diagonal_and_triangular() {
        let d = DMatrix::from_partial_diagonal(4, 4, &[3.0, -1.0, 0.5, 7.0]);
        let eig = eigenvalues(&d).unwrap();
        let got = sorted_re_im(&eig);
        let want = [(-1.0, 0.0), (0.5, 0.0), (3.0, 0.0), (7.0, 0.0)];
        for (g, w) in got.iter().zip(want) {
            assert!((g.0 - w.0).abs() < 1e-12 && g.1.abs() < 1e-12);
        }

        let mut t = d.clone();
        t[(0, 1)] = 5.0;
        t[(1, 3)] = -2.0;
        let eig = eigenvalues(&t).unwrap();
        let got = sorted_re_im(&eig);
        for (g, w) in got.iter().zip(want) {
            assert!((g.0 - w.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_gives_complex_pair() {
        let r = DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
        let eig = eigenvalues(&r).unwrap();
        assert!(eig.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        assert!((eig[0].re - 0.6).abs() < 1e-12);
        assert!((eig[0].im.abs() - 0.8).abs() < 1e-12);
    }

    /// The case that motivated this module: rank-one matrices (eigenvalue 0
    /// with multiplicity n-1) stall Schur iterations without exceptional
    /// shifts.
    #[test]
    fn rank_one_power_law_connectivity() {
        for (kmin, kmax, expo) in [(3u32, 30u32, 3.0), (2, 50, 2.2), (3, 100, 3.0)] {
            let ks: Vec<f64> = (kmin..=kmax).map(f64::from).collect();
            let w: Vec<f64> = ks.iter().map(|k| k.powf(-expo)).collect();
            let z: f64 = w.iter().sum();
            let p: Vec<f64> = w.iter().map(|x| x / z).collect();
            let kbar: f64 = ks.iter().zip(&p).map(|(k, q)| k * q).sum();
            let n = ks.len();
            let c = DMatrix::from_fn(n, n, |i, j| ks[i] * p[j] / kbar);
            let eig = eigenvalues(&c).unwrap();
            let mut mags: Vec<f64> = eig.iter().map(|z| z.norm()).collect();
            mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert!((mags[0] - 1.0).abs() < 1e-10, "leading {}", mags[0]);
            assert!(mags[1..].iter().all(|&m| m < 1e-10));
        }
    }

    #[test]
    fn similarity_recovers_known_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..25 {
            let n = rng.gen_range(2..14);
            // known spectrum: distinct reals plus an optional complex pair
            let mut d = DMatrix::zeros(n, n);
            let mut want: Vec<Complex<f64>> = Vec::new();
            let mut i = 0;
            while i < n {
                if n - i >= 2 && rng.gen_bool(0.4) {
                    let re = rng.gen_range(-3.0..3.0);
                    let im = rng.gen_range(0.2..2.0);
                    d[(i, i)] = re;
                    d[(i, i + 1)] = im;
                    d[(i + 1, i)] = -im;
                    d[(i + 1, i + 1)] = re;
                    want.push(Complex::new(re, im));
                    want.push(Complex::new(re, -im));
                    i += 2;
                } else {
                    let re = rng.gen_range(-4.0..4.0);
                    d[(i, i)] = re;
                    want.push(Complex::new(re, 0.0));
                    i += 1;
                }
            }
            // random well-conditioned similarity
            let q = loop {
                let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
                    + DMatrix::<f64>::identity(n, n) * 2.0;
                if m.clone().try_inverse().is_some() {
                    break m;
                }
            };
            let a = &q * &d * q.clone().try_inverse().unwrap();
            let eig = eigenvalues(&a).unwrap();
            let mut got = sorted_re_im(&eig);
            let mut expect = sorted_re_im(&want);
            for (g, w) in got.drain(..).zip(expect.drain(..)) {
                assert!(
                    (g.0 - w.0).abs() < 1e-7 && (g.1 - w.1).abs() < 1e-7,
                    "trial {trial}: {g:?} vs {w:?}"
                );
            }
        }
    }

    #[test]
    fn trace_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let n = rng.gen_range(2..25);
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
            let eig = eigenvalues(&a).unwrap();
            let sum_re: f64 = eig.iter().map(|z| z.re).sum();
            let sum_im: f64 = eig.iter().map(|z| z.im).sum();
            assert!((sum_re - a.trace()).abs() < 1e-8 * a.trace().abs().max(n as f64));
            assert!(sum_im.abs() < 1e-8 * n as f64);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let m = DMatrix::from_row_slice(2, 2, &[f64::NAN, 0.0, 0.0, 1.0]);
        assert!(eigenvalues(&m).is_err());
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(eigenvalues(&m).is_err());
    }
}
