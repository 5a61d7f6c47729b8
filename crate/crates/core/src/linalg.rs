//! Dense nonsymmetric eigenvalues: Parlett-Reinsch balancing, Householder
//! reduction to upper Hessenberg form, then Francis double-shift QR.
//! Systems too large for the dense path get a handful of eigenvalues from
//! shift-and-invert iteration.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest dimension handled by the dense solver.
pub const MAX_DENSE_DIM: usize = 512;

/// All eigenvalues of a real square matrix, in no particular order.
///
/// Fails with `NumericalFailure` when the QR sweep needs more than
/// `100 · dim` iterations in total or the input is not finite.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::config(format!("eigenvalues need a square matrix, got {}x{}", n, m.ncols())));
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::numerical("eigenvalues: non-finite matrix entry", &[]));
    }
    let mut a = m.clone();
    balance(&mut a);
    hessenberg(&mut a);
    hqr(&mut a)
}

fn balance(a: &mut DMatrix<f64>) {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
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
}

fn hessenberg(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n];
    for k in 0..n - 2 {
        let len = n - k - 1;
        let norm = (k + 1..n).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        for (l, i) in (k + 1..n).enumerate() {
            v[l] = a[(i, k)];
        }
        v[0] -= alpha;
        let vv: f64 = v[..len].iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        let scale = 2.0 / vv;
        for j in k..n {
            let s: f64 = (0..len).map(|l| v[l] * a[(k + 1 + l, j)]).sum();
            for l in 0..len {
                a[(k + 1 + l, j)] -= scale * s * v[l];
            }
        }
        for i in 0..n {
            let s: f64 = (0..len).map(|l| a[(i, k + 1 + l)] * v[l]).sum();
            for l in 0..len {
                a[(i, k + 1 + l)] -= scale * s * v[l];
            }
        }
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Eigenvalues of an upper Hessenberg matrix; `a` is destroyed.
fn hqr(a: &mut DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    if n == 0 {
        return Ok(w);
    }
    let max_iter = 100 * n;
    let mut total = 0usize;
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }
    let (mut p, mut q, mut r): (f64, f64, f64);
    let (mut x, mut y, mut z): (f64, f64, f64);
    let mut t = 0.0;
    let mut nn = n as isize - 1;
    while nn >= 0 {
        let mut its = 0usize;
        loop {
            let nu = nn as usize;
            let mut l = nu;
            while l > 0 {
                let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[(l, l - 1)].abs() <= f64::EPSILON * s {
                    a[(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[(nu, nu)];
            if l == nu {
                w[nu] = Complex64::new(x + t, 0.0);
                nn -= 1;
                break;
            }
            y = a[(nu - 1, nu - 1)];
            let mut ww = a[(nu, nu - 1)] * a[(nu - 1, nu)];
            if l == nu - 1 {
                p = 0.5 * (y - x);
                q = p * p + ww;
                z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    w[nu - 1] = Complex64::new(x + z, 0.0);
                    w[nu] = w[nu - 1];
                    if z != 0.0 {
                        w[nu] = Complex64::new(x - ww / z, 0.0);
                    }
                } else {
                    w[nu] = Complex64::new(x + p, -z);
                    w[nu - 1] = w[nu].conj();
                }
                nn -= 2;
                break;
            }
            if total >= max_iter {
                return Err(Error::numerical("QR iteration did not converge", &[total as f64]));
            }
            if its > 0 && its.is_multiple_of(10) {
                t += x;
                for i in 0..=nu {
                    a[(i, i)] -= x;
                }
                let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                ww = -0.4375 * s * s;
            }
            its += 1;
            total += 1;
            let mut m = nu - 2;
            loop {
                z = a[(m, m)];
                r = x - z;
                let s = y - z;
                p = (r * s - ww) / a[(m + 1, m)] + a[(m, m + 1)];
                q = a[(m + 1, m + 1)] - z - r - s;
                r = a[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nu - 1 {
                a[(i + 2, i)] = 0.0;
                if i != m {
                    a[(i + 2, i - 1)] = 0.0;
                }
            }
            let mut k = m;
            while k < nu {
                if k != m {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = if k + 1 != nu { a[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[(k, k - 1)] = -a[(k, k - 1)];
                        }
                    } else {
                        a[(k, k - 1)] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        p = a[(k, j)] + q * a[(k + 1, j)];
                        if k + 1 != nu {
                            p += r * a[(k + 2, j)];
                            a[(k + 2, j)] -= p * z;
                        }
                        a[(k + 1, j)] -= p * y;
                        a[(k, j)] -= p * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for i in l..=mmin {
                        p = x * a[(i, k)] + y * a[(i, k + 1)];
                        if k + 1 != nu {
                            p += z * a[(i, k + 2)];
                            a[(i, k + 2)] -= p * r;
                        }
                        a[(i, k + 1)] -= p * q;
                        a[(i, k)] -= p;
                    }
                }
                k += 1;
            }
            if l + 1 >= nu {
                break;
            }
        }
    }
    Ok(w)
}

/// A few eigenvalues of a large matrix by inverse iteration on
/// `(A − σI)⁻¹` for complex shifts `σ` placed along the right edge of the
/// Gershgorin region, so the eigenvalues nearest that edge come out first.
/// Results are deduplicated to relative precision `1e-6`.
pub fn leading_eigenvalues(m: &DMatrix<f64>, shifts: usize, iters: usize) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    let mut right = f64::NEG_INFINITY;
    let mut radius: f64 = 0.0;
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
        right = right.max(m[(i, i)] + off);
        radius = radius.max(off);
    }
    let a = m.map(|v| Complex64::new(v, 0.0));
    let mut found: Vec<Complex64> = Vec::new();
    let shifts = shifts.max(1);
    for s in 0..shifts {
        let frac = if shifts == 1 { 0.0 } else { s as f64 / (shifts - 1) as f64 };
        // a small imaginary offset keeps conjugate pairs from tying
        let sigma = Complex64::new(right + 1e-3 * (1.0 + radius), (frac - 0.5) * radius + 1e-7 * (1.0 + radius));
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[(i, i)] -= sigma;
        }
        let lu = shifted.lu();
        let mut v = nalgebra::DVector::from_fn(n, |i, _| Complex64::new(1.0 + (i % 7) as f64 * 0.1, 0.3 * ((i % 5) as f64 - 2.0)));
        v /= Complex64::new(v.norm(), 0.0);
        for _ in 0..iters {
            let Some(next) = lu.solve(&v) else {
                break;
            };
            let norm = next.norm();
            if !norm.is_finite() || norm == 0.0 {
                break;
            }
            v = next / Complex64::new(norm, 0.0);
        }
        let av = &a * &v;
        let lambda = v.dotc(&av) / v.dotc(&v);
        if !lambda.re.is_finite() || !lambda.im.is_finite() {
            return Err(Error::numerical("shift-and-invert iteration produced a non-finite eigenvalue", &[sigma.re, sigma.im]));
        }
        if !found.iter().any(|f| (f - lambda).norm() <= 1e-6 * (1.0 + lambda.norm())) {
            found.push(lambda);
        }
    }
    Ok(found)
}

/// Write a matrix as CSV rows.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Serde adapter storing a matrix as a list of rows.
pub mod rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_row_iterator(nrows, ncols, rows.into_iter().flatten()))
    }
}

/// Serde adapter storing complex numbers as `{"re": .., "im": ..}`.
pub mod complex_list {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct C {
        re: f64,
        im: f64,
    }

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|c| C { re: c.re, im: c.im }).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        Ok(Vec::<C>::deserialize(d)?.into_iter().map(|c| Complex64::new(c.re, c.im)).collect())
    }
}
