//! Dense nonsymmetric eigensolver.
//!
//! Balancing, orthogonal Hessenberg reduction, then Francis double-shift QR on
//! the Hessenberg matrix. Eigenvectors come from complex inverse iteration on
//! the Hessenberg form and are mapped back through the accumulated reduction
//! and the balancing scale.

use super::linalg::Matrix;
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexEigenvalue {
    pub re: f64,
    pub im: f64,
}

impl ComplexEigenvalue {
    pub fn new(re: f64, im: f64) -> Self {
        ComplexEigenvalue { re, im }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// Ordering contract: real part descending, ties broken by imaginary part
/// descending.
pub fn eigen_order(a: &ComplexEigenvalue, b: &ComplexEigenvalue) -> Ordering {
    b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im))
}

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Sorted by [`eigen_order`].
    pub values: Vec<ComplexEigenvalue>,
    /// Unit-norm right eigenvectors, aligned with `values`.
    pub vectors: Option<Vec<Vec<Complex64>>>,
}

pub fn eigenvalues(a: &Matrix) -> Result<Vec<ComplexEigenvalue>> {
    Ok(eig_dense(a, false)?.values)
}

pub fn eig_dense(a: &Matrix, want_vectors: bool) -> Result<EigenDecomposition> {
    if !a.is_square() {
        return Err(Error::InvalidInput(format!(
            "eigenproblem needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(EigenDecomposition {
            values: vec![],
            vectors: want_vectors.then(Vec::new),
        });
    }
    if a.max_abs().is_nan() || a.max_abs().is_infinite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let mut b = a.clone();
    let scale = balance(&mut b);
    let (h, q) = hessenberg(&b);
    let mut values = hqr(&h)?;
    values.sort_by(eigen_order);

    let vectors = if want_vectors {
        let hnorm = h.max_abs().max(f64::MIN_POSITIVE);
        let mut vecs: Vec<Vec<Complex64>> = Vec::with_capacity(n);
        for (k, lam) in values.iter().enumerate() {
            // Conjugate partner of the previous value: reuse its vector.
            if k > 0 && lam.im < 0.0 && values[k - 1].re == lam.re && values[k - 1].im == -lam.im {
                let prev: Vec<Complex64> = vecs[k - 1].iter().map(|z| z.conj()).collect();
                vecs.push(prev);
                continue;
            }
            let y = inverse_iteration(&h, *lam, hnorm);
            let mut x: Vec<Complex64> = (0..n)
                .map(|i| (0..n).map(|j| y[j] * q[(i, j)]).sum::<Complex64>() * scale[i])
                .collect();
            normalize(&mut x);
            if lam.im == 0.0 {
                x.iter_mut().for_each(|z| z.im = 0.0);
                normalize(&mut x);
            }
            vecs.push(x);
        }
        Some(vecs)
    } else {
        None
    };
    Ok(EigenDecomposition { values, vectors })
}

fn normalize(x: &mut [Complex64]) {
    let nrm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|z| *z /= nrm);
    }
    // Fix the phase: largest component real and positive.
    if let Some(big) = x
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
    {
        if big.norm() > 0.0 {
            let ph = big.conj() / big.norm();
            x.iter_mut().for_each(|z| *z *= ph);
        }
    }
}

/// Diagonal similarity scaling by powers of two; returns the scale vector `d`
/// such that the balanced matrix is `D⁻¹ A D`.
fn balance(a: &mut Matrix) -> Vec<f64> {
    let n = a.rows();
    let mut d = vec![1.0; n];
    const RADIX: f64 = 2.0;
    const SQRDX: f64 = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
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
                while c < g {
                    f *= RADIX;
                    c *= SQRDX;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= SQRDX;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    d[i] *= f;
                    for j in 0..n {
                        a[(i, j)] /= f;
                        a[(j, i)] *= f;
                    }
                }
            }
        }
    }
    d
}

/// Householder reduction `A = Q H Qᵀ` with `H` upper Hessenberg.
fn hessenberg(a: &Matrix) -> (Matrix, Matrix) {
    let n = a.rows();
    let mut h = a.clone();
    let mut ort = vec![0.0; n];
    let (low, high) = (0usize, n - 1);
    for m in low + 1..high {
        let scale: f64 = (m..=high).map(|i| h[(i, m - 1)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;
        for j in m..n {
            let f = (m..=high).rev().map(|i| ort[i] * h[(i, j)]).sum::<f64>() / hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let f = (m..=high).rev().map(|j| ort[j] * h[(i, j)]).sum::<f64>() / hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[(m, m - 1)] = scale * g;
    }
    let mut q = Matrix::identity(n);
    for m in (low + 1..high).rev() {
        if h[(m, m - 1)] != 0.0 {
            for i in m + 1..=high {
                ort[i] = h[(i, m - 1)];
            }
            for j in m..=high {
                let mut g: f64 = (m..=high).map(|i| ort[i] * q[(i, j)]).sum();
                g = (g / ort[m]) / h[(m, m - 1)];
                for i in m..=high {
                    q[(i, j)] += g * ort[i];
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..i.saturating_sub(1) {
            h[(i, j)] = 0.0;
        }
    }
    (h, q)
}

/// Eigenvalues of an upper Hessenberg matrix by the Francis double-shift QR
/// iteration with exceptional shifts.
fn hqr(h0: &Matrix) -> Result<Vec<ComplexEigenvalue>> {
    let nn = h0.rows();
    let mut h = h0.clone();
    let mut d = vec![0.0; nn];
    let mut e = vec![0.0; nn];
    let eps = f64::EPSILON;
    let norm: f64 = (0..nn)
        .map(|i| {
            (i.saturating_sub(1)..nn)
                .map(|j| h[(i, j)].abs())
                .sum::<f64>()
        })
        .sum();
    let max_total = 30 * nn.max(1);
    let mut total = 0usize;
    let mut exshift = 0.0;
    let mut iter = 0usize;
    let mut n = nn as isize - 1;
    let (mut p, mut q, mut r, mut s, mut z, mut w, mut x, mut y);
    while n >= 0 {
        let nu = n as usize;
        let mut l = nu;
        while l > 0 {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }
        if l == nu {
            d[nu] = h[(nu, nu)] + exshift;
            e[nu] = 0.0;
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            p = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            x = h[(nu, nu)] + exshift;
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[nu - 1] = x + z;
                d[nu] = if z != 0.0 { x - w / z } else { x + z };
                e[nu - 1] = 0.0;
                e[nu] = 0.0;
            } else {
                d[nu - 1] = x + p;
                d[nu] = x + p;
                e[nu - 1] = z;
                e[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            x = h[(nu, nu)];
            y = h[(nu - 1, nu - 1)];
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            if iter == 10 {
                exshift += x;
                for i in 0..=nu {
                    h[(i, i)] -= x;
                }
                s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            total += 1;
            if total > max_total {
                return Err(Error::EigenFailure);
            }

            let mut m = nu - 2;
            loop {
                z = h[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }
            for k in m..nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..nn {
                        p = h[(k, j)] + q * h[(k + 1, j)];
                        if notlast {
                            p += r * h[(k + 2, j)];
                            h[(k + 2, j)] -= p * z;
                        }
                        h[(k, j)] -= p * x;
                        h[(k + 1, j)] -= p * y;
                    }
                    for i in 0..=nu.min(k + 3) {
                        p = x * h[(i, k)] + y * h[(i, k + 1)];
                        if notlast {
                            p += z * h[(i, k + 2)];
                            h[(i, k + 2)] -= p * r;
                        }
                        h[(i, k)] -= p;
                        h[(i, k + 1)] -= p * q;
                    }
                }
            }
        }
    }
    Ok(d.into_iter()
        .zip(e)
        .map(|(re, im)| ComplexEigenvalue { re, im })
        .collect())
}

/// A few steps of inverse iteration `(H - λI) y_{k+1} = y_k` in complex
/// arithmetic. Tiny pivots are replaced by `ε‖H‖` so an exact eigenvalue does
/// not break the factorization.
fn inverse_iteration(h: &Matrix, lam: ComplexEigenvalue, hnorm: f64) -> Vec<Complex64> {
    let n = h.rows();
    let mu = lam.to_complex();
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    Complex64::new(h[(i, j)], 0.0)
                        - if i == j { mu } else { Complex64::new(0.0, 0.0) }
                })
                .collect()
        })
        .collect();
    let tiny = f64::EPSILON * hnorm;
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&a, &b| m[a][k].norm().total_cmp(&m[b][k].norm()))
            .unwrap();
        m.swap(k, p);
        perm.swap(k, p);
        if m[k][k].norm() < tiny {
            m[k][k] = Complex64::new(tiny, 0.0);
        }
        let piv = m[k][k];
        for i in k + 1..n {
            let f = m[i][k] / piv;
            m[i][k] = f;
            if f.norm() != 0.0 {
                for j in k + 1..n {
                    let mkj = m[k][j];
                    m[i][j] -= f * mkj;
                }
            }
        }
    }
    let solve = |b: &[Complex64]| -> Vec<Complex64> {
        let mut x: Vec<Complex64> = perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            for j in 0..i {
                let t = m[i][j] * x[j];
                x[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = m[i][j] * x[j];
                x[i] -= t;
            }
            x[i] /= m[i][i];
        }
        x
    };
    let mut y: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + 0.1 * (i as f64).sin(), 0.0))
        .collect();
    normalize(&mut y);
    for _ in 0..4 {
        let mut nx = solve(&y);
        let nrm = nx.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !nrm.is_finite() || nrm == 0.0 {
            break;
        }
        nx.iter_mut().for_each(|z| *z /= nrm);
        y = nx;
    }
    y
}
