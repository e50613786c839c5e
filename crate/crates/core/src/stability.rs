//! Linear stability of damped and driven breathers.
//!
//! The linearization `L` always has the exact rotation mode `v1 = (-q*, p*)`
//! with eigenvalue 0, and a tiny positive eigenvalue `λ₂` whose eigenvector is
//! nearly parallel to `v1`. That near-Jordan pair limits a plain eigensolve to
//! about `1e-8` absolute accuracy in `λ₂`, so `v1` is deflated analytically:
//! with an orthogonal `Q` whose first column is `v1/‖v1‖`, `QᵀLQ` has a zero
//! first column (up to the breather residual), its `(0,0)` entry is the zero
//! mode, and `λ₂` is an eigenvalue of the trailing block.

use crate::breather::{solve_from_seed, Breather};
use crate::error::{Error, Result};
use crate::lattice::vector_field_jacobian;
use crate::numerics::linalg::{cond1, dot, householder_basis, norm2, Lu};
use crate::numerics::{eig_dense, eigen_order, ComplexEigenvalue, Matrix, NewtonConfig};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Upper bound on `λ₂` and on `|Im λ₂|` used to classify the small mode.
pub const LAMBDA2_BOUND: f64 = 1e-2;
pub const LAMBDA2_IM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Sorted real part descending, then imaginary part descending. The two
    /// small eigenvalues are the deflated values.
    pub eigenvalues: Vec<ComplexEigenvalue>,
    /// Eigenvalues of `L` straight from the dense solver, same ordering.
    pub eigenvalues_direct: Vec<ComplexEigenvalue>,
    pub zero_mode_residual: f64,
    pub lambda2: f64,
    pub lambda2_predicted: f64,
    /// `μ₂..μ_{2N}`, empty when the frame could not be built.
    pub mu: Vec<f64>,
    /// `γ = 0`: `λ₂` has merged into a double zero (Jordan block).
    pub degenerate_undamped: bool,
    /// Real unit eigenvector of `λ₂`, flat `(p, q)` layout, sign fixed so
    /// its overlap with `v1` is positive.
    pub lambda2_vector: Vec<f64>,
    #[serde(skip)]
    pub oscillatory_values: Vec<ComplexEigenvalue>,
    #[serde(skip)]
    pub oscillatory_vectors: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentFrame {
    /// Rotation direction `(-q*, p*)`.
    pub v1: Vec<f64>,
    /// Frequency direction `(∂_ω p*, ∂_ω q*)`.
    pub v2_tilde: Vec<f64>,
    /// `c₁ (∂_ω q*, ∂_ω p*)`.
    pub n1_tilde: Vec<f64>,
    /// `c₂ (p*, -q*)`.
    pub n2: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    pub d_beta_d_omega: f64,
}

impl TangentFrame {
    pub fn cross_pairings(&self) -> (f64, f64) {
        (dot(&self.n1_tilde, &self.v2_tilde), dot(&self.n2, &self.v1))
    }
}

pub fn jacobian_at(breather: &Breather) -> Matrix {
    vector_field_jacobian(&breather.params, &breather.to_flat())
}

/// Rotation mode `v1 = (-q, p)`.
pub fn rotation_mode(breather: &Breather) -> Vec<f64> {
    let s = &breather.state;
    let mut v: Vec<f64> = s.q.iter().map(|q| -q).collect();
    v.extend_from_slice(&s.p);
    v
}

/// `2(2N-2) γ (ε/ω)^{2N-2}`.
pub fn lambda2_prediction(n_sites: usize, eps: f64, gamma: f64, omega: f64) -> f64 {
    let k = 2 * n_sites as i32 - 2;
    2.0 * k as f64 * gamma * (eps / omega).powi(k)
}

struct Deflated {
    q: Matrix,
    m: Matrix,
}

fn deflate(l: &Matrix, v1: &[f64]) -> Deflated {
    let q = householder_basis(v1);
    let m = q.transpose().matmul(l).matmul(&q);
    Deflated { q, m }
}

fn trailing(m: &Matrix) -> Matrix {
    let n = m.rows();
    Matrix::from_fn(n - 1, n - 1, |i, j| m[(i + 1, j + 1)])
}

/// Full spectrum with `λ₂` classification; also builds the tangent frame
/// (two extra Newton solves) to decompose the small mode.
pub fn spectrum(breather: &Breather) -> Result<SpectrumReport> {
    let mut rep = spectrum_only(breather)?;
    if !rep.degenerate_undamped {
        let cfg = NewtonConfig::default();
        if let Ok(frame) = tangent_frame(breather, 1e-5, &cfg) {
            rep.mu = decompose_small_mode(breather, &frame, &rep)?;
        }
    }
    Ok(rep)
}

/// [`spectrum`] without the `μ` decomposition.
pub fn spectrum_only(breather: &Breather) -> Result<SpectrumReport> {
    let l = jacobian_at(breather);
    let n2 = l.rows();
    let direct = eig_dense(&l, true)?;
    let v1 = rotation_mode(breather);
    let d = deflate(&l, &v1);
    let zero = d.m[(0, 0)];
    let tail = eig_dense(&trailing(&d.m), true)?;
    let tv = tail.vectors.as_ref().expect("vectors requested");

    let anomaly = |reason: &str, vals: &[ComplexEigenvalue]| Error::SpectrumAnomaly {
        reason: reason.to_string(),
        eigenvalues: vals.iter().map(|e| (e.re, e.im)).collect(),
    };

    let degenerate = breather.params.gamma == 0.0;
    let small: Vec<usize> = (0..tail.values.len())
        .filter(|&k| {
            let e = tail.values[k];
            e.im.abs() < LAMBDA2_IM_TOL && e.re > 0.0 && e.re < LAMBDA2_BOUND
        })
        .collect();
    let idx = if degenerate {
        // Jordan partner of the zero mode: the trailing eigenvalue nearest 0.
        (0..tail.values.len())
            .min_by(|&a, &b| tail.values[a].abs().total_cmp(&tail.values[b].abs()))
            .unwrap()
    } else {
        match small.as_slice() {
            [k] => *k,
            [] => return Err(anomaly("no small positive real eigenvalue", &direct.values)),
            _ => {
                return Err(anomaly(
                    "more than one small positive real eigenvalue",
                    &direct.values,
                ))
            }
        }
    };
    let lambda2 = tail.values[idx].re;

    // Lift the trailing eigenvector back: (M - λI)[x0; y] = 0 gives x0 from
    // the first row.
    let y: Vec<f64> = tv[idx].iter().map(|z| z.re).collect();
    let row0: f64 = (1..n2).map(|j| d.m[(0, j)] * y[j - 1]).sum();
    let denom = lambda2 - zero;
    let x0 = if denom.abs() > 0.0 { row0 / denom } else { 0.0 };
    let mut z = vec![x0];
    z.extend_from_slice(&y);
    let mut w = d.q.matvec(&z);
    let nw = norm2(&w);
    w.iter_mut().for_each(|x| *x /= nw);
    if dot(&w, &v1) < 0.0 {
        w.iter_mut().for_each(|x| *x = -*x);
    }

    let mut values = vec![ComplexEigenvalue::new(zero, 0.0)];
    values.extend(tail.values.iter().copied());
    values.sort_by(eigen_order);

    // Oscillatory modes: everything in the direct solve except the two
    // eigenvalues closest to the origin.
    let mut order: Vec<usize> = (0..n2).collect();
    order.sort_by(|&a, &b| direct.values[a].abs().total_cmp(&direct.values[b].abs()));
    let dv = direct.vectors.as_ref().expect("vectors requested");
    let mut osc: Vec<usize> = order[2..].to_vec();
    osc.sort_by(|&a, &b| eigen_order(&direct.values[a], &direct.values[b]));
    if !degenerate {
        if let Some(&bad) = osc.iter().find(|&&k| direct.values[k].re >= 0.0) {
            return Err(anomaly(
                &format!(
                    "eigenvalue {:?} has non-negative real part",
                    direct.values[bad]
                ),
                &direct.values,
            ));
        }
    }

    let p = &breather.params;
    Ok(SpectrumReport {
        eigenvalues: values,
        eigenvalues_direct: direct.values.clone(),
        zero_mode_residual: zero.abs(),
        lambda2,
        lambda2_predicted: lambda2_prediction(p.n_sites, p.eps, p.gamma, p.omega),
        mu: Vec::new(),
        degenerate_undamped: degenerate,
        lambda2_vector: w,
        oscillatory_values: osc.iter().map(|&k| direct.values[k]).collect(),
        oscillatory_vectors: osc.iter().map(|&k| dv[k].clone()).collect(),
    })
}

/// `v1`, `ṽ2 = ∂_ω u*` (centred difference over two extra solves) and the
/// dual pair `ñ1 = c₁(∂_ω q, ∂_ω p)`, `n2 = c₂(p, -q)` normalized so that
/// `⟨ñ1, v1⟩ = ⟨n2, ṽ2⟩ = 1`.
pub fn tangent_frame(
    breather: &Breather,
    d_omega: f64,
    cfg: &NewtonConfig,
) -> Result<TangentFrame> {
    if !(d_omega > 0.0) || d_omega >= breather.omega {
        return Err(Error::InvalidInput(format!(
            "d_omega must be in (0, omega), got {d_omega}"
        )));
    }
    let x = breather.unknowns();
    let up = solve_from_seed(
        &breather.params.with_omega(breather.omega + d_omega),
        &x,
        cfg,
    )?;
    let dn = solve_from_seed(
        &breather.params.with_omega(breather.omega - d_omega),
        &x,
        cfg,
    )?;
    let (fp, fm) = (up.to_flat(), dn.to_flat());
    let v2: Vec<f64> = fp
        .iter()
        .zip(&fm)
        .map(|(a, b)| (a - b) / (2.0 * d_omega))
        .collect();
    let dbeta = (up.beta() - dn.beta()) / (2.0 * d_omega);
    let n = breather.n_sites();
    let v1 = rotation_mode(breather);
    let s = &breather.state;
    let mut n1: Vec<f64> = v2[n..].to_vec();
    n1.extend_from_slice(&v2[..n]);
    let mut n2v = s.p.clone();
    n2v.extend(s.q.iter().map(|q| -q));
    let c1 = 1.0 / dot(&n1, &v1);
    let c2 = 1.0 / dot(&n2v, &v2);
    n1.iter_mut().for_each(|x| *x *= c1);
    n2v.iter_mut().for_each(|x| *x *= c2);
    Ok(TangentFrame {
        v1,
        v2_tilde: v2,
        n1_tilde: n1,
        n2: n2v,
        c1,
        c2,
        d_beta_d_omega: dbeta,
    })
}

/// Real basis `{v1, ṽ2, Re v_k, Im v_k, ...}` from the oscillatory
/// eigenvectors (one conjugate representative per pair).
fn small_mode_basis(frame: &TangentFrame, spec: &SpectrumReport) -> Matrix {
    let n2 = frame.v1.len();
    let mut cols: Vec<Vec<f64>> = vec![frame.v1.clone(), frame.v2_tilde.clone()];
    for (e, v) in spec
        .oscillatory_values
        .iter()
        .zip(&spec.oscillatory_vectors)
    {
        if e.im < 0.0 {
            continue;
        }
        cols.push(v.iter().map(|z| z.re).collect());
        if e.im > 0.0 {
            cols.push(v.iter().map(|z| z.im).collect());
        }
    }
    cols.truncate(n2);
    while cols.len() < n2 {
        cols.push(vec![0.0; n2]);
    }
    Matrix::from_fn(n2, n2, |i, j| cols[j][i])
}

/// Coefficients `μ₂..μ_{2N}` of the `λ₂` eigenvector in the basis
/// `{v1, ṽ2, v3..v_{2N}}`, scaled so the `v1` coefficient is 1. Oscillatory
/// modes enter through the real and imaginary parts of one member of each
/// conjugate pair.
pub fn decompose_small_mode(
    breather: &Breather,
    frame: &TangentFrame,
    spec: &SpectrumReport,
) -> Result<Vec<f64>> {
    let n2 = 2 * breather.n_sites();
    if spec.lambda2_vector.len() != n2 || frame.v1.len() != n2 {
        return Err(Error::InvalidInput(
            "frame and spectrum do not match the breather".into(),
        ));
    }
    let b = small_mode_basis(frame, spec);
    // Column scaling so the condition number reflects geometry, not units.
    let scales: Vec<f64> = (0..n2).map(|j| norm2(&b.col(j))).collect();
    let bs = Matrix::from_fn(n2, n2, |i, j| b[(i, j)] / scales[j]);
    let cond = cond1(&bs);
    if !(cond <= 1e12) {
        return Err(Error::BasisDegenerate { cond });
    }
    let c = Lu::new(&bs)?.solve(&spec.lambda2_vector);
    let c: Vec<f64> = c.iter().zip(&scales).map(|(x, s)| x / s).collect();
    if c[0] == 0.0 {
        return Err(Error::BasisDegenerate {
            cond: f64::INFINITY,
        });
    }
    Ok(c[1..].iter().map(|x| x / c[0]).collect())
}

/// Angle between `w` and `span{a, b}`.
pub fn angle_to_span(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    // Gram-Schmidt on (a, b), then project.
    let na = norm2(a);
    let e1: Vec<f64> = a.iter().map(|x| x / na).collect();
    let b_perp: Vec<f64> = b
        .iter()
        .zip(&e1)
        .map(|(x, e)| x - dot(b, &e1) * e)
        .collect();
    let nb = norm2(&b_perp);
    let e2: Vec<f64> = b_perp.iter().map(|x| x / nb).collect();
    let (c1, c2) = (dot(w, &e1), dot(w, &e2));
    let proj = (c1 * c1 + c2 * c2).sqrt();
    (proj / norm2(w)).min(1.0).acos()
}
