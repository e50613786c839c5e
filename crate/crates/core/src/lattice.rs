//! The damped and driven dNLS chain in Cartesian `(p, q)` and energy-phase
//! `(E, ψ)` coordinates.
//!
//! In the frame rotating at `omega`, with `z_j = p_j + i q_j`,
//!
//! ```text
//! ṗ_j =  ε(Δq)_j + ω q_j - |z_j|² q_j + β δ_{j1} p_1 - γ δ_{jN} p_N
//! q̇_j = -ε(Δp)_j - ω p_j + |z_j|² p_j + β δ_{j1} q_1 - γ δ_{jN} q_N
//! ```
//!
//! where `Δ` has free ends: `(Δx)_1 = x_2 - x_1`, `(Δx)_N = x_{N-1} - x_N`.

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub n_sites: usize,
    pub eps: f64,
    pub gamma: f64,
    pub beta: f64,
    pub omega: f64,
}

impl LatticeParams {
    pub fn new(n_sites: usize, eps: f64, gamma: f64, beta: f64, omega: f64) -> Result<Self> {
        let p = LatticeParams {
            n_sites,
            eps,
            gamma,
            beta,
            omega,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.n_sites < 2 {
            errs.push(format!("n_sites must be >= 2, got {}", self.n_sites));
        }
        if !self.eps.is_finite() {
            errs.push(format!("eps must be finite, got {}", self.eps));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            errs.push(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            errs.push(format!("beta must be >= 0, got {}", self.beta));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            errs.push(format!("omega must be > 0, got {}", self.omega));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(errs.join("; ")))
        }
    }

    pub fn with_beta(self, beta: f64) -> Self {
        LatticeParams { beta, ..self }
    }

    pub fn with_omega(self, omega: f64) -> Self {
        LatticeParams { omega, ..self }
    }

    /// Diagonal weight of the free-end Laplacian at 0-based site `j`.
    pub fn laplacian_degree(&self, j: usize) -> f64 {
        degree(j, self.n_sites)
    }
}

#[inline]
fn degree(j: usize, n: usize) -> f64 {
    if j == 0 || j + 1 == n {
        1.0
    } else {
        2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartesianState {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl CartesianState {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::InvalidInput(format!(
                "p has {} sites but q has {}",
                p.len(),
                q.len()
            )));
        }
        Ok(CartesianState { p, q })
    }

    pub fn zeros(n: usize) -> Self {
        CartesianState {
            p: vec![0.0; n],
            q: vec![0.0; n],
        }
    }

    /// Only site 1 excited, `p_1 = amplitude`.
    pub fn single_site(n: usize, amplitude: f64) -> Self {
        let mut s = Self::zeros(n);
        s.p[0] = amplitude;
        s
    }

    pub fn n_sites(&self) -> usize {
        self.p.len()
    }

    /// Layout `(p_1..p_N, q_1..q_N)`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.p.clone();
        v.extend_from_slice(&self.q);
        v
    }

    pub fn from_flat(u: &[f64]) -> Result<Self> {
        if !u.len().is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "flat state has odd length {}",
                u.len()
            )));
        }
        let n = u.len() / 2;
        Ok(CartesianState {
            p: u[..n].to_vec(),
            q: u[n..].to_vec(),
        })
    }

    /// Multiplies every `z_j` by `e^{iθ}`.
    pub fn rotated(&self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let p = self
            .p
            .iter()
            .zip(&self.q)
            .map(|(p, q)| c * p - s * q)
            .collect();
        let q = self
            .p
            .iter()
            .zip(&self.q)
            .map(|(p, q)| s * p + c * q)
            .collect();
        CartesianState { p, q }
    }

    /// `Σ_j (p_j² + q_j²)`.
    pub fn norm_sq(&self) -> f64 {
        self.p.iter().zip(&self.q).map(|(p, q)| p * p + q * q).sum()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.p
            .iter()
            .zip(&self.q)
            .map(|(p, q)| 0.5 * (p * p + q * q))
            .collect()
    }

    fn check(&self, params: &LatticeParams) -> Result<()> {
        if self.p.len() != params.n_sites || self.q.len() != params.n_sites {
            return Err(Error::InvalidInput(format!(
                "state has ({}, {}) components, params expect {}",
                self.p.len(),
                self.q.len(),
                params.n_sites
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyPhaseState {
    pub energies: Vec<f64>,
    pub phase_diffs: Vec<f64>,
}

impl EnergyPhaseState {
    pub fn new(energies: Vec<f64>, phase_diffs: Vec<f64>) -> Result<Self> {
        if energies.len() < 2 || phase_diffs.len() + 1 != energies.len() {
            return Err(Error::InvalidInput(format!(
                "need N >= 2 energies and N-1 phase differences, got {} and {}",
                energies.len(),
                phase_diffs.len()
            )));
        }
        Ok(EnergyPhaseState {
            energies,
            phase_diffs,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.energies.len()
    }

    /// Layout `(E_1..E_N, ψ_1..ψ_{N-1})`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.energies.clone();
        v.extend_from_slice(&self.phase_diffs);
        v
    }

    pub fn from_flat(u: &[f64]) -> Result<Self> {
        if u.len() < 3 || u.len().is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "flat energy-phase state has bad length {}",
                u.len()
            )));
        }
        let n = u.len().div_ceil(2);
        Ok(EnergyPhaseState {
            energies: u[..n].to_vec(),
            phase_diffs: u[n..].to_vec(),
        })
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Allocation-free form of [`vector_field_cartesian`] on the flat layout.
pub fn vector_field_flat(params: &LatticeParams, u: &[f64], du: &mut [f64]) {
    let n = params.n_sites;
    debug_assert_eq!(u.len(), 2 * n);
    let (p, q) = u.split_at(n);
    let (dp, dq) = du.split_at_mut(n);
    let (eps, om) = (params.eps, params.omega);
    for j in 0..n {
        let (lp, lq) = if j == 0 {
            (p[1] - p[0], q[1] - q[0])
        } else if j + 1 == n {
            (p[n - 2] - p[n - 1], q[n - 2] - q[n - 1])
        } else {
            (
                p[j + 1] + p[j - 1] - 2.0 * p[j],
                q[j + 1] + q[j - 1] - 2.0 * q[j],
            )
        };
        let r2 = p[j] * p[j] + q[j] * q[j];
        dp[j] = eps * lq + om * q[j] - r2 * q[j];
        dq[j] = -eps * lp - om * p[j] + r2 * p[j];
    }
    dp[0] += params.beta * p[0];
    dq[0] += params.beta * q[0];
    dp[n - 1] -= params.gamma * p[n - 1];
    dq[n - 1] -= params.gamma * q[n - 1];
}

/// Analytic Jacobian `∂(ṗ, q̇)/∂(p, q)` on the flat layout.
pub fn vector_field_jacobian(params: &LatticeParams, u: &[f64]) -> Matrix {
    let n = params.n_sites;
    let (p, q) = u.split_at(n);
    let (eps, om) = (params.eps, params.omega);
    let mut j = Matrix::zeros(2 * n, 2 * n);
    for s in 0..n {
        let a = degree(s, n);
        let (ps, qs) = (p[s], q[s]);
        let damp =
            if s == 0 { params.beta } else { 0.0 } - if s + 1 == n { params.gamma } else { 0.0 };
        j[(s, s)] = -2.0 * ps * qs + damp;
        j[(s, n + s)] = -eps * a + om - (ps * ps + 3.0 * qs * qs);
        j[(n + s, s)] = eps * a - om + 3.0 * ps * ps + qs * qs;
        j[(n + s, n + s)] = 2.0 * ps * qs + damp;
        for k in [s.wrapping_sub(1), s + 1] {
            if k < n {
                j[(s, n + k)] = eps;
                j[(n + s, k)] = -eps;
            }
        }
    }
    j
}

pub fn vector_field_cartesian(
    state: &CartesianState,
    params: &LatticeParams,
) -> Result<CartesianState> {
    state.check(params)?;
    let u = state.to_flat();
    let mut du = vec![0.0; u.len()];
    vector_field_flat(params, &u, &mut du);
    CartesianState::from_flat(&du)
}

/// Allocation-free form of [`vector_field_energy_phase`]; `u` is
/// `(E_1..E_N, ψ_1..ψ_{N-1})`. Energies must be positive.
pub fn vector_field_energy_phase_flat(params: &LatticeParams, u: &[f64], du: &mut [f64]) {
    let n = params.n_sites;
    let (e, psi) = u.split_at(n);
    let (de, dpsi) = du.split_at_mut(n);
    let eps = params.eps;
    for j in 0..n {
        let mut v = 0.0;
        if j > 0 {
            v -= 2.0 * eps * (e[j] * e[j - 1]).sqrt() * psi[j - 1].sin();
        }
        if j + 1 < n {
            v += 2.0 * eps * (e[j + 1] * e[j]).sqrt() * psi[j].sin();
        }
        de[j] = v;
    }
    de[0] += 2.0 * params.beta * e[0];
    de[n - 1] -= 2.0 * params.gamma * e[n - 1];
    for j in 0..n - 1 {
        let mut v =
            2.0 * (e[j + 1] - e[j]) * (1.0 + eps * psi[j].cos() / (2.0 * (e[j] * e[j + 1]).sqrt()));
        if j + 2 < n {
            v -= eps * (e[j + 2] / e[j + 1]).sqrt() * psi[j + 1].cos();
        }
        if j > 0 {
            v += eps * (e[j - 1] / e[j]).sqrt() * psi[j - 1].cos();
        }
        v += eps * (degree(j + 1, n) - degree(j, n));
        dpsi[j] = v;
    }
}

pub fn vector_field_energy_phase(
    state: &EnergyPhaseState,
    params: &LatticeParams,
) -> Result<EnergyPhaseState> {
    if state.energies.len() != params.n_sites || state.phase_diffs.len() + 1 != params.n_sites {
        return Err(Error::InvalidInput(format!(
            "energy-phase state has ({}, {}) components, params expect N = {}",
            state.energies.len(),
            state.phase_diffs.len(),
            params.n_sites
        )));
    }
    if let Some(site) = state.energies.iter().position(|&e| !(e > 0.0)) {
        return Err(Error::SingularState { site });
    }
    let u = state.to_flat();
    let mut du = vec![0.0; u.len()];
    vector_field_energy_phase_flat(params, &u, &mut du);
    EnergyPhaseState::from_flat(&du)
}

pub fn cartesian_to_energy_phase(state: &CartesianState) -> Result<EnergyPhaseState> {
    let n = state.n_sites();
    if state.q.len() != n || n < 2 {
        return Err(Error::InvalidInput(format!(
            "need N >= 2 sites with matching p, q; got {n}"
        )));
    }
    let energies = state.energies();
    if let Some(site) = energies.iter().position(|&e| !(e > 0.0)) {
        return Err(Error::SingularState { site });
    }
    let phases: Vec<f64> = state
        .p
        .iter()
        .zip(&state.q)
        .map(|(p, q)| q.atan2(*p))
        .collect();
    let phase_diffs = phases.windows(2).map(|w| wrap_angle(w[1] - w[0])).collect();
    Ok(EnergyPhaseState {
        energies,
        phase_diffs,
    })
}

pub fn energy_phase_to_cartesian(state: &EnergyPhaseState, phi1: f64) -> Result<CartesianState> {
    let n = state.n_sites();
    if n < 2 || state.phase_diffs.len() + 1 != n {
        return Err(Error::InvalidInput(
            "energy-phase state dimensions are inconsistent".into(),
        ));
    }
    if let Some(site) = state.energies.iter().position(|&e| !(e >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "negative energy at site {site}"
        )));
    }
    let mut phi = phi1;
    let mut p = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    for j in 0..n {
        if j > 0 {
            phi += state.phase_diffs[j - 1];
        }
        let r = (2.0 * state.energies[j]).sqrt();
        p.push(r * phi.cos());
        q.push(r * phi.sin());
    }
    Ok(CartesianState { p, q })
}

/// Phase velocity of site 1 in the lab frame,
/// `ω(t) = 2E_1 + ε - ε √(E_2/E_1) cos ψ_1`.
pub fn instantaneous_frequency(state: &EnergyPhaseState, params: &LatticeParams) -> Result<f64> {
    let e1 = state.energies[0];
    if !(e1 > 0.0) {
        return Err(Error::SingularState { site: 0 });
    }
    let e2 = state.energies.get(1).copied().unwrap_or(0.0).max(0.0);
    let psi1 = state.phase_diffs.first().copied().unwrap_or(0.0);
    Ok(2.0 * e1 + params.eps - params.eps * (e2 / e1).sqrt() * psi1.cos())
}
