//! Damped and driven breathers: fixed points of the rotating-frame flow for
//! which the drive `β` at site 1 exactly balances the loss `γ` at site N.
//!
//! The global phase is fixed by `q_1 = 0`, which leaves the `2N` unknowns
//! `(p_1..p_N, q_2..q_N, β)` against the `2N` components of the vector field.

use crate::error::{Error, Result};
use crate::lattice::{
    cartesian_to_energy_phase, vector_field_flat, vector_field_jacobian, wrap_angle,
    CartesianState, LatticeParams,
};
use crate::numerics::linalg::norm_inf;
use crate::numerics::{newton_solve, Matrix, NewtonConfig};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breather {
    /// `beta` holds the solved β*.
    pub params: LatticeParams,
    pub state: CartesianState,
    pub residual_norm: f64,
    pub omega: f64,
    pub iterations: usize,
}

impl Breather {
    pub fn beta(&self) -> f64 {
        self.params.beta
    }

    pub fn n_sites(&self) -> usize {
        self.params.n_sites
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.state.to_flat()
    }

    /// The Newton unknowns `(p_1..p_N, q_2..q_N, β)`.
    pub fn unknowns(&self) -> Vec<f64> {
        pack(&self.state, self.params.beta)
    }
}

/// Leading-order profile in powers of `ε/ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticBreather {
    pub params: LatticeParams,
    pub state: CartesianState,
    /// Power of `ε/ω` carried by each `p_j`.
    pub p_order: Vec<u32>,
    /// Power of `ε/ω` carried by each `q_j` (`q_1 = 0` by gauge).
    pub q_order: Vec<u32>,
    pub beta_order: u32,
}

impl AsymptoticBreather {
    pub fn beta(&self) -> f64 {
        self.params.beta
    }
}

fn pack(state: &CartesianState, beta: f64) -> Vec<f64> {
    let mut x = state.p.clone();
    x.extend_from_slice(&state.q[1..]);
    x.push(beta);
    x
}

fn unpack(x: &[f64], n: usize) -> (Vec<f64>, f64) {
    let mut u = Vec::with_capacity(2 * n);
    u.extend_from_slice(&x[..n]);
    u.push(0.0);
    u.extend_from_slice(&x[n..2 * n - 1]);
    (u, x[2 * n - 1])
}

/// The `2N` fixed-point conditions `f_1..f_{2N}` (the vector field with the
/// given `beta`). `q[0]` is used as passed; solvers keep it at 0.
pub fn residual(p: &[f64], q: &[f64], beta: f64, params: &LatticeParams) -> Result<Vec<f64>> {
    let n = params.n_sites;
    if p.len() != n || q.len() != n {
        return Err(Error::InvalidInput(format!(
            "expected {n} sites, got p: {}, q: {}",
            p.len(),
            q.len()
        )));
    }
    let prm = params.with_beta(beta);
    let mut u = p.to_vec();
    u.extend_from_slice(q);
    let mut f = vec![0.0; 2 * n];
    vector_field_flat(&prm, &u, &mut f);
    Ok(f)
}

fn residual_x(params: &LatticeParams, x: &[f64]) -> Vec<f64> {
    let n = params.n_sites;
    let (u, beta) = unpack(x, n);
    let mut f = vec![0.0; 2 * n];
    vector_field_flat(&params.with_beta(beta), &u, &mut f);
    f
}

fn jacobian_x(params: &LatticeParams, x: &[f64]) -> Matrix {
    let n = params.n_sites;
    let (u, beta) = unpack(x, n);
    let full = vector_field_jacobian(&params.with_beta(beta), &u);
    // Column for q_1 is replaced by ∂f/∂β = (p_1 e_1, q_1 e_{N+1}).
    Matrix::from_fn(2 * n, 2 * n, |r, c| {
        if c < n {
            full[(r, c)]
        } else if c < 2 * n - 1 {
            full[(r, c + 1)]
        } else if r == 0 {
            u[0]
        } else if r == n {
            u[n]
        } else {
            0.0
        }
    })
}

pub fn asymptotic_breather(
    eps: f64,
    gamma: f64,
    omega: f64,
    n_sites: usize,
) -> Result<AsymptoticBreather> {
    let base = LatticeParams::new(n_sites, eps, gamma, 0.0, omega)?;
    let n = n_sites as i32;
    let p1 = omega.sqrt();
    let r = eps / omega;
    let p: Vec<f64> = (0..n).map(|j| (-r).powi(j) * p1).collect();
    let mut q = vec![0.0; n_sites];
    for j1 in 2..=n {
        let k = 2 * n - j1 - 1;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        q[(j1 - 1) as usize] = sign * (gamma / omega) * r.powi(k) * p1;
    }
    let beta = gamma * r.powi(2 * n - 2);
    Ok(AsymptoticBreather {
        params: base.with_beta(beta),
        state: CartesianState { p, q },
        p_order: (0..n as u32).collect(),
        q_order: (1..=n as u32)
            .map(|j| if j == 1 { 0 } else { 2 * n as u32 - j - 1 })
            .collect(),
        beta_order: 2 * n as u32 - 2,
    })
}

pub fn solve_breather(
    eps: f64,
    gamma: f64,
    omega: f64,
    n_sites: usize,
    cfg: &NewtonConfig,
) -> Result<Breather> {
    let seed = asymptotic_breather(eps, gamma, omega, n_sites)?;
    solve_from_seed(&seed.params, &pack(&seed.state, seed.params.beta), cfg)
}

/// Newton solve at `params` (its `beta` is ignored) starting from the packed
/// unknowns `x0 = (p_1..p_N, q_2..q_N, β)`.
pub fn solve_from_seed(params: &LatticeParams, x0: &[f64], cfg: &NewtonConfig) -> Result<Breather> {
    params.validate()?;
    let n = params.n_sites;
    if x0.len() != 2 * n {
        return Err(Error::InvalidInput(format!(
            "seed has {} unknowns, expected {}",
            x0.len(),
            2 * n
        )));
    }
    let rep = newton_solve(
        |x| residual_x(params, x),
        |x| jacobian_x(params, x),
        x0,
        cfg,
    )?;
    let (u, beta) = unpack(&rep.x, n);
    let state = CartesianState::from_flat(&u)?;
    let prm = params.with_beta(beta);
    let mut f = vec![0.0; 2 * n];
    vector_field_flat(&prm, &u, &mut f);
    Ok(Breather {
        params: prm,
        state,
        residual_norm: norm_inf(&f),
        omega: params.omega,
        iterations: rep.iterations,
    })
}

/// Step control for [`continue_in_omega`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationConfig {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub newton: NewtonConfig,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            initial_step: 0.01,
            min_step: 1e-8,
            max_step: 0.05,
            newton: NewtonConfig::default(),
        }
    }
}

/// Natural-parameter continuation in `ω` from `start` to `omega_target`.
/// The step halves on Newton failure and grows by 1.5 after fast solves;
/// seeds are extrapolated linearly from the last two members.
pub fn continue_in_omega(
    start: &Breather,
    omega_target: f64,
    cfg: &ContinuationConfig,
) -> Result<Vec<Breather>> {
    if !(omega_target > 0.0) {
        return Err(Error::InvalidInput(format!(
            "omega_target must be > 0, got {omega_target}"
        )));
    }
    let mut family = vec![start.clone()];
    let dir = (omega_target - start.omega).signum();
    let mut h = cfg.initial_step.abs().min(cfg.max_step);
    while (omega_target - family.last().unwrap().omega) * dir > 1e-14 {
        let last = family.last().unwrap();
        let remaining = (omega_target - last.omega).abs();
        let step = h.min(remaining);
        let om = if step == remaining {
            omega_target
        } else {
            last.omega + dir * step
        };
        let x_last = last.unknowns();
        let seed = if family.len() >= 2 {
            let prev = &family[family.len() - 2];
            let x_prev = prev.unknowns();
            let s = (om - last.omega) / (last.omega - prev.omega);
            x_last
                .iter()
                .zip(&x_prev)
                .map(|(a, b)| a + s * (a - b))
                .collect()
        } else {
            x_last
        };
        match solve_from_seed(&last.params.with_omega(om), &seed, &cfg.newton) {
            Ok(b) => {
                if b.iterations <= 3 {
                    h = (h * 1.5).min(cfg.max_step);
                }
                family.push(b);
            }
            Err(_) => {
                h *= 0.5;
                if h < cfg.min_step {
                    let omega = family.last().unwrap().omega;
                    return Err(Error::ContinuationStalled {
                        omega,
                        partial: family,
                    });
                }
            }
        }
    }
    Ok(family)
}

/// Adjacent phase differences `ψ_j` of the breather.
pub fn twist(breather: &Breather) -> Result<Vec<f64>> {
    Ok(cartesian_to_energy_phase(&breather.state)?.phase_diffs)
}

/// Twist measured from the undamped reference: `ψ_j` itself when the
/// undamped profile is in phase (`ε < 0`), `ψ_j + π` wrapped when it
/// alternates (`ε > 0`).
pub fn twist_reduced(breather: &Breather) -> Result<Vec<f64>> {
    let shift = if breather.params.eps > 0.0 { PI } else { 0.0 };
    Ok(twist(breather)?
        .into_iter()
        .map(|psi| wrap_angle(psi + shift))
        .collect())
}

/// Leading-order twist `ψ_j = (γ/ω)(ε/ω)^{2(N-j-1)}`, `j = 1..N-1`.
pub fn twist_leading_order(n_sites: usize, eps: f64, gamma: f64, omega: f64) -> Vec<f64> {
    let n = n_sites as i32;
    (1..n)
        .map(|j| (gamma / omega) * (eps / omega).powi(2 * (n - j - 1)))
        .collect()
}

/// Leading-order `∂β*/∂ω = -(2N-2)(γ/ω)(ε/ω)^{2N-2}`.
pub fn d_beta_d_omega_leading_order(n_sites: usize, eps: f64, gamma: f64, omega: f64) -> f64 {
    let k = 2 * n_sites as i32 - 2;
    -(k as f64) * (gamma / omega) * (eps / omega).powi(k)
}
