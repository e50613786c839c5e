//! Damped-only evolution from near-breather data: simulation, projection onto
//! the breather cylinder, and escape from the metastable state.

use crate::breather::Breather;
use crate::error::{Error, Result};
use crate::lattice::{
    cartesian_to_energy_phase, instantaneous_frequency, vector_field_flat, CartesianState,
    EnergyPhaseState, LatticeParams,
};
use crate::numerics::linalg::dot;
use crate::numerics::{fit_powers, integrate_with, IntegratorConfig, PolyFit};
use crate::stability::TangentFrame;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::ControlFlow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFailure {
    pub t: f64,
    pub y: Vec<f64>,
    pub reason: String,
}

/// Sampled trajectory in the rotating frame of `params.omega`. Per-sample
/// energy-phase observables are NaN where some site has zero energy.
/// `alpha1`, `alpha2_tilde` and `distance_to_family` stay empty until filled
/// by [`attach_modulation`] and [`attach_family_distance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationTrace {
    pub params: LatticeParams,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub energies: Vec<Vec<f64>>,
    pub phase_diffs: Vec<Vec<f64>>,
    pub omega_of_t: Vec<f64>,
    pub alpha1: Vec<f64>,
    pub alpha2_tilde: Vec<f64>,
    pub distance_to_family: Vec<f64>,
    pub failure: Option<TraceFailure>,
}

impl ModulationTrace {
    fn new(params: LatticeParams) -> Self {
        ModulationTrace {
            params,
            times: Vec::new(),
            states: Vec::new(),
            energies: Vec::new(),
            phase_diffs: Vec::new(),
            omega_of_t: Vec::new(),
            alpha1: Vec::new(),
            alpha2_tilde: Vec::new(),
            distance_to_family: Vec::new(),
            failure: None,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn total_energy(&self, k: usize) -> f64 {
        self.energies[k].iter().sum()
    }

    /// Energy of site `j` (0-based) over the whole trace.
    pub fn site_energy(&self, j: usize) -> Vec<f64> {
        self.energies.iter().map(|e| e[j]).collect()
    }

    /// Phase difference `ψ_{j+1}` (0-based `j`) over the whole trace.
    pub fn phase_series(&self, j: usize) -> Vec<f64> {
        self.phase_diffs.iter().map(|p| p[j]).collect()
    }

    pub fn last_state(&self) -> Option<CartesianState> {
        self.states
            .last()
            .and_then(|u| CartesianState::from_flat(u).ok())
    }

    /// Rebuilds the derived observables from stored samples, e.g. a
    /// checkpoint holding only `times` and `states`.
    pub fn from_samples(params: LatticeParams, times: &[f64], states: &[Vec<f64>]) -> Result<Self> {
        params.validate()?;
        if times.len() != states.len() || states.iter().any(|u| u.len() != 2 * params.n_sites) {
            return Err(Error::InvalidInput(format!(
                "need one state of length {} per sample time",
                2 * params.n_sites
            )));
        }
        let mut trace = ModulationTrace::new(params);
        for (&t, u) in times.iter().zip(states) {
            trace.push(t, u);
        }
        Ok(trace)
    }

    /// Appends `other`, dropping its first sample if it repeats our last time.
    pub fn extend(&mut self, mut other: ModulationTrace) {
        if let (Some(&a), Some(&b)) = (self.times.last(), other.times.first()) {
            if b <= a {
                let k = other.times.partition_point(|&t| t <= a);
                other.times.drain(..k);
                other.states.drain(..k);
                other.energies.drain(..k);
                other.phase_diffs.drain(..k);
                other.omega_of_t.drain(..k);
            }
        }
        self.times.append(&mut other.times);
        self.states.append(&mut other.states);
        self.energies.append(&mut other.energies);
        self.phase_diffs.append(&mut other.phase_diffs);
        self.omega_of_t.append(&mut other.omega_of_t);
        self.failure = other.failure;
    }

    fn push(&mut self, t: f64, u: &[f64]) {
        let n = self.params.n_sites;
        let state = CartesianState {
            p: u[..n].to_vec(),
            q: u[n..].to_vec(),
        };
        let energies = state.energies();
        let (psi, omega) = match cartesian_to_energy_phase(&state) {
            Ok(ep) => {
                let w = instantaneous_frequency(&ep, &self.params).unwrap_or(f64::NAN);
                (ep.phase_diffs, w)
            }
            Err(_) => (vec![f64::NAN; n.saturating_sub(1)], f64::NAN),
        };
        self.times.push(t);
        self.states.push(u.to_vec());
        self.energies.push(energies);
        self.phase_diffs.push(psi);
        self.omega_of_t.push(omega);
    }
}

/// Sample times `t0, t0 + dt, ...` up to and including `t1`.
pub fn sample_grid(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let n = ((t1 - t0) / dt + 1e-9).floor() as usize;
    let mut ts: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * dt).collect();
    if ts.last().is_some_and(|&t| t < t1 - 1e-9 * dt) {
        ts.push(t1);
    }
    ts
}

/// Integrates the full Cartesian system over `[t0, t1]`, sampling every
/// `sample_dt`. An integrator failure returns the partial trace with
/// `failure` set rather than an error.
pub fn simulate_span(
    initial: &CartesianState,
    params: &LatticeParams,
    (t0, t1): (f64, f64),
    sample_dt: f64,
    cfg: &IntegratorConfig,
) -> Result<ModulationTrace> {
    params.validate()?;
    if initial.n_sites() != params.n_sites || initial.q.len() != params.n_sites {
        return Err(Error::InvalidInput(format!(
            "initial state has {} sites, params expect {}",
            initial.n_sites(),
            params.n_sites
        )));
    }
    if !(sample_dt > 0.0) || !sample_dt.is_finite() {
        return Err(Error::InvalidInput(format!(
            "sample_dt must be positive, got {sample_dt}"
        )));
    }
    let prm = *params;
    let ts = sample_grid(t0, t1, sample_dt);
    let mut trace = ModulationTrace::new(prm);
    let res = integrate_with(
        |_, u, du| vector_field_flat(&prm, u, du),
        &initial.to_flat(),
        (t0, t1),
        cfg,
        &ts,
        |t, u| {
            trace.push(t, u);
            ControlFlow::Continue(())
        },
    );
    match res {
        Ok(_) => Ok(trace),
        Err(Error::IntegrationFailure { t, y, reason }) => {
            trace.failure = Some(TraceFailure { t, y, reason });
            Ok(trace)
        }
        Err(e) => Err(e),
    }
}

pub fn simulate(
    initial: &CartesianState,
    params: &LatticeParams,
    t_end: f64,
    sample_dt: f64,
    cfg: &IntegratorConfig,
) -> Result<ModulationTrace> {
    simulate_span(initial, params, (0.0, t_end), sample_dt, cfg)
}

/// The damped, undriven evolution. Requires `β = 0`.
pub fn simulate_damped(
    initial: &CartesianState,
    params: &LatticeParams,
    t_end: f64,
    sample_dt: f64,
    cfg: &IntegratorConfig,
) -> Result<ModulationTrace> {
    if params.beta != 0.0 || params.gamma < 0.0 {
        return Err(Error::InvalidInput(format!(
            "damped evolution needs beta = 0 and gamma >= 0, got beta={}, gamma={}",
            params.beta, params.gamma
        )));
    }
    simulate(initial, params, t_end, sample_dt, cfg)
}

/// Global phase `θ` minimizing `‖R(-θ)u - u*‖`: `arg Σ conj(z*_j) z_j`.
pub fn optimal_phase(u: &[f64], u_star: &[f64]) -> f64 {
    let n = u.len() / 2;
    let (mut re, mut im) = (0.0, 0.0);
    for j in 0..n {
        let (p, q) = (u[j], u[n + j]);
        let (ps, qs) = (u_star[j], u_star[n + j]);
        re += ps * p + qs * q;
        im += ps * q - qs * p;
    }
    im.atan2(re)
}

fn rotate_flat(u: &[f64], theta: f64) -> Vec<f64> {
    let n = u.len() / 2;
    let (s, c) = theta.sin_cos();
    let mut v = vec![0.0; 2 * n];
    for j in 0..n {
        v[j] = c * u[j] - s * u[n + j];
        v[n + j] = s * u[j] + c * u[n + j];
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// Optimal alignment phase, in `(-π, π]`.
    pub theta: f64,
    pub alpha1: f64,
    pub alpha2_tilde: f64,
}

/// Aligns `u` to `u*` by a global rotation and projects the remainder onto
/// the dual frame. The rotation angle counts toward `α₁`.
pub fn project_onto_frame(u: &[f64], breather: &Breather, frame: &TangentFrame) -> Projection {
    let u_star = breather.to_flat();
    let theta = optimal_phase(u, &u_star);
    project_with_phase(u, &u_star, frame, theta)
}

fn project_with_phase(u: &[f64], u_star: &[f64], frame: &TangentFrame, theta: f64) -> Projection {
    let w: Vec<f64> = rotate_flat(u, -theta)
        .iter()
        .zip(u_star)
        .map(|(a, b)| a - b)
        .collect();
    Projection {
        theta,
        alpha1: theta + dot(&frame.n1_tilde, &w),
        alpha2_tilde: dot(&frame.n2, &w),
    }
}

/// Fills `alpha1`, `alpha2_tilde` with the phase unwrapped along the trace.
pub fn attach_modulation(trace: &mut ModulationTrace, breather: &Breather, frame: &TangentFrame) {
    let u_star = breather.to_flat();
    let mut prev: Option<f64> = None;
    trace.alpha1.clear();
    trace.alpha2_tilde.clear();
    for u in &trace.states {
        let raw = optimal_phase(u, &u_star);
        let theta = match prev {
            None => raw,
            Some(p) => p + (raw - p + PI).rem_euclid(2.0 * PI) - PI,
        };
        prev = Some(theta);
        let pr = project_with_phase(u, &u_star, frame, theta);
        trace.alpha1.push(pr.alpha1);
        trace.alpha2_tilde.push(pr.alpha2_tilde);
    }
}

/// Linear-theory prediction at `ω = 1`:
/// `α₁ = -γε^{2N-2}t²`, `α̃₂ = -2γε^{2N-2}t`.
pub fn modulation_prediction(params: &LatticeParams, t: f64) -> (f64, f64) {
    let b = params.gamma * params.eps.powi(2 * params.n_sites as i32 - 2);
    (-b * t * t, -2.0 * b * t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationFit {
    pub window: (f64, f64),
    /// `t²` coefficient of the quadratic fit of `α₁`.
    pub alpha1_quadratic: f64,
    pub alpha1_r_squared: f64,
    /// Slope of the linear fit of `α̃₂`.
    pub alpha2_slope: f64,
    pub alpha2_r_squared: f64,
    /// `-γε^{2N-2}`.
    pub predicted_quadratic: f64,
    /// `-2γε^{2N-2}`.
    pub predicted_slope: f64,
}

/// Fits `α̃₂ ≈ a + bt` and `α₁ ≈ c + dt + et²` on samples with `t` in `window`.
pub fn fit_modulation(trace: &ModulationTrace, window: (f64, f64)) -> Result<ModulationFit> {
    if trace.alpha1.len() != trace.len() {
        return Err(Error::InvalidInput(
            "trace has no modulation data; call attach_modulation first".into(),
        ));
    }
    let idx: Vec<usize> = (0..trace.len())
        .filter(|&k| trace.times[k] >= window.0 && trace.times[k] <= window.1)
        .collect();
    let t: Vec<f64> = idx.iter().map(|&k| trace.times[k]).collect();
    let a1: Vec<f64> = idx.iter().map(|&k| trace.alpha1[k]).collect();
    let a2: Vec<f64> = idx.iter().map(|&k| trace.alpha2_tilde[k]).collect();
    let q: PolyFit = fit_powers(&t, &a1, &[0, 1, 2])?;
    let l: PolyFit = fit_powers(&t, &a2, &[0, 1])?;
    let (p1, _) = modulation_prediction(&trace.params, 1.0);
    Ok(ModulationFit {
        window,
        alpha1_quadratic: q.coeffs[2],
        alpha1_r_squared: q.r_squared,
        alpha2_slope: l.coeffs[1],
        alpha2_r_squared: l.r_squared,
        predicted_quadratic: p1,
        predicted_slope: 2.0 * p1,
    })
}

/// Instantaneous frequency at each sample, truncated at the first sample
/// where it cannot be evaluated.
pub fn track_frequency(trace: &ModulationTrace) -> Vec<f64> {
    let mut out = Vec::with_capacity(trace.len());
    for (e, psi) in trace.energies.iter().zip(&trace.phase_diffs) {
        let ep = EnergyPhaseState {
            energies: e.clone(),
            phase_diffs: psi.clone(),
        };
        match instantaneous_frequency(&ep, &trace.params) {
            Ok(w) if w.is_finite() => out.push(w),
            _ => break,
        }
    }
    out
}

/// Measured twist at the damped end against its analytic candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwistComparison {
    pub times: Vec<f64>,
    /// `ψ_{N-1}`, measured from the undamped reference (shifted by `π`
    /// when `ε > 0`).
    pub psi: Vec<f64>,
    /// `γ/ω(t)`.
    pub gamma_over_omega: Vec<f64>,
    /// `γ/(2E₁(t))`.
    pub gamma_over_2e1: Vec<f64>,
    /// `γ/E₁(t)`.
    pub gamma_over_e1: Vec<f64>,
}

pub fn twist_comparison(trace: &ModulationTrace) -> TwistComparison {
    let g = trace.params.gamma;
    let shift = if trace.params.eps > 0.0 { PI } else { 0.0 };
    let omega = track_frequency(trace);
    let m = omega.len();
    let n = trace.params.n_sites;
    let psi = trace.phase_diffs[..m]
        .iter()
        .map(|p| crate::lattice::wrap_angle(p[n - 2] + shift))
        .collect();
    let e1: Vec<f64> = trace.energies[..m].iter().map(|e| e[0]).collect();
    TwistComparison {
        times: trace.times[..m].to_vec(),
        psi,
        gamma_over_omega: omega.iter().map(|w| g / w).collect(),
        gamma_over_2e1: e1.iter().map(|e| g / (2.0 * e)).collect(),
        gamma_over_e1: e1.iter().map(|e| g / e).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeCriterion {
    /// Escape once the gap is below this fraction of its plateau value.
    pub fraction: f64,
    /// ... and stays below for this long.
    pub dwell: f64,
    /// The plateau gap is read at this time.
    pub settle_time: f64,
}

impl Default for EscapeCriterion {
    fn default() -> Self {
        EscapeCriterion {
            fraction: 0.25,
            dwell: 1000.0,
            settle_time: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeReport {
    /// `None` when the trace never leaves the metastable state.
    pub escape_time: Option<f64>,
    pub criterion: String,
    pub plateau_gap: f64,
    pub final_energies: Vec<f64>,
}

impl EscapeReport {
    pub fn reached(&self) -> bool {
        self.escape_time.is_some()
    }
}

/// Energy gap `E₁ - max_{j>1} E_j` at each sample.
pub fn energy_gap(trace: &ModulationTrace) -> Vec<f64> {
    trace
        .energies
        .iter()
        .map(|e| e[0] - e[1..].iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x)))
        .collect()
}

pub fn detect_escape(trace: &ModulationTrace, criterion: &EscapeCriterion) -> EscapeReport {
    let desc = format!(
        "gap E1 - max(E_j>1) below {} of its value at t={} for {} time units",
        criterion.fraction, criterion.settle_time, criterion.dwell
    );
    let final_energies = trace.energies.last().cloned().unwrap_or_default();
    let gap = energy_gap(trace);
    let k0 = trace.times.partition_point(|&t| t < criterion.settle_time);
    let plateau = gap.get(k0).copied().unwrap_or(f64::NAN);
    let not_reached = |plateau_gap| EscapeReport {
        escape_time: None,
        criterion: desc.clone(),
        plateau_gap,
        final_energies: final_energies.clone(),
    };
    // Without a dominant first site there is no metastable state to leave.
    let scale = trace
        .energies
        .get(k0)
        .map_or(0.0, |e| e.iter().sum::<f64>());
    if !(plateau > 1e-3 * scale) {
        return not_reached(plateau);
    }
    let threshold = criterion.fraction * plateau;
    let mut start: Option<usize> = None;
    for k in k0..trace.len() {
        if gap[k] < threshold {
            let s = *start.get_or_insert(k);
            if trace.times[k] - trace.times[s] >= criterion.dwell {
                return EscapeReport {
                    escape_time: Some(trace.times[s]),
                    criterion: desc,
                    plateau_gap: plateau,
                    final_energies,
                };
            }
        } else {
            start = None;
        }
    }
    not_reached(plateau)
}

/// Distance from `u` to the polyline through the phase-aligned family
/// members, minimized over the global phase and the segment parameter.
pub fn distance_to_family(u: &[f64], family: &[Breather]) -> f64 {
    let members: Vec<Vec<f64>> = family.iter().map(|b| b.to_flat()).collect();
    if members.is_empty() {
        return f64::NAN;
    }
    let mut best = f64::INFINITY;
    for (i, m) in members.iter().enumerate() {
        let w = rotate_flat(u, -optimal_phase(u, m));
        let d0: Vec<f64> = w.iter().zip(m).map(|(a, b)| a - b).collect();
        best = best.min(dot(&d0, &d0).sqrt());
        if let Some(next) = members.get(i + 1) {
            let seg: Vec<f64> = next.iter().zip(m).map(|(a, b)| a - b).collect();
            let ss = dot(&seg, &seg);
            if ss > 0.0 {
                let s = (dot(&d0, &seg) / ss).clamp(0.0, 1.0);
                let r: Vec<f64> = d0.iter().zip(&seg).map(|(d, g)| d - s * g).collect();
                best = best.min(dot(&r, &r).sqrt());
            }
        }
    }
    best
}

pub fn attach_family_distance(trace: &mut ModulationTrace, family: &[Breather]) {
    trace.distance_to_family = trace
        .states
        .iter()
        .map(|u| distance_to_family(u, family))
        .collect();
}

/// Index of the first sample at which `distance_to_family` exceeds
/// `factor` times its value at `settle_time`.
pub fn family_escape_time(trace: &ModulationTrace, settle_time: f64, factor: f64) -> Option<f64> {
    let k0 = trace.times.partition_point(|&t| t < settle_time);
    let base = *trace.distance_to_family.get(k0)?;
    (k0..trace.distance_to_family.len())
        .find(|&k| trace.distance_to_family[k] > factor * base)
        .map(|k| trace.times[k])
}
