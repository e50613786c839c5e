//! Closed-form theory of the two-site chain in energy-phase coordinates
//! `(E_1, E_2, ψ)`.
//!
//! The two-site equations are invariant under `(ε, ψ) → (-ε, ψ + π)`, which
//! is how every `ε < 0` branch below is obtained from its `ε > 0` partner.

use crate::error::{Error, Result};
use crate::lattice::{
    energy_phase_to_cartesian, vector_field_energy_phase_flat, wrap_angle, CartesianState,
    EnergyPhaseState, LatticeParams,
};
use crate::numerics::{eig_dense, lambert_w_minus1_from_log, ComplexEigenvalue, Matrix};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoSiteBranch {
    SymInPhase,
    SymAntiPhase,
    AsymHighFirst,
    AsymHighSecond,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSiteFixedPoint {
    pub e1: f64,
    pub e2: f64,
    pub psi: f64,
    pub branch: TwoSiteBranch,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UndampedFamily {
    pub points: Vec<TwoSiteFixedPoint>,
    /// Why the asymmetric branches are missing, if they are.
    pub omitted: Option<String>,
}

/// Phase velocity of site 1, `2E_1 + ε - ε√(E_2/E_1) cos ψ`.
pub fn frequency(e1: f64, e2: f64, psi: f64, eps: f64) -> f64 {
    2.0 * e1 + eps - eps * (e2 / e1).sqrt() * psi.cos()
}

/// The undamped (`γ = β = 0`) fixed points with total energy `E = E_1 + E_2`.
pub fn undamped_family(e: f64, eps: f64) -> Result<UndampedFamily> {
    if !(e > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput(format!(
            "need E > 0 and finite eps, got E={e}, eps={eps}"
        )));
    }
    let mut points = vec![
        TwoSiteFixedPoint {
            e1: 0.5 * e,
            e2: 0.5 * e,
            psi: 0.0,
            branch: TwoSiteBranch::SymInPhase,
            omega: e,
        },
        TwoSiteFixedPoint {
            e1: 0.5 * e,
            e2: 0.5 * e,
            psi: PI,
            branch: TwoSiteBranch::SymAntiPhase,
            omega: e + 2.0 * eps,
        },
    ];
    let mut omitted = None;
    if e >= eps.abs() {
        let s = (e * e - eps * eps).sqrt();
        // E - s without cancellation when |ε| ≪ E.
        let (hi, lo) = (0.5 * (e + s), 0.5 * eps * eps / (e + s));
        let psi = if eps > 0.0 { PI } else { 0.0 };
        let omega = 2.0 * e + eps;
        points.push(TwoSiteFixedPoint {
            e1: hi,
            e2: lo,
            psi,
            branch: TwoSiteBranch::AsymHighFirst,
            omega,
        });
        points.push(TwoSiteFixedPoint {
            e1: lo,
            e2: hi,
            psi,
            branch: TwoSiteBranch::AsymHighSecond,
            omega,
        });
    } else {
        omitted = Some(format!(
            "asymmetric branches need E >= |eps| ({e} < {})",
            eps.abs()
        ));
    }
    Ok(UndampedFamily { points, omitted })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampedDrivenTwoSite {
    pub e1: f64,
    pub e2: f64,
    pub psi: f64,
}

impl DampedDrivenTwoSite {
    pub fn omega(&self, eps: f64) -> f64 {
        frequency(self.e1, self.e2, self.psi, eps)
    }

    pub fn to_flat(&self) -> [f64; 3] {
        [self.e1, self.e2, self.psi]
    }
}

pub fn damped_driven_fixed_point(eps: f64, gamma: f64, beta: f64) -> Result<DampedDrivenTwoSite> {
    if !(gamma > 0.0) || !(beta > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput(format!(
            "need gamma > 0, beta > 0, finite eps; got {gamma}, {beta}, {eps}"
        )));
    }
    let gb = gamma * beta;
    let eps2 = eps * eps;
    if gb >= eps2 {
        return Err(Error::NoFixedPoint { gb, eps2 });
    }
    let root = (eps2 - gb).sqrt();
    let e1 = 0.5 * (gamma / beta).sqrt() * root;
    let e2 = 0.5 * (beta / gamma).sqrt() * root;
    let a = (gb.sqrt() / eps).asin();
    let psi = if eps > 0.0 { -PI + a } else { -a };
    Ok(DampedDrivenTwoSite { e1, e2, psi })
}

/// Drive that places the damped-driven fixed point at the given `E_1`:
/// `β = γε² / (4E_1² + γ²)`.
pub fn beta_for_e1(eps: f64, gamma: f64, e1: f64) -> f64 {
    gamma * eps * eps / (4.0 * e1 * e1 + gamma * gamma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSiteJacobian {
    /// `∂(Ė_1, Ė_2, ψ̇)/∂(E_1, E_2, ψ)` at the fixed point.
    pub matrix: Matrix,
    /// The matrix in the reduced closed form
    /// `[[β, -γ, -(ε²-γβ)], [β, -γ, ε²-γβ], [-1+β/γ, 1-γ/β, β-γ]]`.
    pub printed: Matrix,
    pub eigenvalues: Vec<ComplexEigenvalue>,
    pub lambda2: f64,
    /// Instantaneous frequency of the fixed point.
    pub omega: f64,
    /// `4γ(ε/ω₀)²` with `ω₀ = 2E_1`.
    pub lambda2_predicted: f64,
    /// `-γ(1 + (ε/ω₀)²) ± iω₀`.
    pub lambda34_predicted: ComplexEigenvalue,
}

pub fn two_site_jacobian(
    fp: &DampedDrivenTwoSite,
    eps: f64,
    gamma: f64,
    beta: f64,
) -> Result<TwoSiteJacobian> {
    let (e1, e2, psi) = (fp.e1, fp.e2, fp.psi);
    if !(e1 > 0.0 && e2 > 0.0) {
        return Err(Error::SingularState {
            site: if e1 > 0.0 { 1 } else { 0 },
        });
    }
    let r = (e1 * e2).sqrt();
    let (s, c) = psi.sin_cos();
    let g = 2.0 + eps * c / r;
    let d = e2 - e1;
    let matrix = Matrix::from_rows(&[
        vec![
            eps * s * (e2 / e1).sqrt() + 2.0 * beta,
            eps * s * (e1 / e2).sqrt(),
            2.0 * eps * r * c,
        ],
        vec![
            -eps * s * (e2 / e1).sqrt(),
            -eps * s * (e1 / e2).sqrt() - 2.0 * gamma,
            -2.0 * eps * r * c,
        ],
        vec![
            -g - d * eps * c / (2.0 * e1 * r),
            g - d * eps * c / (2.0 * e2 * r),
            -d * eps * s / r,
        ],
    ]);
    let k = eps * eps - gamma * beta;
    let printed = Matrix::from_rows(&[
        vec![beta, -gamma, -k],
        vec![beta, -gamma, k],
        vec![-1.0 + beta / gamma, 1.0 - gamma / beta, beta - gamma],
    ]);
    let eigenvalues = eig_dense(&matrix, false)?.values;
    let lambda2 = eigenvalues
        .iter()
        .filter(|e| e.im == 0.0 && e.re > 0.0)
        .map(|e| e.re)
        .fold(f64::NAN, f64::min);
    let w0 = 2.0 * e1;
    Ok(TwoSiteJacobian {
        matrix,
        printed,
        eigenvalues,
        lambda2,
        omega: fp.omega(eps),
        lambda2_predicted: 4.0 * gamma * (eps / w0).powi(2),
        lambda34_predicted: ComplexEigenvalue::new(-gamma * (1.0 + (eps / w0).powi(2)), w0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricDecay {
    pub e1: f64,
    pub e2: f64,
    /// `-arcsin(γ/2ε)`.
    pub psi_first: f64,
    /// `-π + arcsin(γ/2ε)`.
    pub psi_second: f64,
    /// The stable branch: the first for `ε > 0`, the second for `ε < 0`.
    pub psi_stable: f64,
}

/// Exact decaying solution `E_1 = E_2 = ½E_0 e^{-γt}` with constant phase.
pub fn symmetric_decay(e0: f64, eps: f64, gamma: f64, t: f64) -> Result<SymmetricDecay> {
    if eps == 0.0 || (gamma / (2.0 * eps)).abs() > 1.0 {
        return Err(Error::Domain(format!(
            "symmetric decay needs |gamma| <= 2|eps|, got gamma={gamma}, eps={eps}"
        )));
    }
    let a = (gamma / (2.0 * eps)).asin();
    let e = 0.5 * e0 * (-gamma * t).exp();
    let (first, second) = (-a, -PI + a);
    Ok(SymmetricDecay {
        e1: e,
        e2: e,
        psi_first: first,
        psi_second: second,
        psi_stable: if eps > 0.0 { first } else { second },
    })
}

/// Quasi-static phase along the slow energy decay,
/// `sin ψ = γ / (2√(E² - ε²))`, on the branch of the damped-driven fixed
/// point: `-π + arcsin(·)` for `ε > 0`, `+arcsin(·)` for `ε < 0`.
pub fn phase_shift_approx(e: f64, eps: f64, gamma: f64) -> Result<f64> {
    let d = e * e - eps * eps;
    if !(d > 0.25 * gamma * gamma) {
        return Err(Error::ApproximationBreakdown(format!(
            "need E^2 - eps^2 > gamma^2/4 (E={e}, eps={eps}, gamma={gamma})"
        )));
    }
    let a = (gamma / (2.0 * d.sqrt())).asin();
    Ok(if eps > 0.0 { -PI + a } else { a })
}

fn check_energy_law(e0: f64, eps: f64, gamma: f64) -> Result<()> {
    if !(eps != 0.0 && eps.is_finite() && e0 > eps.abs() && gamma > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need E0 > |eps| > 0 and gamma > 0, got E0={e0}, eps={eps}, gamma={gamma}"
        )));
    }
    Ok(())
}

/// Time at which the slow energy law reaches `E = |ε|`.
pub fn tau(e0: f64, eps: f64, gamma: f64) -> Result<f64> {
    check_energy_law(e0, eps, gamma)?;
    let s = (e0 * e0 - eps * eps).sqrt();
    Ok((e0 * (e0 + s) / (eps * eps) - ((e0 + s) / eps.abs()).ln() - 1.0) / (2.0 * gamma))
}

/// `E(t) = |ε|/2 (√(-W) + 1/√(-W))`, `W = W₋₁(-e^{-1 + 4γ(t-τ)})`.
pub fn energy_evolution(e0: f64, eps: f64, gamma: f64, t: f64) -> Result<f64> {
    let tau = tau(e0, eps, gamma)?;
    if t >= tau {
        return Err(Error::PastValidity { t, tau });
    }
    let w = lambert_w_minus1_from_log(-1.0 + 4.0 * gamma * (t - tau))?;
    let r = (-w).sqrt();
    Ok(0.5 * eps.abs() * (r + 1.0 / r))
}

/// Cartesian two-site state on the slow-decay ansatz at total energy `E`:
/// `E_1 - E_2 = √(E² - ε²)` with the quasi-static phase, site 1 real.
pub fn ansatz_state(e: f64, eps: f64, gamma: f64) -> Result<CartesianState> {
    let psi = phase_shift_approx(e, eps, gamma)?;
    let s = (e * e - eps * eps).sqrt();
    let energies = vec![0.5 * (e + s), 0.5 * eps * eps / (e + s)];
    energy_phase_to_cartesian(
        &EnergyPhaseState {
            energies,
            phase_diffs: vec![psi],
        },
        0.0,
    )
}

/// Right-hand side of the slow energy law, `Ė = -γ(E - √(E² - ε²))`.
pub fn energy_law_rhs(e: f64, eps: f64, gamma: f64) -> f64 {
    -gamma * (e - (e * e - eps * eps).max(0.0).sqrt())
}

/// Two-site energy-phase vector field at `(E_1, E_2, ψ)`.
pub fn two_site_field(e1: f64, e2: f64, psi: f64, eps: f64, gamma: f64, beta: f64) -> [f64; 3] {
    let prm = LatticeParams {
        n_sites: 2,
        eps,
        gamma,
        beta,
        omega: 1.0,
    };
    let mut d = [0.0; 3];
    vector_field_energy_phase_flat(&prm, &[e1, e2, psi], &mut d);
    d
}

/// Maps `ψ` from the `ε` chain to its `-ε` partner.
pub fn mirror_phase(psi: f64) -> f64 {
    wrap_angle(psi + PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(v: [f64; 3]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn undamped_branches_are_fixed_points() {
        for eps in [0.1, -0.1, 0.3] {
            let fam = undamped_family(1.01, eps).unwrap();
            assert_eq!(fam.points.len(), 4);
            for p in &fam.points {
                assert!(
                    max_abs(two_site_field(p.e1, p.e2, p.psi, eps, 0.0, 0.0)) < 1e-14,
                    "{p:?}"
                );
                assert!((frequency(p.e1, p.e2, p.psi, eps) - p.omega).abs() < 1e-14);
            }
        }
        let fam = undamped_family(1.01, 0.1).unwrap();
        assert_eq!(
            fam.points[2].e1,
            0.5 * (1.01 + (1.01f64 * 1.01 - 0.01).sqrt())
        );
    }

    #[test]
    fn asym_bifurcation_point() {
        let fam = undamped_family(0.1, -0.1).unwrap();
        assert!((fam.points[2].e1 - fam.points[3].e1).abs() < 1e-16);
        let fam = undamped_family(0.05, -0.1).unwrap();
        assert_eq!(fam.points.len(), 2);
        assert!(fam.omitted.is_some());
    }

    #[test]
    fn damped_driven_zeroes_flow() {
        for eps in [0.1, -0.1, 0.03] {
            for (g, b) in [(0.005, 0.0002), (0.01, 0.003), (0.002, 0.0001)] {
                let fp = damped_driven_fixed_point(eps, g, b).unwrap();
                assert!(max_abs(two_site_field(fp.e1, fp.e2, fp.psi, eps, g, b)) < 1e-14);
                assert!((fp.e1 * fp.e2 - 0.25 * (eps * eps - g * b)).abs() < 1e-15);
                assert!((fp.e1 / fp.e2 - g / b).abs() < 1e-12 * g / b);
            }
        }
        assert!(matches!(
            damped_driven_fixed_point(0.1, 0.1, 0.1),
            Err(Error::NoFixedPoint { .. })
        ));
    }

    #[test]
    fn damped_driven_limits() {
        let (eps, g): (f64, f64) = (0.1, 0.01);
        let b = eps * eps / g * (1.0 - 1e-12);
        let fp = damped_driven_fixed_point(eps, g, b).unwrap();
        assert!(fp.e1 < 1e-6 && fp.e2 < 1e-6);
        assert!((fp.psi + PI / 2.0).abs() < 1e-5);
        let fp = damped_driven_fixed_point(-eps, g, b).unwrap();
        assert!((fp.psi - PI / 2.0).abs() < 1e-5);
    }

    #[test]
    fn beta_for_e1_inverts() {
        let b = beta_for_e1(-0.1, 0.005, 0.5);
        let fp = damped_driven_fixed_point(-0.1, 0.005, b).unwrap();
        assert!((fp.e1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences_and_printed_form() {
        let (eps, g) = (-0.1, 0.005);
        let b = beta_for_e1(eps, g, 0.5);
        let fp = damped_driven_fixed_point(eps, g, b).unwrap();
        let j = two_site_jacobian(&fp, eps, g, b).unwrap();
        let x = fp.to_flat();
        let h = 1e-7;
        for c in 0..3 {
            let (mut xp, mut xm) = (x, x);
            xp[c] += h;
            xm[c] -= h;
            let fp_ = two_site_field(xp[0], xp[1], xp[2], eps, g, b);
            let fm_ = two_site_field(xm[0], xm[1], xm[2], eps, g, b);
            for r in 0..3 {
                assert!((j.matrix[(r, c)] - (fp_[r] - fm_[r]) / (2.0 * h)).abs() < 1e-7);
            }
        }
        for r in 0..3 {
            for c in 0..3 {
                assert!(
                    (j.matrix[(r, c)] - j.printed[(r, c)]).abs() < 1e-12 * j.printed.max_abs(),
                    "({r},{c})"
                );
            }
        }
    }

    #[test]
    fn jacobian_eigenvalues() {
        let (eps, g) = (-0.1, 0.005);
        let b = beta_for_e1(eps, g, 0.5);
        let fp = damped_driven_fixed_point(eps, g, b).unwrap();
        let j = two_site_jacobian(&fp, eps, g, b).unwrap();
        assert!(
            (j.lambda2 / j.lambda2_predicted - 1.0).abs() < 0.1,
            "{} {}",
            j.lambda2,
            j.lambda2_predicted
        );
        let osc: Vec<_> = j.eigenvalues.iter().filter(|e| e.im != 0.0).collect();
        assert_eq!(osc.len(), 2);
        for e in osc {
            assert!((e.re / j.lambda34_predicted.re - 1.0).abs() < 0.05);
            assert!((e.im.abs() - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn symmetric_decay_is_exact() {
        for eps in [0.1, -0.1] {
            let d = symmetric_decay(1.0, eps, 0.005, 0.0).unwrap();
            assert_eq!(d.e1, 0.5);
            for psi in [d.psi_first, d.psi_second] {
                let f = two_site_field(d.e1, d.e2, psi, eps, 0.005, 0.0);
                assert!(
                    (f[0] + 0.005 * d.e1).abs() < 1e-14
                        && (f[1] + 0.005 * d.e2).abs() < 1e-14
                        && f[2].abs() < 1e-14
                );
            }
        }
        assert!(matches!(
            symmetric_decay(1.0, 0.001, 0.005, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn phase_shift_branches() {
        let e = 0.505;
        let x = (0.005 / (2.0 * (e * e - 0.01f64).sqrt())).asin();
        assert!((phase_shift_approx(e, -0.1, 0.005).unwrap() - x).abs() < 1e-15);
        assert!((phase_shift_approx(e, 0.1, 0.005).unwrap() - (-PI + x)).abs() < 1e-15);
        assert_eq!(phase_shift_approx(e, -0.1, 0.0).unwrap(), 0.0);
        assert_eq!(phase_shift_approx(e, 0.1, 0.0).unwrap(), -PI);
        assert!(matches!(
            phase_shift_approx(0.1 + 1e-6, -0.1, 0.005),
            Err(Error::ApproximationBreakdown(_))
        ));
    }

    #[test]
    fn phase_shift_matches_twist_at_breather_energy() {
        // At the breather energy the quasi-static phase equals γ/ω with ω = 2E + ε.
        let (eps, g) = (-0.01, 1e-4);
        let e = 0.5;
        let psi = phase_shift_approx(e, eps, g).unwrap();
        assert!((psi / (g / (2.0 * e + eps)) - 1.0).abs() < 0.02);
    }

    #[test]
    fn energy_law_endpoints() {
        let (e0, eps, g) = (0.505, -0.1, 0.005);
        let t = tau(e0, eps, g).unwrap();
        assert!((t - 4719.74).abs() < 0.01, "{t}");
        assert!((energy_evolution(e0, eps, g, 0.0).unwrap() - e0).abs() < 1e-10);
        assert!((energy_evolution(e0, eps, g, t - 1e-9).unwrap() - 0.1).abs() < 1e-3);
        assert!(matches!(
            energy_evolution(e0, eps, g, t),
            Err(Error::PastValidity { .. })
        ));
        assert_eq!(tau(e0, 0.1, g).unwrap(), t);
    }

    #[test]
    fn energy_law_solves_its_ode() {
        let (e0, eps, g) = (0.505, -0.1, 0.005);
        let t_end = 0.95 * tau(e0, eps, g).unwrap();
        let h = 1e-2;
        for k in 1..50 {
            let t = t_end * k as f64 / 50.0;
            let e = energy_evolution(e0, eps, g, t).unwrap();
            let de = (energy_evolution(e0, eps, g, t + h).unwrap()
                - energy_evolution(e0, eps, g, t - h).unwrap())
                / (2.0 * h);
            assert!((de / energy_law_rhs(e, eps, g) - 1.0).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn ansatz_state_energies() {
        let u = ansatz_state(0.505, -0.1, 0.005).unwrap();
        let e = u.energies();
        assert!((e[0] + e[1] - 0.505).abs() < 1e-15);
        assert!((e[0] - e[1] - 0.495).abs() < 1e-14);
    }

    #[test]
    fn tau_by_quadrature() {
        // τ = ∫_{|ε|}^{E0} dE / (γ(E - √(E²-ε²))), with E = |ε| cosh u.
        let (e0, eps, g): (f64, f64, f64) = (0.505, -0.1, 0.005);
        let big_u = (e0 / eps.abs()).acosh();
        let n = 20000;
        let f = |u: f64| u.sinh() * u.exp() / g;
        let hh = big_u / n as f64;
        let mut s = f(0.0) + f(big_u);
        for k in 1..n {
            s += f(k as f64 * hh) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let quad = s * hh / 3.0;
        assert!((quad / tau(e0, eps, g).unwrap() - 1.0).abs() < 1e-9);
    }
}
