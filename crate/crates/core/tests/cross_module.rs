use breather_core::breather::*;
use breather_core::lattice::*;
use breather_core::numerics::*;
use breather_core::stability::*;
use breather_core::sweep::{lambda2_sweep, Execution};
use breather_core::two_site::*;

fn newton() -> NewtonConfig {
    NewtonConfig::default()
}

/// The N=2 Newton breather at the closed-form fixed point's frequency.
fn matched_pair() -> (DampedDrivenTwoSite, Breather, f64) {
    let (eps, g) = (-0.1, 0.005);
    let beta = beta_for_e1(eps, g, 0.5);
    let fp = damped_driven_fixed_point(eps, g, beta).unwrap();
    let b = solve_breather(eps, g, fp.omega(eps), 2, &newton()).unwrap();
    (fp, b, beta)
}

#[test]
fn two_site_closed_form_matches_newton() {
    let (fp, b, beta) = matched_pair();
    assert!(
        (b.beta() / beta - 1.0).abs() < 1e-10,
        "{} vs {beta}",
        b.beta()
    );
    let ep = cartesian_to_energy_phase(&b.state).unwrap();
    assert!((ep.energies[0] - fp.e1).abs() < 1e-10);
    assert!((ep.energies[1] - fp.e2).abs() < 1e-10);
    assert!((wrap_angle(ep.phase_diffs[0] - fp.psi)).abs() < 1e-10);
}

#[test]
fn cartesian_spectrum_is_reduced_spectrum_plus_zero() {
    let (fp, b, beta) = matched_pair();
    let j3 = two_site_jacobian(&fp, -0.1, 0.005, beta).unwrap();
    let full = eig_dense(&jacobian_at(&b), false).unwrap().values;
    let rep = spectrum_only(&b).unwrap();
    assert!(rep.zero_mode_residual < 1e-8);
    for e in &j3.eigenvalues {
        let d = full
            .iter()
            .map(|f| (f.re - e.re).hypot(f.im - e.im))
            .fold(f64::INFINITY, f64::min);
        assert!(d < 1e-8, "{e:?} not in {full:?}");
    }
    assert!((rep.lambda2 - j3.lambda2).abs() < 1e-10);
}

#[test]
fn two_site_lambda2_expansion() {
    let (fp, _, beta) = matched_pair();
    let j = two_site_jacobian(&fp, -0.1, 0.005, beta).unwrap();
    assert!((j.lambda2 / 2.0e-4 - 1.0).abs() < 0.1, "{}", j.lambda2);
    for e in j.eigenvalues.iter().filter(|e| e.im != 0.0) {
        assert!((e.re / -0.00505 - 1.0).abs() < 0.05, "{e:?}");
    }
}

#[test]
fn energy_balance_and_positivity() {
    for n in 2..=5 {
        for eps in [0.05, -0.05, 0.1, -0.1] {
            let b = solve_breather(eps, 0.005, 1.0, n, &newton()).unwrap();
            let e = b.state.energies();
            assert!(b.beta() > 0.0);
            assert!(
                (b.beta() * e[0] - 0.005 * e[n - 1]).abs() <= 1e-12 * b.beta() * e[0],
                "n={n} eps={eps}"
            );
        }
    }
}

#[test]
fn beta_leading_order_converges() {
    // β*/(γ(ε/ω)^{2N-2}) → 1 linearly in ε.
    let r = |eps: f64| {
        let b = solve_breather(eps, 0.001, 1.0, 3, &newton()).unwrap();
        b.beta() / (0.001 * eps.powi(4)) - 1.0
    };
    let (a, h) = (r(0.02), r(0.01));
    assert!(a.abs() < 0.2 && (a / h - 2.0).abs() < 0.3, "{a} {h}");
}

#[test]
fn continuation_family_is_smooth() {
    let b = solve_breather(-0.1, 0.005, 1.0, 3, &newton()).unwrap();
    let fam = continue_in_omega(&b, 0.8, &ContinuationConfig::default()).unwrap();
    assert!((fam.last().unwrap().omega - 0.8).abs() < 1e-12);
    assert!(fam.windows(2).all(|w| w[1].omega < w[0].omega));
    // Lower frequency means more coupling relative to ω, hence more drive.
    assert!(fam.windows(2).all(|w| w[1].beta() > w[0].beta()));
    let db = d_beta_d_omega_leading_order(3, -0.1, 0.005, 1.0);
    let frame = tangent_frame(&b, 1e-5, &newton()).unwrap();
    assert!(
        (frame.d_beta_d_omega / db - 1.0).abs() < 0.5,
        "{} vs {db}",
        frame.d_beta_d_omega
    );
}

#[test]
fn spectrum_invariants_across_grid() {
    for n in [2, 3, 4] {
        for eps in [0.03, -0.05, 0.08] {
            let b = solve_breather(eps, 0.0035, 1.0, n, &newton()).unwrap();
            let r = spectrum_only(&b).unwrap();
            assert!(r.zero_mode_residual < 1e-6);
            assert!(r.lambda2 > 0.0 && r.lambda2 < LAMBDA2_BOUND);
            let rest: Vec<_> = r.eigenvalues.iter().filter(|e| e.im != 0.0).collect();
            assert_eq!(rest.len(), 2 * n - 2, "n={n} eps={eps}");
            assert!(rest
                .iter()
                .all(|e| e.re < 0.0 && (e.im.abs() - 1.0).abs() < 0.3));
        }
    }
}

#[test]
fn lambda2_sweep_trend() {
    let eps = [0.032, 0.034, 0.036, 0.038, 0.040];
    let pts = lambda2_sweep(3, 0.0035, 1.0, &eps, Execution::Sequential).unwrap();
    let x: Vec<f64> = pts.iter().map(|p| p.eps.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.lambda2.ln()).collect();
    let slope = fit_powers(&x, &y, &[0, 1]).unwrap().coeffs[1];
    assert!((slope - 4.0).abs() < 0.5, "{slope}");
    assert!(pts.windows(2).all(|w| w[1].ratio() > w[0].ratio()));
}

#[test]
fn twist_law_is_n_independent() {
    let psi: Vec<f64> = (2..=5)
        .map(|n| {
            twist_reduced(&solve_breather(-0.05, 0.002, 1.0, n, &newton()).unwrap()).unwrap()[n - 2]
        })
        .collect();
    for p in &psi[1..] {
        assert!((p / psi[1] - 1.0).abs() < 1e-3);
    }
    let lead = 0.002;
    assert!(psi.iter().all(|p| (p / lead - 1.0).abs() < 0.06));
}
