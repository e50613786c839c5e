use breather_core::breather::*;
use breather_core::lattice::*;
use breather_core::metastability::*;
use breather_core::numerics::*;
use breather_core::stability::tangent_frame;
use breather_core::two_site::*;
use std::sync::OnceLock;

fn integ() -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: 1e-10,
        abs_tol: 1e-12,
        ..Default::default()
    }
}

fn two_site_state(e1: f64, e2: f64, psi: f64) -> CartesianState {
    energy_phase_to_cartesian(
        &EnergyPhaseState {
            energies: vec![e1, e2],
            phase_diffs: vec![psi],
        },
        0.0,
    )
    .unwrap()
}

/// Long three-site run: N=3, ω₀=1, γ=0.005, ε=-0.1 from the asymptotic profile.
fn three_site_run() -> &'static ModulationTrace {
    static TRACE: OnceLock<ModulationTrace> = OnceLock::new();
    TRACE.get_or_init(|| {
        let a = asymptotic_breather(-0.1, 0.005, 1.0, 3).unwrap();
        let prm = LatticeParams::new(3, -0.1, 0.005, 0.0, 1.0).unwrap();
        simulate_damped(&a.state, &prm, 3.6e5, 10.0, &integ()).unwrap()
    })
}

#[test]
fn symmetric_decay_matches_closed_form() {
    for eps in [0.1, -0.1] {
        let g = 0.005;
        let d = symmetric_decay(1.0, eps, g, 0.0).unwrap();
        let prm = LatticeParams::new(2, eps, g, 0.0, 1.0).unwrap();
        let tr = simulate_damped(
            &two_site_state(d.e1, d.e2, d.psi_stable),
            &prm,
            2.0 / g,
            5.0,
            &integ(),
        )
        .unwrap();
        for k in 0..tr.len() {
            let c = symmetric_decay(1.0, eps, g, tr.times[k]).unwrap();
            assert!((tr.energies[k][0] / c.e1 - 1.0).abs() < 1e-6);
            assert!((tr.energies[k][1] / c.e2 - 1.0).abs() < 1e-6);
            assert!(
                wrap_angle(tr.phase_diffs[k][0] - c.psi_stable).abs() < 1e-6,
                "eps={eps} t={}",
                tr.times[k]
            );
        }
    }
}

#[test]
fn symmetric_decay_stable_branch() {
    for eps in [0.1, -0.1] {
        let g = 0.005;
        let d = symmetric_decay(1.0, eps, g, 0.0).unwrap();
        let prm = LatticeParams::new(2, eps, g, 0.0, 1.0).unwrap();
        let other = if d.psi_stable == d.psi_first {
            d.psi_second
        } else {
            d.psi_first
        };
        let drift = |psi: f64| {
            let tr = simulate_damped(
                &two_site_state(0.5 + 1e-6, 0.5 - 1e-6, psi),
                &prm,
                400.0,
                400.0,
                &integ(),
            )
            .unwrap();
            let k = tr.len() - 1;
            (tr.energies[k][0] - tr.energies[k][1]).abs() / tr.total_energy(k)
        };
        assert!(drift(d.psi_stable) < 1e-5, "eps={eps}");
        assert!(drift(other) > 1e-3, "eps={eps}");
    }
}

#[test]
fn two_site_energy_law_and_phase_shift() {
    let (e0, eps, g) = (0.505, -0.1, 0.005);
    let tau = tau(e0, eps, g).unwrap();
    let prm = LatticeParams::new(2, eps, g, 0.0, 1.0).unwrap();
    let tr = simulate_damped(
        &ansatz_state(e0, eps, g).unwrap(),
        &prm,
        tau + 1500.0,
        1.0,
        &integ(),
    )
    .unwrap();
    for k in 0..tr.len() {
        if tr.times[k] > tau - 100.0 {
            break;
        }
        let e = tr.total_energy(k);
        assert!((e / energy_evolution(e0, eps, g, tr.times[k]).unwrap() - 1.0).abs() < 0.02);
        assert!((tr.phase_diffs[k][0] / phase_shift_approx(e, eps, g).unwrap() - 1.0).abs() < 0.05);
    }
    let esc = detect_escape(&tr, &EscapeCriterion::default());
    let t = esc.escape_time.expect("two-site run leaves the breather");
    assert!((t / 4700.8 - 1.0).abs() < 0.05, "{t}");
    // Afterwards the energy is shared and decays at rate γ.
    let (x, y): (Vec<f64>, Vec<f64>) = (0..tr.len())
        .filter(|&k| tr.times[k] > t + 500.0)
        .map(|k| (tr.times[k], tr.total_energy(k).ln()))
        .unzip();
    let rate = fit_powers(&x, &y, &[0, 1]).unwrap().coeffs[1];
    assert!((rate / -g - 1.0).abs() < 0.05, "{rate}");
}

#[test]
fn pure_symmetric_decay_never_escapes() {
    let d = symmetric_decay(1.0, -0.1, 0.005, 0.0).unwrap();
    let prm = LatticeParams::new(2, -0.1, 0.005, 0.0, 1.0).unwrap();
    let tr = simulate_damped(
        &two_site_state(d.e1, d.e2, d.psi_stable),
        &prm,
        3000.0,
        5.0,
        &integ(),
    )
    .unwrap();
    assert!(!detect_escape(&tr, &EscapeCriterion::default()).reached());
}

#[test]
fn three_site_escape_time() {
    let rep = detect_escape(three_site_run(), &EscapeCriterion::default());
    let t = rep.escape_time.expect("escape");
    assert!((t / 2.95e5 - 1.0).abs() < 0.15, "{t}");
}

#[test]
fn three_site_frequency_slides_down() {
    let tr = three_site_run();
    let t_esc = detect_escape(tr, &EscapeCriterion::default())
        .escape_time
        .unwrap();
    let w = track_frequency(tr);
    // Block means over 1000 time units remove the fast ripple.
    let means: Vec<f64> = w
        .chunks(100)
        .take_while(|_| true)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let plateau_blocks = ((t_esc - 1e4) / 1000.0) as usize;
    assert!(means[5..plateau_blocks].windows(2).all(|m| m[1] <= m[0]));
    for k in 0..tr.len() {
        let t = tr.times[k];
        if t > 1e4 && t < t_esc - 1e4 {
            // ω - 2E₁ is ε up to a correction of relative size √(E₂/E₁).
            let rel = (w[k] - 2.0 * tr.energies[k][0] + 0.1).abs() / 0.1;
            assert!(rel < 0.5, "t={t} rel={rel}");
            if t < 1e5 {
                assert!((w[k] - 2.0 * tr.energies[k][0]).abs() / w[k] < 1.5 * 0.1);
            }
        }
    }
}

#[test]
fn three_site_twist_candidates() {
    let tr = three_site_run();
    let tw = twist_comparison(tr);
    for k in 0..tw.times.len() {
        let t = tw.times[k];
        if (1e4..=3e4).contains(&t) {
            let psi = tw.psi[k];
            assert!((tw.gamma_over_2e1[k] / psi - 1.0).abs() < 0.03, "t={t}");
            assert!((tw.gamma_over_omega[k] / psi - 1.0).abs() < 0.12, "t={t}");
            assert!((tw.gamma_over_e1[k] / (2.0 * tw.gamma_over_2e1[k]) - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn three_site_distance_to_family() {
    let tr = three_site_run();
    let t_esc = detect_escape(tr, &EscapeCriterion::default())
        .escape_time
        .unwrap();
    let start = solve_breather(-0.1, 0.005, 0.9, 3, &NewtonConfig::default()).unwrap();
    let cfg = ContinuationConfig {
        max_step: 0.005,
        ..Default::default()
    };
    let family = match continue_in_omega(&start, 0.3, &cfg) {
        Ok(f) => f,
        Err(breather_core::Error::ContinuationStalled { partial, .. }) => partial,
        Err(e) => panic!("{e}"),
    };
    let pick = |t: f64| tr.times.partition_point(|&s| s < t);
    let d = |t: f64| distance_to_family(&tr.states[pick(t)], &family);
    let plateau = [2e4, 1e5, 2e5, t_esc - 2e4];
    for t in plateau {
        assert!(d(t) < 1e-2, "t={t} d={}", d(t));
    }
    let before = d(t_esc - 2e4);
    assert!(
        d(t_esc + 5e3) > 10.0 * before,
        "{} vs {before}",
        d(t_esc + 5e3)
    );
}

#[test]
fn modulation_rate_matches_drive() {
    let eps = 0.03;
    let b = solve_breather(eps, 0.005, 1.0, 3, &NewtonConfig::default()).unwrap();
    let frame = tangent_frame(&b, 1e-5, &NewtonConfig::default()).unwrap();
    let mut tr = simulate_damped(&b.state, &b.params.with_beta(0.0), 2e5, 50.0, &integ()).unwrap();
    attach_modulation(&mut tr, &b, &frame);
    assert_eq!(tr.alpha1[0], 0.0);
    let fit = fit_modulation(&tr, (0.0, 2e5)).unwrap();
    assert!(fit.alpha1_r_squared > 0.99 && fit.alpha2_r_squared > 0.99);
    assert!(
        (fit.alpha2_slope / (-2.0 * b.beta()) - 1.0).abs() < 0.05,
        "{}",
        fit.alpha2_slope
    );
    assert!((fit.alpha1_quadratic / -b.beta() - 1.0).abs() < 0.05);
}

#[test]
fn eight_site_plateau() {
    let prm = LatticeParams::new(8, -0.1, 0.05, 0.0, 1.0).unwrap();
    let tr = simulate_damped(
        &CartesianState::single_site(8, 1.0),
        &prm,
        2e4,
        100.0,
        &integ(),
    )
    .unwrap();
    // The far tail carries only radiation at the 1e-13 level.
    for e in &tr.energies[100..] {
        assert!(e[0] > 0.49);
        assert!(e[..6].windows(2).all(|w| w[1] < w[0]), "{e:?}");
    }
    assert!(!detect_escape(&tr, &EscapeCriterion::default()).reached());
}

#[test]
fn split_run_matches_single_run() {
    let a = asymptotic_breather(-0.1, 0.005, 1.0, 3).unwrap();
    let prm = LatticeParams::new(3, -0.1, 0.005, 0.0, 1.0).unwrap();
    let whole = simulate_damped(&a.state, &prm, 2000.0, 10.0, &integ()).unwrap();
    let mut first = simulate_span(&a.state, &prm, (0.0, 1000.0), 10.0, &integ()).unwrap();
    let second = simulate_span(
        &first.last_state().unwrap(),
        &prm,
        (1000.0, 2000.0),
        10.0,
        &integ(),
    )
    .unwrap();
    first.extend(second);
    assert_eq!(first.times, whole.times);
    let (u, v) = (first.states.last().unwrap(), whole.states.last().unwrap());
    assert!(u.iter().zip(v).all(|(x, y)| (x - y).abs() < 1e-7));
}

#[test]
fn integration_failure_returns_partial_trace() {
    let prm = LatticeParams::new(2, 0.1, 0.0, 0.0, 1.0).unwrap();
    let cfg = IntegratorConfig {
        max_steps: 50,
        ..integ()
    };
    let tr = simulate(&CartesianState::single_site(2, 1.0), &prm, 100.0, 0.1, &cfg).unwrap();
    let f = tr.failure.as_ref().expect("step budget exhausted");
    assert!(f.t < 100.0 && !tr.is_empty() && *tr.times.last().unwrap() <= f.t);
}
