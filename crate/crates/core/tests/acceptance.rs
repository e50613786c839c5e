//! Acceptance criteria 1-8, one PASS/FAIL line each, followed by INFO lines
//! for supplementary measurements. Exits nonzero on any FAIL only when
//! `BREATHER_ACCEPTANCE_STRICT=1`; `BREATHER_ACCEPTANCE_SKIP_SLOW=1` skips
//! criterion 4.

mod common;

use breather_core::breather::{solve_breather, twist_reduced};
use breather_core::lattice::*;
use breather_core::metastability::*;
use breather_core::numerics::*;
use breather_core::stability::{spectrum_only, tangent_frame};
use breather_core::sweep::{beta_grid, lambda2_sweep, Execution};
use breather_core::two_site::*;
use common::*;
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within_sig_figs(x: f64, printed: f64, figs: i32) -> bool {
    (x - printed).abs() <= 0.5 * 10f64.powi(printed.abs().log10().floor() as i32 - figs + 1)
}

fn integ() -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: 1e-10,
        abs_tol: 1e-12,
        ..Default::default()
    }
}

const REFERENCE_PAIRS: [(f64, f64); 2] = [(-0.00257707, 0.987135), (-0.000922942, 0.914551)];
const REFERENCE_LAMBDA2: f64 = 3.43099e-8;

fn reference_spectrum_check(eps: f64) -> (bool, bool, bool, String) {
    let b = solve_breather(eps, 0.0035, 1.0, 3, &NewtonConfig::default()).unwrap();
    let r = spectrum_only(&b).unwrap();
    let osc: Vec<&ComplexEigenvalue> = r.eigenvalues.iter().filter(|e| e.im != 0.0).collect();
    let mut osc_ok = osc.len() == 4;
    for &(re, im) in &REFERENCE_PAIRS {
        for sign in [1.0, -1.0] {
            let hit = osc
                .iter()
                .any(|e| within_sig_figs(e.re, re, 5) && within_sig_figs(e.im, sign * im, 5));
            osc_ok &= hit;
        }
    }
    let zero_ok = r.zero_mode_residual < 1e-6;
    let l2_ok = r.lambda2 > 2e-8 && r.lambda2 < 5e-8;
    let list: Vec<String> = r
        .eigenvalues
        .iter()
        .map(|e| format!("{:.6e}{:+.6e}i", e.re, e.im))
        .collect();
    (
        osc_ok,
        zero_ok,
        l2_ok,
        format!(
            "eps={eps}: [{}], |zero|={:.1e}, lambda2={:.5e} (reference {REFERENCE_LAMBDA2:e})",
            list.join(", "),
            r.zero_mode_residual,
            r.lambda2
        ),
    )
}

fn criterion1(info: &mut Vec<String>) -> Outcome {
    let (osc, zero, l2, detail) = reference_spectrum_check(0.03);
    let (osc32, _, _, detail32) = reference_spectrum_check(0.032);
    info.push(format!(
        "reference spectrum at eps=0.032: oscillatory pairs to 5 s.f. {}; {detail32}",
        if osc32 { "match" } else { "differ" }
    ));
    outcome(
        osc && zero && l2,
        format!("oscillatory 5 s.f. {osc}, zero mode {zero}, lambda2 bracket {l2}; {detail}"),
    )
}

fn criterion2() -> Outcome {
    let eps = [0.032, 0.034, 0.036, 0.038, 0.040];
    let pts = lambda2_sweep(3, 0.0035, 1.0, &eps, Execution::Parallel).unwrap();
    let ratios: Vec<f64> = pts.iter().map(|p| p.ratio()).collect();
    let factor2 = ratios.iter().all(|r| *r > 0.5 && *r < 2.0);
    // Ordered by increasing eps: the distance to 1 must shrink as eps decreases.
    let toward_one = ratios
        .windows(2)
        .all(|w| (w[0] - 1.0).abs() < (w[1] - 1.0).abs());
    let txt: Vec<String> = pts
        .iter()
        .map(|p| format!("{}:{:.4}", p.eps, p.ratio()))
        .collect();
    outcome(
        factor2 && toward_one,
        format!(
            "ratios {}; within factor 2 {factor2}, monotone toward 1 {toward_one}",
            txt.join(" ")
        ),
    )
}

fn criterion3(info: &mut Vec<String>) -> Outcome {
    let (e0, eps, g) = (0.505, -0.1, 0.005);
    let tau = tau(e0, eps, g).unwrap();
    let tau_ok = (tau - 4700.8).abs() <= 0.1;
    let prm = LatticeParams::new(2, eps, g, 0.0, 1.0).unwrap();
    let u0 = ansatz_state(e0, eps, g).unwrap();
    let tr = simulate_damped(&u0, &prm, tau + 1500.0, 1.0, &integ()).unwrap();
    let (mut worst_e, mut worst_psi) = (0.0f64, 0.0f64);
    for k in 0..tr.len() {
        if tr.times[k] > tau - 100.0 {
            break;
        }
        let law = energy_evolution(e0, eps, g, tr.times[k]).unwrap();
        worst_e = worst_e.max((tr.total_energy(k) / law - 1.0).abs());
        let ps = phase_shift_approx(tr.total_energy(k), eps, g).unwrap();
        worst_psi = worst_psi.max((tr.phase_diffs[k][0] / ps - 1.0).abs());
    }
    let e_ok = worst_e < 0.02;
    let esc = detect_escape(&tr, &EscapeCriterion::default());
    info.push(format!(
        "two-site: psi vs phase_shift_approx max rel {worst_psi:.2e} on [0, tau-100]; gap escape at {:?} (tau {tau:.2})",
        esc.escape_time
    ));
    outcome(tau_ok && e_ok, format!("tau={tau:.4} (target 4700.8 +- 0.1: {tau_ok}); energy law max rel {worst_e:.2e} on [0, tau-100] (< 2%: {e_ok})"))
}

fn criterion4(escape: &mut Option<f64>) -> Outcome {
    let a = breather_core::breather::asymptotic_breather(-0.1, 0.005, 1.0, 3).unwrap();
    let prm = LatticeParams::new(3, -0.1, 0.005, 0.0, 1.0).unwrap();
    let tr = simulate_damped(&a.state, &prm, 4.0e5, 10.0, &integ()).unwrap();
    let rep = detect_escape(&tr, &EscapeCriterion::default());
    *escape = rep.escape_time;
    match rep.escape_time {
        Some(t) => {
            let ok = (t / 2.95e5 - 1.0).abs() <= 0.15;
            outcome(
                ok,
                format!(
                    "escape at t={t:.4e} ({:+.1}% vs 2.95e5, criterion: {})",
                    100.0 * (t / 2.95e5 - 1.0),
                    rep.criterion
                ),
            )
        }
        None => outcome(false, "escape not reached by t=4e5".into()),
    }
}

fn criterion5(info: &mut Vec<String>) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [2, 3, 4] {
        let b = solve_breather(-0.1, 0.005, 1.0, n, &NewtonConfig::default()).unwrap();
        let psi = twist_reduced(&b).unwrap()[n - 2];
        let rel = psi / 0.005 - 1.0;
        ok &= rel.abs() < 0.05;
        parts.push(format!("N={n}: psi={psi:.6e} ({:+.2}%)", 100.0 * rel));
        info.push(format!(
            "twist N={n}: psi/(gamma/(omega-eps)) - 1 = {:+.2e}",
            psi / (0.005 / 1.1) - 1.0
        ));
    }
    outcome(
        ok,
        format!("{} vs gamma/omega = 5e-3 within 5%", parts.join(", ")),
    )
}

fn criterion6(info: &mut Vec<String>) -> Outcome {
    let ns = [2, 3, 4, 5];
    let eps = [0.05, 0.1, -0.05, -0.1];
    let gs = [0.001, 0.005];
    let cells = beta_grid(&ns, &eps, &gs, 1.0, Execution::Parallel).unwrap();
    let positive = cells.iter().all(|c| c.beta > 0.0);
    let mut ok = positive;
    let mut parts = Vec::new();
    for &n in &ns {
        for &g in &gs {
            let sel: Vec<_> = cells
                .iter()
                .filter(|c| c.n_sites == n && c.gamma == g)
                .collect();
            let x: Vec<f64> = sel.iter().map(|c| c.eps.abs().ln()).collect();
            let y: Vec<f64> = sel.iter().map(|c| c.beta.ln()).collect();
            let slope = fit_powers(&x, &y, &[0, 1]).unwrap().coeffs[1];
            let target = (2 * n - 2) as f64;
            ok &= (slope - target).abs() <= 0.3;
            parts.push(format!("N={n},g={g}:{slope:.3}"));
            let per_sign = breather_core::sweep::beta_scaling_slope(&cells, n, g).unwrap();
            info.push(format!("beta* slope N={n} gamma={g}: pooled {slope:.4}, mean per-sign {per_sign:.4}, target {target}"));
        }
    }
    outcome(
        ok,
        format!("all beta* > 0: {positive}; slopes {}", parts.join(" ")),
    )
}

fn sample<S: Strategy>(s: &S, runner: &mut TestRunner) -> S::Value {
    s.new_tree(runner).unwrap().current()
}

fn criterion7() -> Outcome {
    let mut runner = TestRunner::deterministic();
    let cases = 200;
    let mut coord = 0.0f64;
    let mut jac = 0.0f64;
    for _ in 0..cases {
        let (prm, s) = sample(&params_and_state(), &mut runner);
        let n = prm.n_sites;
        let d = vector_field_cartesian(&s, &prm).unwrap();
        let mut expected: Vec<f64> = (0..n).map(|j| s.p[j] * d.p[j] + s.q[j] * d.q[j]).collect();
        let phi_dot: Vec<f64> = (0..n)
            .map(|j| (s.p[j] * d.q[j] - s.q[j] * d.p[j]) / (s.p[j] * s.p[j] + s.q[j] * s.q[j]))
            .collect();
        expected.extend(phi_dot.windows(2).map(|w| w[1] - w[0]));
        let got = vector_field_energy_phase(&cartesian_to_energy_phase(&s).unwrap(), &prm)
            .unwrap()
            .to_flat();
        coord = coord.max(max_rel(&got, &expected));

        let u = s.to_flat();
        let j = vector_field_jacobian(&prm, &u);
        let h = 1e-6;
        let (mut fp, mut fm) = (vec![0.0; u.len()], vec![0.0; u.len()]);
        for c in 0..u.len() {
            let (mut up, mut um) = (u.clone(), u.clone());
            up[c] += h;
            um[c] -= h;
            vector_field_flat(&prm, &up, &mut fp);
            vector_field_flat(&prm, &um, &mut fm);
            for r in 0..u.len() {
                jac =
                    jac.max((j[(r, c)] - (fp[r] - fm[r]) / (2.0 * h)).abs() / j.max_abs().max(1.0));
            }
        }
    }

    let mut fixed = 0.0f64;
    for _ in 0..cases {
        let (eps, g, e1, e) = sample(
            &(0.01f64..0.5, 1e-4f64..0.05, 0.05f64..2.0, 0.05f64..2.0),
            &mut runner,
        );
        for eps in [eps, -eps] {
            let beta = beta_for_e1(eps, g, e1);
            let fp = damped_driven_fixed_point(eps, g, beta).unwrap();
            let scale = (fp.e1 + fp.e2).max(1.0);
            fixed = fixed.max(
                two_site_field(fp.e1, fp.e2, fp.psi, eps, g, beta)
                    .iter()
                    .fold(0.0f64, |m, x| m.max(x.abs()))
                    / scale,
            );
            for p in undamped_family(e, eps).unwrap().points {
                let scale = e.max(1.0);
                fixed = fixed.max(
                    two_site_field(p.e1, p.e2, p.psi, eps, 0.0, 0.0)
                        .iter()
                        .fold(0.0f64, |m, x| m.max(x.abs()))
                        / scale,
                );
            }
        }
    }

    let mut lambert = 0.0f64;
    for k in 0..1000 {
        let t = k as f64 / 999.0;
        let x = -(-1.0f64).exp() * (1e-300f64 * 1.0f64.exp()).powf(t);
        let w = lambert_w_minus1(x).unwrap();
        lambert = lambert.max((w * w.exp() - x).abs() / x.abs());
    }

    let mut norm = 0.0f64;
    for n in [2, 3, 5] {
        let prm = LatticeParams::new(n, -0.2, 0.0, 0.0, 1.0).unwrap();
        let s = sample(&state(n), &mut runner);
        let tr = simulate(&s, &prm, 1000.0, 50.0, &IntegratorConfig::default()).unwrap();
        let n0 = tr.total_energy(0);
        for k in 0..tr.len() {
            norm = norm.max((tr.total_energy(k) / n0 - 1.0).abs());
        }
    }

    let mut eig = 0.0f64;
    for _ in 0..cases {
        let vals = sample(
            &proptest::collection::vec(-2.0f64..2.0, 4..145),
            &mut runner,
        );
        let n = (vals.len() as f64).sqrt().floor() as usize;
        let a = Matrix::from_fn(n, n, |i, j| vals[i * n + j]);
        let ev = eigenvalues(&a).unwrap();
        let scale = a.norm().max(1.0);
        let tr: f64 = ev.iter().map(|e| e.re).sum();
        let det = ev
            .iter()
            .fold(num_complex::Complex64::new(1.0, 0.0), |acc, e| {
                acc * e.to_complex()
            });
        let d = breather_core::numerics::linalg::det(&a);
        eig = eig
            .max((tr - a.trace()).abs() / (scale * n as f64))
            .max((det - d).norm() / scale.powi(n as i32));
    }

    let checks = [
        ("coordinate oracle", coord, 1e-10),
        ("jacobian vs FD", jac, 1e-7),
        ("two-site fixed points", fixed, 1e-14),
        ("lambert residual", lambert, 1e-13),
        ("norm conservation", norm, 1e-8),
        ("eigen trace/det", eig, 1e-9),
    ];
    let ok = checks.iter().all(|(_, v, tol)| v <= tol);
    let txt: Vec<String> = checks
        .iter()
        .map(|(name, v, tol)| format!("{name} {v:.1e}<={tol:.0e}"))
        .collect();
    outcome(ok, txt.join(", "))
}

fn modulation_fit(eps: f64, gamma: f64, window: f64) -> (ModulationFit, f64) {
    let b = solve_breather(eps, gamma, 1.0, 3, &NewtonConfig::default()).unwrap();
    let frame = tangent_frame(&b, 1e-5, &NewtonConfig::default()).unwrap();
    let prm = b.params.with_beta(0.0);
    // Fine enough sampling to unwrap the accumulated phase.
    let mut tr = simulate_damped(&b.state, &prm, window, window / 4000.0, &integ()).unwrap();
    attach_modulation(&mut tr, &b, &frame);
    (fit_modulation(&tr, (0.0, window)).unwrap(), b.beta())
}

fn criterion8(escape: Option<f64>, info: &mut Vec<String>) -> Outcome {
    let window = 0.1 * escape.unwrap_or(2.95e5);
    let (f, beta) = modulation_fit(-0.1, 0.005, window);
    let r1 = f.alpha1_quadratic / f.predicted_quadratic;
    let r2 = f.alpha2_slope / f.predicted_slope;
    let ok = (r1 - 1.0).abs() <= 0.2
        && (r2 - 1.0).abs() <= 0.2
        && f.alpha1_r_squared > 0.99
        && f.alpha2_r_squared > 0.99;
    info.push(format!(
        "modulation eps=-0.1: fitted coefficients / beta* = {:.4} (t^2), {:.4} (t)",
        f.alpha1_quadratic / -beta,
        f.alpha2_slope / (-2.0 * beta)
    ));
    let (g, beta_g) = modulation_fit(0.03, 0.005, 3.0e5);
    info.push(format!(
        "modulation eps=0.03 over [0, 3e5]: ratios to -g eps^4 {:.4} (t^2, R2 {:.5}), {:.4} (t, R2 {:.5}); to beta* {:.4}, {:.4}",
        g.alpha1_quadratic / g.predicted_quadratic,
        g.alpha1_r_squared,
        g.alpha2_slope / g.predicted_slope,
        g.alpha2_r_squared,
        g.alpha1_quadratic / -beta_g,
        g.alpha2_slope / (-2.0 * beta_g)
    ));
    outcome(
        ok,
        format!(
            "N=3 eps=-0.1 gamma=0.005 window [0, {window:.0}]: alpha1 t^2 coeff {:.4e} vs {:.4e} (ratio {r1:.4}, R2 {:.5}); alpha2~ slope {:.4e} vs {:.4e} (ratio {r2:.4}, R2 {:.5})",
            f.alpha1_quadratic, f.predicted_quadratic, f.alpha1_r_squared, f.alpha2_slope, f.predicted_slope, f.alpha2_r_squared
        ),
    )
}

fn main() {
    let skip_slow = std::env::var("BREATHER_ACCEPTANCE_SKIP_SLOW").is_ok_and(|v| v == "1");
    let strict = std::env::var("BREATHER_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut info = Vec::new();
    let mut escape = None;
    let mut failures = 0;
    let mut report = |k: usize, budget: Option<Duration>, run: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let o = run();
        let dt = t0.elapsed();
        let in_time = budget.is_none_or(|b| dt <= b);
        let pass = o.pass && in_time;
        if !pass {
            failures += 1;
        }
        let budget_txt = budget.map_or(String::new(), |b| {
            format!(
                " (budget {:.0?}{})",
                b,
                if in_time { "" } else { " EXCEEDED" }
            )
        });
        println!(
            "{} criterion {k}: {} [{:.2?}{budget_txt}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            dt
        );
    };
    report(1, Some(Duration::from_secs(1)), &mut || {
        criterion1(&mut info)
    });
    report(2, Some(Duration::from_secs(5)), &mut criterion2);
    report(3, Some(Duration::from_secs(30)), &mut || {
        criterion3(&mut info)
    });
    if skip_slow {
        println!("SKIP criterion 4: slow, BREATHER_ACCEPTANCE_SKIP_SLOW=1");
    } else {
        report(4, None, &mut || criterion4(&mut escape));
    }
    report(5, None, &mut || criterion5(&mut info));
    report(6, None, &mut || criterion6(&mut info));
    report(7, None, &mut criterion7);
    report(8, None, &mut || criterion8(escape, &mut info));
    for line in &info {
        println!("INFO {line}");
    }
    println!("acceptance: {} of 8 criteria failing", failures);
    if strict && failures > 0 {
        std::process::exit(1);
    }
}
