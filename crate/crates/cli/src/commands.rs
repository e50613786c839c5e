//! One runner per subcommand. Each writes its artifacts into the output
//! directory and returns a short summary for stdout.

use crate::config::{Command, RunConfig, SeedProfile};
use crate::output::{write_json, write_json_atomic, Csv};
use crate::svg::{Plot, Series};
use breather_core::breather::{
    asymptotic_breather, solve_breather, twist_leading_order, twist_reduced, Breather,
};
use breather_core::lattice::{CartesianState, LatticeParams};
use breather_core::metastability::{
    attach_modulation, detect_escape, simulate_span, twist_comparison, EscapeCriterion,
    EscapeReport, ModulationTrace,
};
use breather_core::numerics::{IntegratorConfig, NewtonConfig};
use breather_core::stability::{lambda2_prediction, spectrum, spectrum_only, tangent_frame};
use breather_core::sweep::{map_cells, with_threads, Execution};
use breather_core::two_site::{ansatz_state, energy_evolution, phase_shift_approx, tau};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum Failure {
    Config(Vec<String>),
    Numerical { kind: String, message: String },
    Io(String),
}

impl From<breather_core::Error> for Failure {
    fn from(e: breather_core::Error) -> Self {
        let kind = format!("{e:?}")
            .split(|c: char| !c.is_alphanumeric())
            .next()
            .unwrap_or("Error")
            .to_string();
        Failure::Numerical {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// What a successful run produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub summary: Vec<(String, String)>,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
    pub escape_not_reached: bool,
    /// Set when some artifacts were written but part of the run failed.
    pub partial_failure: Option<Failure>,
}

impl Outcome {
    fn out(&mut self, name: impl Into<String>) {
        self.outputs.push(name.into());
    }

    fn say(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.into(), value.to_string()));
    }

    fn sayf(&mut self, key: &str, x: f64) {
        let s = if x != 0.0 && !(1e-3..1e6).contains(&x.abs()) {
            format!("{x:.10e}")
        } else {
            format!("{x}")
        };
        self.say(key, s);
    }
}

pub fn run(cfg: &RunConfig, threads: usize) -> Result<Outcome, Failure> {
    let dir = &cfg.output_dir;
    match cfg.command {
        Command::Breather => cmd_breather(cfg, dir),
        Command::Spectrum => cmd_spectrum(cfg, dir),
        Command::SweepLambda2 => cmd_sweep(cfg, dir, threads),
        Command::Twist => cmd_twist(cfg, dir, threads),
        Command::Evolve => cmd_evolve(cfg, dir).map(|(o, _)| o),
        Command::Escape => cmd_escape(cfg, dir),
        Command::TwoSite => cmd_two_site(cfg, dir),
    }
}

fn newton() -> NewtonConfig {
    NewtonConfig::default()
}

#[derive(Serialize)]
struct BreatherFile<'a> {
    n_sites: usize,
    eps: f64,
    gamma: f64,
    omega: f64,
    beta: f64,
    residual_norm: f64,
    iterations: usize,
    p: &'a [f64],
    q: &'a [f64],
    energies: Vec<f64>,
    twist: Vec<f64>,
}

fn write_breather(b: &Breather, path: &Path) -> Result<(), Failure> {
    let f = BreatherFile {
        n_sites: b.n_sites(),
        eps: b.params.eps,
        gamma: b.params.gamma,
        omega: b.omega,
        beta: b.beta(),
        residual_norm: b.residual_norm,
        iterations: b.iterations,
        p: &b.state.p,
        q: &b.state.q,
        energies: b.state.energies(),
        twist: twist_reduced(b)?,
    };
    write_json(path, &f)?;
    Ok(())
}

fn solve(cfg: &RunConfig, n: usize, eps: f64) -> Result<Breather, Failure> {
    Ok(solve_breather(eps, cfg.gamma, cfg.omega(), n, &newton())?)
}

fn cmd_breather(cfg: &RunConfig, dir: &Path) -> Result<Outcome, Failure> {
    let mut o = Outcome::default();
    let b = solve(cfg, cfg.n(), cfg.eps1())?;
    write_breather(&b, &dir.join("breather.json"))?;
    o.out("breather.json");
    let sites: Vec<f64> = (1..=b.n_sites()).map(|j| j as f64).collect();
    Plot::new("Breather site energies", "site j", "E_j")
        .log_y()
        .with(Series::scatter("E_j", &sites, &b.state.energies()))
        .write(&dir.join("plot_profile.svg"))?;
    o.out("plot_profile.svg");
    o.sayf("beta", b.beta());
    o.sayf("residual_norm", b.residual_norm);
    Ok(o)
}

fn spectrum_csv(values: &[breather_core::numerics::ComplexEigenvalue]) -> Csv {
    let mut c = Csv::new(&["re", "im"]);
    for e in values {
        c.row(&[e.re, e.im]);
    }
    c
}

fn cmd_spectrum(cfg: &RunConfig, dir: &Path) -> Result<Outcome, Failure> {
    let mut o = Outcome::default();
    let b = solve(cfg, cfg.n(), cfg.eps1())?;
    write_breather(&b, &dir.join("breather.json"))?;
    o.out("breather.json");
    let rep = spectrum(&b)?;
    spectrum_csv(&rep.eigenvalues).write(&dir.join("spectrum.csv"))?;
    o.out("spectrum.csv");
    write_json(&dir.join("spectrum.json"), &rep)?;
    o.out("spectrum.json");
    let re: Vec<f64> = rep.eigenvalues.iter().map(|e| e.re).collect();
    let im: Vec<f64> = rep.eigenvalues.iter().map(|e| e.im).collect();
    Plot::new("Linearized spectrum", "Re", "Im")
        .with(Series::scatter("eigenvalues", &re, &im))
        .write(&dir.join("plot_spectrum.svg"))?;
    o.out("plot_spectrum.svg");
    if rep.mu.is_empty() {
        o.notes
            .push("tangent frame unavailable; mu left empty".into());
    }
    o.sayf("lambda2", rep.lambda2);
    o.sayf("lambda2_predicted", rep.lambda2_predicted);
    o.sayf("zero_mode_residual", rep.zero_mode_residual);
    for e in &rep.eigenvalues {
        o.say("eigenvalue", format!("{:.9e} {:+.9e}i", e.re, e.im));
    }
    Ok(o)
}

/// Runs independent cells on the pool; failed cells are reported together.
fn fan_out<T: Sync, R: Send>(
    threads: usize,
    cells: &[T],
    f: impl Fn(&T) -> Result<R, Failure> + Sync + Send,
) -> Result<Vec<Result<R, Failure>>, Failure> {
    with_threads(threads, || map_cells(cells, Execution::Parallel, f)).map_err(Failure::from)
}

fn collect_cells<R>(
    results: Vec<Result<R, Failure>>,
    label: impl Fn(usize) -> String,
    o: &mut Outcome,
) -> Vec<(usize, R)> {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push((k, v)),
            Err(Failure::Numerical { message, .. }) | Err(Failure::Io(message)) => {
                failed.push(format!("{}: {message}", label(k)))
            }
            Err(Failure::Config(m)) => failed.push(format!("{}: {}", label(k), m.join("; "))),
        }
    }
    if !failed.is_empty() {
        o.partial_failure = Some(Failure::Numerical {
            kind: "CellFailure".into(),
            message: failed.join("; "),
        });
    }
    ok
}

fn cmd_sweep(cfg: &RunConfig, dir: &Path, threads: usize) -> Result<Outcome, Failure> {
    let mut o = Outcome::default();
    let n = cfg.n();
    let cells_dir = dir.join("cells");
    fs::create_dir_all(&cells_dir)?;
    let indexed: Vec<(usize, f64)> = cfg.eps.iter().copied().enumerate().collect();
    let results = fan_out(threads, &indexed, |&(k, eps)| {
        let b = solve(cfg, n, eps)?;
        let rep = spectrum_only(&b)?;
        let cell = cells_dir.join(format!("cell_{k:03}"));
        fs::create_dir_all(&cell)?;
        write_breather(&b, &cell.join("breather.json"))?;
        spectrum_csv(&rep.eigenvalues).write(&cell.join("spectrum.csv"))?;
        Ok((
            eps,
            rep.lambda2,
            lambda2_prediction(n, eps, cfg.gamma, cfg.omega()),
            b.beta(),
        ))
    })?;
    let rows = collect_cells(results, |k| format!("eps={}", cfg.eps[k]), &mut o);
    let mut csv = Csv::new(&[
        "eps",
        "lambda2_computed",
        "lambda2_predicted",
        "ratio",
        "beta",
    ]);
    for (_, (eps, l, lp, beta)) in &rows {
        csv.row(&[*eps, *l, *lp, l / lp, *beta]);
    }
    csv.write(&dir.join("lambda2.csv"))?;
    o.out("lambda2.csv");
    o.out("cells/");
    let x: Vec<f64> = rows.iter().map(|r| r.1 .0).collect();
    let l: Vec<f64> = rows.iter().map(|r| r.1 .1).collect();
    let lp: Vec<f64> = rows.iter().map(|r| r.1 .2).collect();
    Plot::new(
        &format!("Small eigenvalue, N={n}, gamma={}", cfg.gamma),
        "eps",
        "lambda2",
    )
    .log_y()
    .with(Series::scatter("computed", &x, &l))
    .with(Series::line("2(2N-2) gamma eps^(2N-2)", &x, &lp))
    .write(&dir.join("plot_lambda2.svg"))?;
    o.out("plot_lambda2.svg");
    for (_, (eps, l, lp, _)) in &rows {
        o.say(
            "cell",
            format!(
                "eps={eps:.6} lambda2={l:.6e} predicted={lp:.6e} ratio={:.4}",
                l / lp
            ),
        );
    }
    Ok(o)
}

fn cmd_twist(cfg: &RunConfig, dir: &Path, threads: usize) -> Result<Outcome, Failure> {
    let mut o = Outcome::default();
    let eps = cfg.eps1();
    let cells_dir = dir.join("cells");
    fs::create_dir_all(&cells_dir)?;
    let results = fan_out(threads, &cfg.n_sites, |&n| {
        let b = solve(cfg, n, eps)?;
        let cell = cells_dir.join(format!("n_{n}"));
        fs::create_dir_all(&cell)?;
        write_breather(&b, &cell.join("breather.json"))?;
        Ok((n, twist_reduced(&b)?))
    })?;
    let rows = collect_cells(results, |k| format!("n={}", cfg.n_sites[k]), &mut o);
    let target = cfg.gamma / cfg.omega();
    let mut summary = Csv::new(&["n", "psi_last", "gamma_over_omega", "relative_error"]);
    let mut profile = Csv::new(&["n", "bond", "psi", "leading_order"]);
    for (_, (n, psi)) in &rows {
        let last = *psi.last().unwrap_or(&f64::NAN);
        summary.row(&[*n as f64, last, target, last / target - 1.0]);
        for (j, (p, lo)) in psi
            .iter()
            .zip(twist_leading_order(*n, eps, cfg.gamma, cfg.omega()))
            .enumerate()
        {
            profile.row(&[*n as f64, (j + 1) as f64, *p, lo]);
        }
        o.say(
            "cell",
            format!(
                "n={n} psi_last={last:.6e} relative_error={:+.4}",
                last / target - 1.0
            ),
        );
    }
    summary.write(&dir.join("twist.csv"))?;
    profile.write(&dir.join("twist_profile.csv"))?;
    o.out("twist.csv");
    o.out("twist_profile.csv");
    o.out("cells/");
    let ns: Vec<f64> = rows.iter().map(|r| r.1 .0 as f64).collect();
    let last: Vec<f64> = rows
        .iter()
        .map(|r| *r.1 .1.last().unwrap_or(&f64::NAN))
        .collect();
    Plot::new("Twist at the damped end", "N", "psi_{N-1}")
        .with(Series::scatter("computed", &ns, &last))
        .with(Series::line("gamma/omega", &ns, &vec![target; ns.len()]))
        .write(&dir.join("plot_twist.svg"))?;
    o.out("plot_twist.svg");
    Ok(o)
}

fn initial_state(cfg: &RunConfig) -> Result<CartesianState, Failure> {
    let n = cfg.n();
    match cfg.seed_profile.unwrap_or(SeedProfile::Asymptotic) {
        SeedProfile::Asymptotic => {
            Ok(asymptotic_breather(cfg.eps1(), cfg.gamma, cfg.omega(), n)?.state)
        }
        SeedProfile::SingleSite => Ok(CartesianState::single_site(n, cfg.amplitude.unwrap_or(1.0))),
        SeedProfile::File => {
            let path = cfg.seed_file.as_ref().expect("validated");
            let text = fs::read_to_string(path).map_err(|e| {
                Failure::Config(vec![format!(
                    "seed_file: cannot read {}: {e}",
                    path.display()
                )])
            })?;
            let v: Value = serde_json::from_str(&text).map_err(|e| {
                Failure::Config(vec![format!(
                    "seed_file: invalid JSON in {}: {e}",
                    path.display()
                )])
            })?;
            let state = v.get("state").cloned().unwrap_or(v);
            let s: CartesianState = serde_json::from_value(state).map_err(|e| {
                Failure::Config(vec![format!("seed_file: expected p and q arrays: {e}")])
            })?;
            if s.p.len() != n || s.q.len() != n {
                return Err(Failure::Config(vec![format!(
                    "seed_file: state has {} sites, n is {n}",
                    s.p.len()
                )]));
            }
            Ok(s)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    config: Value,
    t: f64,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
}

/// Integrates in chunks of `checkpoint_interval`, saving a checkpoint after
/// each. Chunk boundaries do not depend on where a run was resumed, so a
/// resumed run reproduces an uninterrupted one exactly.
fn integrate_chunked(
    cfg: &RunConfig,
    prm: &LatticeParams,
    dir: &Path,
    o: &mut Outcome,
) -> Result<ModulationTrace, Failure> {
    let t_end = cfg.t_end.expect("validated");
    let dt = cfg.sample_stride.unwrap_or(10.0);
    let every = cfg.checkpoint_interval.unwrap_or(1e4);
    let icfg = IntegratorConfig {
        rel_tol: cfg.rel_tol.unwrap_or(1e-10),
        abs_tol: 1e-12,
        ..Default::default()
    };
    let ck_path = dir.join("checkpoint.json");
    let key = cfg.to_raw();

    let mut trace: Option<ModulationTrace> = None;
    if cfg.resume == Some(true) {
        match fs::read_to_string(&ck_path) {
            Ok(text) => {
                let ck: Checkpoint = serde_json::from_str(&text)
                    .map_err(|e| Failure::Io(format!("corrupt checkpoint: {e}")))?;
                if ck.config != key {
                    return Err(Failure::Config(vec![
                        "resume: checkpoint was written by a different configuration".into(),
                    ]));
                }
                o.notes
                    .push(format!("resumed from checkpoint at t = {}", ck.t));
                trace = Some(ModulationTrace::from_samples(*prm, &ck.times, &ck.states)?);
            }
            Err(_) => o
                .notes
                .push("resume requested but no checkpoint found; started from t = 0".into()),
        }
    }
    let mut t = trace
        .as_ref()
        .and_then(|tr| tr.times.last().copied())
        .unwrap_or(0.0);
    let mut state = match &trace {
        Some(tr) => tr.last_state().expect("non-empty checkpoint"),
        None => initial_state(cfg)?,
    };
    while t < t_end {
        let t1 = (((t / every) + 1e-9).floor() + 1.0) * every;
        let t1 = t1.min(t_end);
        let chunk = simulate_span(&state, prm, (t, t1), dt, &icfg)?;
        let failed = chunk.failure.is_some();
        match &mut trace {
            Some(tr) => tr.extend(chunk),
            None => trace = Some(chunk),
        }
        let tr = trace.as_ref().expect("set above");
        if failed {
            break;
        }
        t = t1;
        state = tr.last_state().expect("chunk has samples");
        if t < t_end {
            write_json_atomic(
                &ck_path,
                &Checkpoint {
                    config: key.clone(),
                    t,
                    times: tr.times.clone(),
                    states: tr.states.clone(),
                },
            )?;
        }
    }
    let _ = fs::remove_file(&ck_path);
    Ok(trace.expect("at least one chunk"))
}

fn write_trace(trace: &ModulationTrace, dir: &Path, o: &mut Outcome) -> Result<(), Failure> {
    let n = trace.params.n_sites;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|j| format!("E_{j}")));
    header.extend((1..n).map(|j| format!("psi_{j}")));
    header.extend(["omega", "alpha1", "alpha2_tilde"].map(String::from));
    let mut csv = Csv::new(&header);
    let pick = |v: &Vec<f64>, k: usize| v.get(k).copied().unwrap_or(f64::NAN);
    for k in 0..trace.len() {
        let mut row = vec![trace.times[k]];
        row.extend(&trace.energies[k]);
        row.extend(&trace.phase_diffs[k]);
        row.extend([
            trace.omega_of_t[k],
            pick(&trace.alpha1, k),
            pick(&trace.alpha2_tilde, k),
        ]);
        csv.row(&row);
    }
    csv.write(&dir.join("trace.csv"))?;
    o.out("trace.csv");

    let mut p = Plot::new("Site energies", "t", "E_j").log_y();
    for j in 0..n {
        p = p.with(Series::line(
            format!("E_{}", j + 1),
            &trace.times,
            &trace.site_energy(j),
        ));
    }
    p.write(&dir.join("plot_energies.svg"))?;
    Plot::new("Instantaneous frequency", "t", "omega(t)")
        .with(Series::line("omega", &trace.times, &trace.omega_of_t))
        .write(&dir.join("plot_frequency.svg"))?;
    o.out("plot_energies.svg");
    o.out("plot_frequency.svg");
    if !trace.alpha1.is_empty() {
        Plot::new("Modulation coordinates", "t", "alpha")
            .with(Series::line("alpha1", &trace.times, &trace.alpha1))
            .with(Series::line(
                "alpha2_tilde",
                &trace.times,
                &trace.alpha2_tilde,
            ))
            .write(&dir.join("plot_modulation.svg"))?;
        o.out("plot_modulation.svg");
    }
    Ok(())
}

fn cmd_evolve(cfg: &RunConfig, dir: &Path) -> Result<(Outcome, ModulationTrace), Failure> {
    let mut o = Outcome::default();
    let prm = LatticeParams::new(
        cfg.n(),
        cfg.eps1(),
        cfg.gamma,
        cfg.beta.unwrap_or(0.0),
        cfg.omega(),
    )?;
    let mut trace = integrate_chunked(cfg, &prm, dir, &mut o)?;
    // Modulation coordinates relative to the damped-driven breather at ω.
    let frame = solve(cfg, cfg.n(), cfg.eps1()).and_then(|b| {
        let f = tangent_frame(&b, 1e-5, &newton())?;
        Ok((b, f))
    });
    match frame {
        Ok((b, f)) => attach_modulation(&mut trace, &b, &f),
        Err(Failure::Numerical { message, .. }) => o
            .notes
            .push(format!("modulation coordinates unavailable: {message}")),
        Err(e) => return Err(e),
    }
    write_trace(&trace, dir, &mut o)?;
    o.say("samples", trace.len());
    if let Some(k) = trace.len().checked_sub(1) {
        o.sayf("t_final", trace.times[k]);
        o.sayf("total_energy_final", trace.total_energy(k));
    }
    if let Some(f) = &trace.failure {
        o.partial_failure = Some(Failure::Numerical {
            kind: "IntegrationFailure".into(),
            message: format!("integration failed at t = {}: {}", f.t, f.reason),
        });
    }
    Ok((o, trace))
}

fn criterion(cfg: &RunConfig) -> EscapeCriterion {
    let d = EscapeCriterion::default();
    EscapeCriterion {
        fraction: cfg.escape_fraction.unwrap_or(d.fraction),
        dwell: cfg.escape_dwell.unwrap_or(d.dwell),
        settle_time: cfg.escape_settle.unwrap_or(d.settle_time),
    }
}

#[derive(Serialize)]
struct EscapeFile<'a> {
    #[serde(flatten)]
    report: &'a EscapeReport,
    reached: bool,
    fraction: f64,
    dwell: f64,
    settle_time: f64,
}

fn write_escape(rep: &EscapeReport, crit: &EscapeCriterion, path: &Path) -> Result<(), Failure> {
    let f = EscapeFile {
        report: rep,
        reached: rep.reached(),
        fraction: crit.fraction,
        dwell: crit.dwell,
        settle_time: crit.settle_time,
    };
    write_json(path, &f)?;
    Ok(())
}

fn cmd_escape(cfg: &RunConfig, dir: &Path) -> Result<Outcome, Failure> {
    let (mut o, trace) = cmd_evolve(cfg, dir)?;
    let crit = criterion(cfg);
    let rep = detect_escape(&trace, &crit);
    write_escape(&rep, &crit, &dir.join("escape.json"))?;
    o.out("escape.json");

    let tw = twist_comparison(&trace);
    let mut csv = Csv::new(&[
        "t",
        "psi",
        "gamma_over_omega",
        "gamma_over_2e1",
        "gamma_over_e1",
    ]);
    for k in 0..tw.times.len() {
        csv.row(&[
            tw.times[k],
            tw.psi[k],
            tw.gamma_over_omega[k],
            tw.gamma_over_2e1[k],
            tw.gamma_over_e1[k],
        ]);
    }
    csv.write(&dir.join("twist_trace.csv"))?;
    o.out("twist_trace.csv");
    Plot::new("Twist at the damped end", "t", "psi_{N-1}")
        .with(Series::line("psi_{N-1}", &tw.times, &tw.psi))
        .with(Series::line(
            "gamma/omega(t)",
            &tw.times,
            &tw.gamma_over_omega,
        ))
        .with(Series::line("gamma/(2E_1)", &tw.times, &tw.gamma_over_2e1))
        .write(&dir.join("plot_twist.svg"))?;
    o.out("plot_twist.svg");

    match rep.escape_time {
        Some(t) => o.sayf("escape_time", t),
        None => {
            o.say("escape_time", "not reached");
            o.escape_not_reached = true;
        }
    }
    Ok(o)
}

fn cmd_two_site(cfg: &RunConfig, dir: &Path) -> Result<Outcome, Failure> {
    let mut o = Outcome::default();
    let (e0, eps, g) = (cfg.e0.expect("validated"), cfg.eps1(), cfg.gamma);
    let tau = tau(e0, eps, g)?;
    o.say("tau", format!("{tau:.1}"));
    let t_end = cfg.t_end.unwrap_or(tau + 1500.0);
    let prm = LatticeParams::new(2, eps, g, 0.0, 1.0)?;
    let icfg = IntegratorConfig {
        rel_tol: cfg.rel_tol.unwrap_or(1e-10),
        abs_tol: 1e-12,
        ..Default::default()
    };
    let trace = simulate_span(
        &ansatz_state(e0, eps, g)?,
        &prm,
        (0.0, t_end),
        cfg.sample_stride.unwrap_or(1.0),
        &icfg,
    )?;

    let mut csv = Csv::new(&["t", "E", "E_law", "E_1", "E_2", "psi", "psi_approx"]);
    let (mut e_law, mut psi_law) = (Vec::new(), Vec::new());
    let mut worst: f64 = 0.0;
    for k in 0..trace.len() {
        let t = trace.times[k];
        let e = trace.total_energy(k);
        let law = energy_evolution(e0, eps, g, t).unwrap_or(f64::NAN);
        let psi_a = phase_shift_approx(e, eps, g).unwrap_or(f64::NAN);
        if t <= tau - 100.0 {
            worst = worst.max((e / law - 1.0).abs());
        }
        csv.row(&[
            t,
            e,
            law,
            trace.energies[k][0],
            trace.energies[k][1],
            trace.phase_diffs[k][0],
            psi_a,
        ]);
        e_law.push(law);
        psi_law.push(psi_a);
    }
    csv.write(&dir.join("two_site.csv"))?;
    o.out("two_site.csv");

    let crit = criterion(cfg);
    let rep = detect_escape(&trace, &crit);
    write_json(
        &dir.join("two_site.json"),
        &json!({
            "e0": e0,
            "eps": eps,
            "gamma": g,
            "tau": tau,
            "max_relative_energy_law_error_before_tau_minus_100": worst,
            "escape_time": rep.escape_time,
            "t_end": t_end,
        }),
    )?;
    o.out("two_site.json");

    let e: Vec<f64> = (0..trace.len()).map(|k| trace.total_energy(k)).collect();
    Plot::new("Two-site total energy", "t", "E")
        .with(Series::line("simulation", &trace.times, &e))
        .with(Series::line("Lambert-W law", &trace.times, &e_law))
        .write(&dir.join("plot_energy.svg"))?;
    Plot::new("Two-site phase difference", "t", "psi")
        .with(Series::line(
            "simulation",
            &trace.times,
            &trace.phase_series(0),
        ))
        .with(Series::line(
            "quasi-static approximation",
            &trace.times,
            &psi_law,
        ))
        .write(&dir.join("plot_phase.svg"))?;
    o.out("plot_energy.svg");
    o.out("plot_phase.svg");

    o.say("max_relative_energy_law_error", format!("{worst:.3e}"));
    match rep.escape_time {
        Some(t) => o.sayf("escape_time", t),
        None => o.say("escape_time", "not reached"),
    }
    if let Some(f) = &trace.failure {
        o.partial_failure = Some(Failure::Numerical {
            kind: "IntegrationFailure".into(),
            message: format!("integration failed at t = {}: {}", f.t, f.reason),
        });
    }
    Ok(o)
}

pub fn resolve_dir(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| {
        Failure::Config(vec![format!(
            "out: cannot create {}: {e}",
            cfg.output_dir.display()
        )])
    })?;
    Ok(cfg.output_dir.clone())
}
