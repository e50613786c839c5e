//! Explicit Runge-Kutta integrators with dense output.
//!
//! `AdaptiveRk45` is the Dormand-Prince 5(4) pair with PI step-size control and
//! the standard fourth-order continuous extension. `FixedRk4` is the classical
//! scheme at constant step `max_step`, with cubic Hermite interpolation between
//! steps; it exists mostly for cross-checks.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::ops::ControlFlow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    AdaptiveRk45,
    FixedRk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Zero selects the first step automatically.
    pub initial_step: f64,
    pub method: Method,
    pub max_steps: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 5e-13,
            abs_tol: 1e-15,
            max_step: 1.0,
            initial_step: 0.0,
            method: Method::AdaptiveRk45,
            max_steps: 200_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn fixed_rk4(step: f64) -> Self {
        IntegratorConfig {
            max_step: step,
            method: Method::FixedRk4,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.rel_tol) || !ok(self.abs_tol) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidInput("max_step must be positive".into()));
        }
        if !(self.initial_step >= 0.0) {
            return Err(Error::InvalidInput(
                "initial_step must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Final state, samples at the requested times, and step statistics.
#[derive(Debug, Clone)]
pub struct Solution {
    pub t: f64,
    pub y: Vec<f64>,
    pub samples: Vec<(f64, Vec<f64>)>,
    pub accepted: u64,
    pub rejected: u64,
    pub evaluations: u64,
}

/// Integrates `y' = f(t, y)` over `t_span`, recording the state at each of
/// the (sorted) `sample_times` that fall inside the span.
pub fn integrate<F>(
    f: F,
    y0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
    sample_times: &[f64],
) -> Result<Solution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut samples = Vec::new();
    let mut sol = integrate_with(f, y0, t_span, cfg, sample_times, |t, y| {
        samples.push((t, y.to_vec()));
        ControlFlow::Continue(())
    })?;
    sol.samples = samples;
    Ok(sol)
}

/// Like [`integrate`] but hands each sample to `observer` instead of storing
/// it. Returning `ControlFlow::Break` from the observer stops the integration
/// at that sample time.
pub fn integrate_with<F, O>(
    mut f: F,
    y0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
    sample_times: &[f64],
    mut observer: O,
) -> Result<Solution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]) -> ControlFlow<()>,
{
    cfg.validate()?;
    let (t0, t1) = t_span;
    if !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidInput(format!("bad time span ({t0}, {t1})")));
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("sample times must be sorted".into()));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite initial state".into()));
    }
    let first = sample_times.partition_point(|&s| s < t0);
    let last = sample_times.partition_point(|&s| s <= t1);
    let sampler = Sampler {
        times: &sample_times[first..last],
        next: 0,
    };
    match cfg.method {
        Method::AdaptiveRk45 => dopri5(&mut f, y0, t0, t1, cfg, sampler, &mut observer),
        Method::FixedRk4 => rk4(&mut f, y0, t0, t1, cfg, sampler, &mut observer),
    }
}

struct Sampler<'a> {
    times: &'a [f64],
    next: usize,
}

impl Sampler<'_> {
    /// Emits every pending sample with time ≤ `t_hi` using `interp`.
    fn emit<O, I>(&mut self, t_hi: f64, observer: &mut O, mut interp: I) -> Option<f64>
    where
        O: FnMut(f64, &[f64]) -> ControlFlow<()>,
        I: FnMut(f64) -> Vec<f64>,
    {
        while self.next < self.times.len() && self.times[self.next] <= t_hi {
            let ts = self.times[self.next];
            self.next += 1;
            let y = interp(ts);
            if observer(ts, &y).is_break() {
                return Some(ts);
            }
        }
        None
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn failure(t: f64, y: &[f64], reason: impl Into<String>) -> Error {
    Error::IntegrationFailure {
        t,
        y: y.to_vec(),
        reason: reason.into(),
    }
}

fn initial_step<F>(
    f: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    cfg: &IntegratorConfig,
    span: f64,
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let sk: Vec<f64> = y0
        .iter()
        .map(|y| cfg.abs_tol + cfg.rel_tol * y.abs())
        .collect();
    let rms = |v: &[f64]| {
        (v.iter().zip(&sk).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let mut h = if d0 <= 1e-10 || d1 <= 1e-10 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h = h.min(cfg.max_step).min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, k)| y + h * k).collect();
    let mut f1 = vec![0.0; n];
    f(t0 + h, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h;
    let der = d1.max(d2);
    let h1 = if der <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der).powf(0.2)
    };
    (100.0 * h).min(h1).min(cfg.max_step).min(span)
}

fn dopri5<F, O>(
    f: &mut F,
    y0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    mut sampler: Sampler<'_>,
    observer: &mut O,
) -> Result<Solution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]) -> ControlFlow<()>,
{
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut ys = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut rc = [
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    ];
    f(t, &y, &mut k1);
    let mut nfev = 1u64;
    let (mut accepted, mut rejected) = (0u64, 0u64);

    let done = |t: f64, y: Vec<f64>, a, r, e| {
        Ok(Solution {
            t,
            y,
            samples: Vec::new(),
            accepted: a,
            rejected: r,
            evaluations: e,
        })
    };

    if let Some(ts) = sampler.emit(t0, observer, |_| y.clone()) {
        return done(ts, y, 0, 0, nfev);
    }
    if t1 == t0 {
        return done(t, y, 0, 0, nfev);
    }

    let mut h = if cfg.initial_step > 0.0 {
        cfg.initial_step.min(cfg.max_step)
    } else {
        nfev += 2;
        initial_step(f, t0, &y, &k1, cfg, t1 - t0)
    };

    const BETA: f64 = 0.04;
    let expo1 = 0.2 - BETA * 0.75;
    let (facc1, facc2, safe) = (1.0 / 0.2, 1.0 / 10.0, 0.9);
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;

    loop {
        if accepted + rejected >= cfg.max_steps {
            return Err(failure(t, &y, "maximum number of steps exceeded"));
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(failure(t, &y, format!("step size underflow (h = {h:e})")));
        }
        let last = t + 1.01 * h >= t1;
        if last {
            h = t1 - t;
        }

        for i in 0..n {
            ys[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, &ys, &mut k2);
        for i in 0..n {
            ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, &ys, &mut k3);
        for i in 0..n {
            ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, &ys, &mut k4);
        for i in 0..n {
            ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, &ys, &mut k5);
        for i in 0..n {
            ys[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let tph = t + h;
        f(tph, &ys, &mut k6);
        for i in 0..n {
            y1[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(tph, &y1, &mut k7);
        nfev += 6;

        let mut err = 0.0;
        for i in 0..n {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y1[i].abs());
            err += (e / sk).powi(2);
        }
        err = (err / n as f64).sqrt();
        if !err.is_finite() {
            rejected += 1;
            h *= 0.1;
            last_rejected = true;
            continue;
        }

        let fac11 = err.powf(expo1);
        let fac = (fac11 / facold.powf(BETA) / safe).clamp(facc2, facc1);
        let mut hnew = h / fac;

        if err <= 1.0 {
            facold = err.max(1e-4);
            accepted += 1;
            for i in 0..n {
                let ydiff = y1[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                rc[0][i] = y[i];
                rc[1][i] = ydiff;
                rc[2][i] = bspl;
                rc[3][i] = ydiff - h * k7[i] - bspl;
                rc[4][i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let (told, hstep) = (t, h);
            let stop = sampler.emit(if last { t1 } else { tph }, observer, |ts| {
                let th = (ts - told) / hstep;
                let th1 = 1.0 - th;
                (0..n)
                    .map(|i| {
                        rc[0][i]
                            + th * (rc[1][i] + th1 * (rc[2][i] + th * (rc[3][i] + th1 * rc[4][i])))
                    })
                    .collect()
            });
            if let Some(ts) = stop {
                let th = (ts - told) / hstep;
                let th1 = 1.0 - th;
                let ystop: Vec<f64> = (0..n)
                    .map(|i| {
                        rc[0][i]
                            + th * (rc[1][i] + th1 * (rc[2][i] + th * (rc[3][i] + th1 * rc[4][i])))
                    })
                    .collect();
                return done(ts, ystop, accepted, rejected, nfev);
            }
            std::mem::swap(&mut k1, &mut k7);
            std::mem::swap(&mut y, &mut y1);
            t = if last { t1 } else { tph };
            if y.iter().any(|v| !v.is_finite()) {
                return Err(failure(t, &y, "non-finite state"));
            }
            if last {
                return done(t, y, accepted, rejected, nfev);
            }
            if last_rejected {
                hnew = hnew.min(h);
            }
            last_rejected = false;
            h = hnew.min(cfg.max_step);
        } else {
            hnew = h / facc1.min(fac11 / safe);
            rejected += 1;
            last_rejected = true;
            h = hnew;
        }
    }
}

fn rk4<F, O>(
    f: &mut F,
    y0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    mut sampler: Sampler<'_>,
    observer: &mut O,
) -> Result<Solution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]) -> ControlFlow<()>,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let (mut k2, mut k3, mut k4, mut kn) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut ys = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    f(t0, &y, &mut k1);
    let mut nfev = 1;
    let done = |t: f64, y: Vec<f64>, a, e| {
        Ok(Solution {
            t,
            y,
            samples: Vec::new(),
            accepted: a,
            rejected: 0,
            evaluations: e,
        })
    };
    if let Some(ts) = sampler.emit(t0, observer, |_| y.clone()) {
        return done(ts, y, 0, nfev);
    }
    let steps = ((t1 - t0) / cfg.max_step).ceil().max(0.0) as u64;
    if steps > cfg.max_steps {
        return Err(failure(t0, &y, "maximum number of steps exceeded"));
    }
    for s in 0..steps {
        let t = t0 + s as f64 * cfg.max_step;
        let tn = if s + 1 == steps {
            t1
        } else {
            t0 + (s + 1) as f64 * cfg.max_step
        };
        let h = tn - t;
        for i in 0..n {
            ys[i] = y[i] + 0.5 * h * k1[i];
        }
        f(t + 0.5 * h, &ys, &mut k2);
        for i in 0..n {
            ys[i] = y[i] + 0.5 * h * k2[i];
        }
        f(t + 0.5 * h, &ys, &mut k3);
        for i in 0..n {
            ys[i] = y[i] + h * k3[i];
        }
        f(tn, &ys, &mut k4);
        for i in 0..n {
            y1[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        f(tn, &y1, &mut kn);
        nfev += 4;
        let hermite = |ts: f64| -> Vec<f64> {
            let th = (ts - t) / h;
            let h00 = (1.0 + 2.0 * th) * (1.0 - th).powi(2);
            let h10 = th * (1.0 - th).powi(2);
            let h01 = th * th * (3.0 - 2.0 * th);
            let h11 = th * th * (th - 1.0);
            (0..n)
                .map(|i| h00 * y[i] + h10 * h * k1[i] + h01 * y1[i] + h11 * h * kn[i])
                .collect()
        };
        if let Some(ts) = sampler.emit(tn, observer, hermite) {
            return done(ts, hermite(ts), s + 1, nfev);
        }
        std::mem::swap(&mut y, &mut y1);
        std::mem::swap(&mut k1, &mut kn);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(failure(tn, &y, "non-finite state"));
        }
    }
    done(t1, y, steps, nfev)
}
