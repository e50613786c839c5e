//! Independent parameter cells run sequentially or on a rayon pool.
//!
//! Without the `parallel` feature every execution mode runs sequentially.

use crate::breather::solve_breather;
use crate::error::{Error, Result};
use crate::numerics::{fit_powers, NewtonConfig};
use crate::stability::{lambda2_prediction, spectrum_only};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Applies `f` to every cell; output order matches input order.
pub fn map_cells<T, R, F>(cells: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            cells.par_iter().map(f).collect()
        }
        _ => cells.iter().map(f).collect(),
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (0 = rayon's default).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidInput(format!("cannot build thread pool: {e}")))?;
        Ok(pool.install(f))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(f())
    }
}

/// Expands `"a:b:step"` to `a, a+step, ..., b` (inclusive within rounding), or
/// parses a single number.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |x: &str| {
        x.parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("not a number: {x:?} in {s:?}")))
    };
    match parts.as_slice() {
        [x] => Ok(vec![num(x)?]),
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(a.is_finite() && b.is_finite() && step.is_finite())
                || step == 0.0
                || (b - a) / step < 0.0
            {
                return Err(Error::InvalidInput(format!(
                    "bad range {s:?}: need finite a, b and a nonzero step toward b"
                )));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            if n > 1_000_000 {
                return Err(Error::InvalidInput(format!(
                    "range {s:?} has too many points"
                )));
            }
            Ok((0..=n).map(|k| a + k as f64 * step).collect())
        }
        _ => Err(Error::InvalidInput(format!(
            "expected a number or a:b:step, got {s:?}"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lambda2Point {
    pub eps: f64,
    pub lambda2: f64,
    pub lambda2_predicted: f64,
    pub beta: f64,
}

impl Lambda2Point {
    pub fn ratio(&self) -> f64 {
        self.lambda2 / self.lambda2_predicted
    }
}

pub fn lambda2_cell(n_sites: usize, eps: f64, gamma: f64, omega: f64) -> Result<Lambda2Point> {
    let b = solve_breather(eps, gamma, omega, n_sites, &NewtonConfig::default())?;
    let rep = spectrum_only(&b)?;
    Ok(Lambda2Point {
        eps,
        lambda2: rep.lambda2,
        lambda2_predicted: lambda2_prediction(n_sites, eps, gamma, omega),
        beta: b.beta(),
    })
}

pub fn lambda2_sweep(
    n_sites: usize,
    gamma: f64,
    omega: f64,
    eps: &[f64],
    exec: Execution,
) -> Result<Vec<Lambda2Point>> {
    map_cells(eps, exec, |&e| lambda2_cell(n_sites, e, gamma, omega))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaCell {
    pub n_sites: usize,
    pub eps: f64,
    pub gamma: f64,
    pub beta: f64,
}

/// Solves `β*` on the full product grid `n × eps × gamma` at the given `ω`.
pub fn beta_grid(
    n_sites: &[usize],
    eps: &[f64],
    gamma: &[f64],
    omega: f64,
    exec: Execution,
) -> Result<Vec<BetaCell>> {
    let mut cells = Vec::new();
    for &n in n_sites {
        for &e in eps {
            for &g in gamma {
                cells.push((n, e, g));
            }
        }
    }
    map_cells(&cells, exec, |&(n, e, g)| {
        let b = solve_breather(e, g, omega, n, &NewtonConfig::default())?;
        Ok(BetaCell {
            n_sites: n,
            eps: e,
            gamma: g,
            beta: b.beta(),
        })
    })
    .into_iter()
    .collect()
}

/// Slope of `ln β*` against `ln |ε|` over the cells matching `n_sites`
/// and `gamma`, with one intercept per sign of `ε`.
pub fn beta_scaling_slope(cells: &[BetaCell], n_sites: usize, gamma: f64) -> Result<f64> {
    let sel: Vec<&BetaCell> = cells
        .iter()
        .filter(|c| c.n_sites == n_sites && c.gamma == gamma)
        .collect();
    if sel.iter().any(|c| !(c.beta > 0.0)) {
        return Err(Error::Domain("beta* must be positive to take logs".into()));
    }
    let mut slopes = Vec::new();
    for sign in [1.0, -1.0] {
        let pts: Vec<&&BetaCell> = sel.iter().filter(|c| c.eps.signum() == sign).collect();
        if pts.len() >= 2 {
            let x: Vec<f64> = pts.iter().map(|c| c.eps.abs().ln()).collect();
            let y: Vec<f64> = pts.iter().map(|c| c.beta.ln()).collect();
            slopes.push((fit_powers(&x, &y, &[0, 1])?.coeffs[1], pts.len()));
        }
    }
    if slopes.is_empty() {
        return Err(Error::InvalidInput(
            "need two eps values of one sign".into(),
        ));
    }
    let n: usize = slopes.iter().map(|s| s.1).sum();
    Ok(slopes.iter().map(|(s, k)| s * *k as f64).sum::<f64>() / n as f64)
}
