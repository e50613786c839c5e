//! Damped Newton iteration with step halving.

use super::linalg::{norm_inf, Lu, Matrix};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Max-norm target for the residual.
    pub residual_tol: f64,
    pub max_iters: usize,
    /// Smallest step fraction tried by the line search.
    pub damping_min: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            residual_tol: 1e-13,
            max_iters: 50,
            damping_min: 1.0 / 1024.0,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0)
            || self.max_iters == 0
            || !(self.damping_min > 0.0 && self.damping_min <= 1.0)
        {
            return Err(Error::InvalidInput(format!("bad newton config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Residual max-norm before the first step and after each step.
    pub history: Vec<f64>,
}

pub fn newton_solve<F, J>(
    mut residual: F,
    mut jac: J,
    x0: &[f64],
    cfg: &NewtonConfig,
) -> Result<NewtonReport>
where
    F: FnMut(&[f64]) -> Vec<f64>,
    J: FnMut(&[f64]) -> Matrix,
{
    cfg.validate()?;
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = residual(&x);
    if r.len() != n {
        return Err(Error::InvalidInput(format!(
            "residual has {} components for {} unknowns",
            r.len(),
            n
        )));
    }
    let mut rn = norm_inf(&r);
    let mut history = vec![rn];
    for it in 0..cfg.max_iters {
        if rn < cfg.residual_tol {
            return Ok(NewtonReport {
                x,
                residual_norm: rn,
                iterations: it,
                history,
            });
        }
        let jm = jac(&x);
        if jm.rows() != n || jm.cols() != n {
            return Err(Error::InvalidInput("jacobian shape mismatch".into()));
        }
        let dx = Lu::new(&jm)?.solve(&r);
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(xi, di)| xi - lambda * di).collect();
            let rt = residual(&trial);
            let rtn = norm_inf(&rt);
            if rtn < rn || lambda <= cfg.damping_min {
                x = trial;
                r = rt;
                rn = rtn;
                break;
            }
            lambda *= 0.5;
        }
        history.push(rn);
        if !rn.is_finite() {
            break;
        }
    }
    if rn < cfg.residual_tol {
        let iterations = history.len() - 1;
        return Ok(NewtonReport {
            x,
            residual_norm: rn,
            iterations,
            history,
        });
    }
    Err(Error::NoConvergence {
        iters: cfg.max_iters,
        residual: rn,
        best: x,
    })
}
