//! Lower real branch W₋₁ of the Lambert W function.

use crate::error::{Error, Result};
use std::f64::consts::E;

const INV_E: f64 = 1.0 / E;

/// `w ≤ -1` with `w eʷ = x`, for `-1/e ≤ x < 0`.
pub fn lambert_w_minus1(x: f64) -> Result<f64> {
    if !(-INV_E..0.0).contains(&x) {
        // Allow the branch point to be hit through rounding.
        if x < -INV_E && x > -INV_E - 1e-15 {
            return Ok(-1.0);
        }
        return Err(Error::Domain(format!(
            "lambert_w_minus1 needs -1/e <= x < 0, got {x}"
        )));
    }
    if x == -INV_E {
        return Ok(-1.0);
    }
    let mut w = if x < -0.25 {
        // Series about the branch point in p = -sqrt(2(ex + 1)).
        let p = -(2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        let l1 = (-x).ln();
        l1 - (-l1).ln()
    };
    for _ in 0..50 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let wn = w - step;
        let done = (wn - w).abs() <= 4.0 * f64::EPSILON * wn.abs();
        w = wn.min(-1.0);
        if done {
            break;
        }
    }
    Ok(w)
}

/// W₋₁ evaluated from `ln(-x)`, for arguments too small to represent. Solves
/// `w - ln(-w) = ln(-x)` by Newton's method.
pub fn lambert_w_minus1_from_log(log_neg_x: f64) -> Result<f64> {
    if !(log_neg_x <= -1.0) {
        return Err(Error::Domain(format!(
            "log(-x) must be <= -1, got {log_neg_x}"
        )));
    }
    if log_neg_x > -700.0 {
        return lambert_w_minus1(-log_neg_x.exp());
    }
    let mut w = log_neg_x - (-log_neg_x).ln();
    for _ in 0..50 {
        let g = w - (-w).ln() - log_neg_x;
        let step = g / (1.0 - 1.0 / w);
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w.abs() {
            break;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resid(x: f64) -> f64 {
        let w = lambert_w_minus1(x).unwrap();
        assert!(w <= -1.0);
        (w * w.exp() - x).abs()
    }

    #[test]
    fn branch_point() {
        assert_eq!(lambert_w_minus1(-INV_E).unwrap(), -1.0);
    }

    #[test]
    fn known_values() {
        assert!(resid(-0.1) <= 1e-14 * 0.1);
        let w = lambert_w_minus1(-1e-6).unwrap();
        assert!((w + 16.626_508_901_372_475).abs() < 1e-12, "{w}");
        assert!(resid(-1e-6) <= 1e-14 * 1e-6);
    }

    #[test]
    fn log_spaced_residuals() {
        for k in 0..1000 {
            // x from just above -1/e down to -1e-300
            let t = k as f64 / 999.0;
            let x = -INV_E * (1e-300f64 / INV_E).powf(t) * (1.0 - 1e-12 * (1.0 - t));
            let r = resid(x);
            assert!(r <= 1e-13 * x.abs().max(1e-30), "x={x:e} r={r:e}");
        }
    }

    #[test]
    fn near_branch_point() {
        for d in [1e-16, 1e-12, 1e-8, 1e-4] {
            let x = -INV_E + d;
            assert!(resid(x) < 1e-15);
        }
    }

    #[test]
    fn domain() {
        assert!(lambert_w_minus1(0.0).is_err());
        assert!(lambert_w_minus1(-0.5).is_err());
        assert!(lambert_w_minus1(0.1).is_err());
    }

    #[test]
    fn log_form_matches() {
        let w = lambert_w_minus1_from_log((1e-6f64).ln()).unwrap();
        assert!((w - lambert_w_minus1(-1e-6).unwrap()).abs() < 1e-12);
        let w = lambert_w_minus1_from_log(-5000.0).unwrap();
        assert!((w - (-w).ln() + 5000.0).abs() < 1e-10);
    }
}
