//! Least-squares polynomial fits.

use super::linalg::{solve, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    /// Monomial coefficients, constant term first.
    pub coeffs: Vec<f64>,
    pub r_squared: f64,
}

impl PolyFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

/// Fits `y ≈ Σ c_k x^k` for `k` in `powers` (e.g. `[1]` for a line through the
/// origin, `[0, 1, 2]` for a full quadratic). Unlisted powers are zero.
pub fn fit_powers(x: &[f64], y: &[f64], powers: &[u32]) -> Result<PolyFit> {
    if x.len() != y.len() || x.len() < powers.len() || powers.is_empty() {
        return Err(Error::InvalidInput(format!(
            "cannot fit {} powers to {} points",
            powers.len(),
            x.len()
        )));
    }
    // Scale x to unit size so the normal equations stay well conditioned.
    let s = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(s > 0.0) {
        return Err(Error::InvalidInput("fit abscissae are all zero".into()));
    }
    let m = powers.len();
    let mut a = Matrix::zeros(m, m);
    let mut b = vec![0.0; m];
    for (&xi, &yi) in x.iter().zip(y) {
        let phi: Vec<f64> = powers.iter().map(|&k| (xi / s).powi(k as i32)).collect();
        for r in 0..m {
            b[r] += phi[r] * yi;
            for c in 0..m {
                a[(r, c)] += phi[r] * phi[c];
            }
        }
    }
    let c = solve(&a, &b)?;
    let deg = *powers.iter().max().unwrap() as usize;
    let mut coeffs = vec![0.0; deg + 1];
    for (ci, &k) in c.iter().zip(powers) {
        coeffs[k as usize] = ci / s.powi(k as i32);
    }
    let fit = PolyFit {
        coeffs,
        r_squared: 0.0,
    };
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - fit.eval(*xi)).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(PolyFit { r_squared, ..fit })
}

pub fn polyfit(x: &[f64], y: &[f64], degree: u32) -> Result<PolyFit> {
    let powers: Vec<u32> = (0..=degree).collect();
    fit_powers(x, y, &powers)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_quadratic() {
        let x: Vec<f64> = (0..50).map(|k| k as f64 * 100.0).collect();
        let y: Vec<f64> = x.iter().map(|t| 3.0 - 2e-3 * t + 5e-7 * t * t).collect();
        let f = polyfit(&x, &y, 2).unwrap();
        assert!((f.coeffs[2] / 5e-7 - 1.0).abs() < 1e-9);
        assert!((f.coeffs[1] / -2e-3 - 1.0).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn line_through_origin() {
        let x = [1.0, 2.0, 3.0];
        let y = [2.0, 4.0, 6.0];
        let f = fit_powers(&x, &y, &[1]).unwrap();
        assert_eq!(f.coeffs.len(), 2);
        assert_eq!(f.coeffs[0], 0.0);
        assert!((f.coeffs[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn noisy_r_squared_below_one() {
        let x: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|t| t + if (*t as i32) % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let f = polyfit(&x, &y, 1).unwrap();
        assert!(f.r_squared < 0.99 && f.r_squared > 0.9);
    }

    #[test]
    fn rejects_underdetermined() {
        assert!(polyfit(&[1.0], &[1.0], 2).is_err());
    }
}
