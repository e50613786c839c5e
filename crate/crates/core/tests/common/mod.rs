#![allow(dead_code)]

use breather_core::lattice::{CartesianState, LatticeParams};
use proptest::prelude::*;

pub fn params() -> impl Strategy<Value = LatticeParams> {
    (
        2usize..7,
        -0.3f64..0.3,
        0.0f64..0.05,
        0.0f64..0.05,
        0.5f64..1.5,
    )
        .prop_map(|(n, eps, gamma, beta, omega)| {
            LatticeParams::new(n, eps, gamma, beta, omega).unwrap()
        })
}

/// Site amplitudes bounded away from zero, with arbitrary phases.
pub fn state(n: usize) -> impl Strategy<Value = CartesianState> {
    (
        prop::collection::vec(0.05f64..1.5, n),
        prop::collection::vec(-3.2f64..3.2, n),
    )
        .prop_map(|(r, phi)| {
            let p = r.iter().zip(&phi).map(|(r, f)| r * f.cos()).collect();
            let q = r.iter().zip(&phi).map(|(r, f)| r * f.sin()).collect();
            CartesianState::new(p, q).unwrap()
        })
}

pub fn params_and_state() -> impl Strategy<Value = (LatticeParams, CartesianState)> {
    params().prop_flat_map(|p| (Just(p), state(p.n_sites)))
}

pub fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}
