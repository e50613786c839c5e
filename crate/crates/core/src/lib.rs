//! Damped and driven breathers of finite discrete NLS chains: Newton solver,
//! linear stability, metastable dynamics and the closed-form two-site theory.

pub mod breather;
pub mod error;
pub mod lattice;
pub mod metastability;
pub mod numerics;
pub mod stability;
pub mod sweep;
pub mod two_site;

pub use error::{Error, Result};
