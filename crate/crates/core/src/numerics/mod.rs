//! Generic numerical kernels.

pub mod eigen;
pub mod fit;
pub mod lambert;
pub mod linalg;
pub mod newton;
pub mod ode;

pub use eigen::{eig_dense, eigen_order, eigenvalues, ComplexEigenvalue, EigenDecomposition};
pub use fit::{fit_powers, polyfit, PolyFit};
pub use lambert::{lambert_w_minus1, lambert_w_minus1_from_log};
pub use linalg::Matrix;
pub use newton::{newton_solve, NewtonConfig, NewtonReport};
pub use ode::{integrate, integrate_with, IntegratorConfig, Method, Solution};
