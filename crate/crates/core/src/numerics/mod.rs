//! Shared kernels: torus quadrature, Hermitian inertia counting, bracketed
//! roots and extrapolation to ε → 0.

mod inertia;
mod quadrature;
mod roots;

pub use inertia::{
    count_below_periodic_band, count_eigenvalues_below, count_eigenvalues_below_real, HermitianMatrix,
};
pub use quadrature::{
    gauss_legendre, integrate_torus, integrate_torus_shifted, pairwise_sum, QuadratureResult,
    Scalar,
};
pub use roots::{bisect_root, extrapolate_to_zero, polynomial_roots, Extrapolated};
