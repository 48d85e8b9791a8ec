//! Numerical kernel shared by the models: normal distribution functions,
//! chi-square tails, Cholesky factorization, correlation repair and random
//! streams.

mod linalg;
mod normal;
mod rng;
mod special;

pub use linalg::{
    cholesky, cholesky_lower, matrix_from_rows, matrix_to_rows, min_eigenvalue,
    nearest_correlation, CorrelationMatrix, Repair, EIGEN_FLOOR, PSD_TOL, SYMMETRY_TOL,
};
pub(crate) use linalg::{check_symmetric_unit_diagonal, cholesky_inverse, cholesky_solve};
pub use normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile};
pub(crate) use normal::{cdf as normal_cdf, quantile as normal_quantile};
pub use rng::{mvn_sample, mvn_sample_into, standard_normal, RngStream};
pub use special::{chi_square_sf, gamma_q, ln_gamma};

/// Inverse logit, evaluated without overflow for large |eta|.
pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
