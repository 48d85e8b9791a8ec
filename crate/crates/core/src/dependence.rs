//! Gaussian-copula coupling of the monthly attack indicators.
//!
//! `Z = L·u` with `L` the Cholesky factor of the similarity matrix Ψ, and
//! `N_i = 1` iff `Z_i > Φ⁻¹(1 − π_i)`. High latent values mean "attacked", so
//! positive entries of Ψ give positively correlated events.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{
    check_symmetric_unit_diagonal, cholesky, matrix_from_rows, nearest_correlation, normal_quantile,
    standard_normal, CorrelationMatrix, RngStream,
};

/// Convergence tolerance handed to the correlation repair.
pub const REPAIR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CopulaSpec {
    pub psi: CorrelationMatrix,
    /// Lower-triangular factor with `chol·cholᵀ = psi`.
    pub chol: DMatrix<f64>,
    pub repaired: bool,
    /// Frobenius distance between the input and `psi`; zero unless repaired.
    pub frobenius_shift: f64,
}

impl CopulaSpec {
    pub fn dim(&self) -> usize {
        self.chol.nrows()
    }

    pub fn independent(dim: usize) -> Self {
        CopulaSpec {
            psi: CorrelationMatrix::identity(dim),
            chol: DMatrix::identity(dim, dim),
            repaired: false,
            frobenius_shift: 0.0,
        }
    }
}

/// Validates the similarity matrix, repairs it to the nearest correlation
/// matrix if it is not safely positive definite, and factorizes it.
pub fn build_copula(similarity: &[Vec<f64>]) -> Result<CopulaSpec> {
    build_copula_from_matrix(&matrix_from_rows(similarity)?)
}

pub fn build_copula_from_matrix(m: &DMatrix<f64>) -> Result<CopulaSpec> {
    check_symmetric_unit_diagonal(m)?;
    if let Some(v) = m.iter().find(|v| v.abs() > 1.0) {
        return Err(Error::domain(format!("similarity entry {v} lies outside [-1, 1]")));
    }
    let repair = nearest_correlation(m, REPAIR_TOL)?;
    let chol = cholesky(&repair.matrix)?;
    Ok(CopulaSpec {
        psi: repair.matrix,
        chol,
        repaired: repair.repaired,
        frobenius_shift: repair.frobenius_shift,
    })
}

fn check_probabilities(probabilities: &[f64], dim: usize) -> Result<()> {
    if probabilities.len() != dim {
        return Err(Error::domain(format!(
            "{} probabilities for a copula of dimension {dim}",
            probabilities.len()
        )));
    }
    if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::domain(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// Latent threshold above which protocol `i` is attacked. Computed as
/// `−Φ⁻¹(π)`, which equals `Φ⁻¹(1 − π)` without cancellation for small π.
fn threshold(p: f64) -> f64 {
    if p <= 0.0 {
        f64::INFINITY
    } else if p >= 1.0 {
        f64::NEG_INFINITY
    } else {
        -normal_quantile(p)
    }
}

/// Draws correlated attack indicators for fixed marginal probabilities.
#[derive(Debug, Clone)]
pub struct CopulaSampler<'a> {
    chol: &'a DMatrix<f64>,
    thresholds: Vec<f64>,
    latent: Vec<f64>,
}

impl<'a> CopulaSampler<'a> {
    pub fn new(probabilities: &[f64], spec: &'a CopulaSpec) -> Result<Self> {
        check_probabilities(probabilities, spec.dim())?;
        Ok(CopulaSampler {
            chol: &spec.chol,
            thresholds: probabilities.iter().map(|&p| threshold(p)).collect(),
            latent: vec![0.0; spec.dim()],
        })
    }

    /// Fills `out` with one joint draw of the indicators.
    pub fn draw_into<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [bool]) {
        let d = self.thresholds.len();
        for u in self.latent.iter_mut() {
            *u = standard_normal(rng);
        }
        for i in 0..d {
            let mut z = 0.0;
            for k in 0..=i {
                z += self.chol[(i, k)] * self.latent[k];
            }
            out[i] = z > self.thresholds[i];
        }
    }
}

/// One joint draw of the attack indicators.
pub fn sample_frequencies<R: Rng + ?Sized>(probabilities: &[f64], spec: &CopulaSpec, rng: &mut R) -> Result<Vec<bool>> {
    let mut sampler = CopulaSampler::new(probabilities, spec)?;
    let mut out = vec![false; spec.dim()];
    sampler.draw_into(rng, &mut out);
    Ok(out)
}

/// Monte Carlo estimate of `P(N₁ ≤ n₁, …, N_d ≤ n_d)` and its standard error.
/// `bounds[i]` is `n_i ∈ {0, 1}` encoded as a bool.
pub fn joint_cdf_estimate(
    probabilities: &[f64],
    spec: &CopulaSpec,
    bounds: &[bool],
    n_samples: usize,
    rng: RngStream,
) -> Result<(f64, f64)> {
    check_probabilities(probabilities, spec.dim())?;
    if bounds.len() != spec.dim() {
        return Err(Error::domain(format!("{} bounds for a copula of dimension {}", bounds.len(), spec.dim())));
    }
    if bounds.iter().all(|&b| b) {
        return Ok((1.0, 0.0));
    }
    if n_samples == 0 {
        return Err(Error::domain("joint cdf estimate needs at least one sample"));
    }
    let mut sampler = CopulaSampler::new(probabilities, spec)?;
    let mut rng = rng.rng();
    let mut draw = vec![false; spec.dim()];
    let mut hits = 0usize;
    for _ in 0..n_samples {
        sampler.draw_into(&mut rng, &mut draw);
        if draw.iter().zip(bounds).all(|(&n, &b)| b || !n) {
            hits += 1;
        }
    }
    let p = hits as f64 / n_samples as f64;
    Ok((p, (p * (1.0 - p) / n_samples as f64).sqrt()))
}
