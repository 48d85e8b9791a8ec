//! Correlation matrices: validation, Cholesky factorization and repair.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest eigenvalue tolerated on input before a matrix counts as indefinite.
pub const PSD_TOL: f64 = -1e-10;
/// Eigenvalue floor enforced by [`nearest_correlation`].
pub const EIGEN_FLOOR: f64 = 1e-8;

/// Symmetric, unit-diagonal, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CorrelationMatrix(DMatrix<f64>);

impl CorrelationMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_symmetric_unit_diagonal(&m)?;
        let min_eig = min_eigenvalue(&m);
        if min_eig < PSD_TOL {
            return Err(Error::domain(format!(
                "correlation matrix is indefinite (smallest eigenvalue {min_eig:e})"
            )));
        }
        Ok(CorrelationMatrix(m))
    }

    pub fn identity(dim: usize) -> Self {
        CorrelationMatrix(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.0)
    }
}

impl TryFrom<Vec<Vec<f64>>> for CorrelationMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        CorrelationMatrix::new(matrix_from_rows(&rows)?)
    }
}

impl From<CorrelationMatrix> for Vec<Vec<f64>> {
    fn from(m: CorrelationMatrix) -> Self {
        matrix_to_rows(&m.0)
    }
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::domain("empty matrix"));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::domain(format!(
            "matrix is not square: row {i} has {} entries, expected {n}",
            r.len()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

pub(crate) fn check_symmetric_unit_diagonal(m: &DMatrix<f64>) -> Result<()> {
    check_symmetric(m)?;
    for i in 0..m.nrows() {
        if (m[(i, i)] - 1.0).abs() > SYMMETRY_TOL {
            return Err(Error::domain(format!(
                "diagonal entry {i} is {} (must be 1)",
                m[(i, i)]
            )));
        }
    }
    Ok(())
}

pub(crate) fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::domain("matrix must be square and nonempty"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("matrix has non-finite entries"));
    }
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(Error::domain(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
///
/// Only the lower triangle of `a` is read. Fails with the index of the first
/// nonpositive pivot.
pub fn cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::domain("cholesky needs a square matrix"));
    }
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: diag });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

pub fn cholesky(m: &CorrelationMatrix) -> Result<DMatrix<f64>> {
    cholesky_lower(m.as_matrix())
}

/// Solve `A x = b` given the lower Cholesky factor of `A`.
pub(crate) fn cholesky_solve(l: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// Inverse of `A` from its lower Cholesky factor.
pub(crate) fn cholesky_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut inv = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = cholesky_solve(l, &e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    inv
}

/// Outcome of [`nearest_correlation`].
#[derive(Debug, Clone)]
pub struct Repair {
    pub matrix: CorrelationMatrix,
    pub repaired: bool,
    pub frobenius_shift: f64,
    pub iterations: usize,
}

/// Nearest correlation matrix by Higham's alternating projections with
/// Dykstra's correction.
///
/// A matrix whose smallest eigenvalue already clears [`EIGEN_FLOOR`] is
/// returned unchanged. Otherwise projections alternate between the
/// eigenvalue-floored cone and the unit-diagonal subspace until successive
/// iterates move less than `tol` in Frobenius norm.
pub fn nearest_correlation(m: &DMatrix<f64>, tol: f64) -> Result<Repair> {
    check_symmetric(m)?;
    let n = m.nrows();
    for i in 0..n {
        if (m[(i, i)] - 1.0).abs() > SYMMETRY_TOL {
            return Err(Error::domain(format!("diagonal entry {i} is {} (must be 1)", m[(i, i)])));
        }
    }
    if min_eigenvalue(m) >= EIGEN_FLOOR {
        return Ok(Repair {
            matrix: CorrelationMatrix(m.clone()),
            repaired: false,
            frobenius_shift: 0.0,
            iterations: 0,
        });
    }

    const MAX_ITER: usize = 100_000;
    let mut y = m.clone();
    let mut correction = DMatrix::<f64>::zeros(n, n);
    let mut iterations = 0;
    loop {
        iterations += 1;
        let r = &y - &correction;
        let x = project_eigen_floor(&r, EIGEN_FLOOR);
        correction = &x - &r;
        let mut next = x;
        for i in 0..n {
            next[(i, i)] = 1.0;
        }
        let moved = (&next - &y).norm();
        y = next;
        if moved <= tol || iterations >= MAX_ITER {
            break;
        }
    }
    if iterations >= MAX_ITER {
        return Err(Error::Numerical(format!(
            "nearest correlation did not converge in {MAX_ITER} iterations"
        )));
    }

    // Final polish: floor the spectrum with a small margin and rescale to a
    // unit diagonal so the result clears the floor exactly.
    for _ in 0..50 {
        symmetrize(&mut y);
        if min_eigenvalue(&y) >= EIGEN_FLOOR {
            break;
        }
        let x = project_eigen_floor(&y, EIGEN_FLOOR * 1.01);
        let d: Vec<f64> = (0..n).map(|i| x[(i, i)].sqrt()).collect();
        y = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { x[(i, j)] / (d[i] * d[j]) });
    }
    if min_eigenvalue(&y) < EIGEN_FLOOR {
        return Err(Error::Numerical("nearest correlation failed to clear the eigenvalue floor".into()));
    }
    let frobenius_shift = (&y - m).norm();
    Ok(Repair {
        matrix: CorrelationMatrix(y),
        repaired: true,
        frobenius_shift,
        iterations,
    })
}

fn project_eigen_floor(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let clipped = eig.eigenvalues.map(|v| v.max(floor));
    let q = &eig.eigenvectors;
    let mut out = q * DMatrix::from_diagonal(&clipped) * q.transpose();
    symmetrize(&mut out);
    out
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    #[test]
    fn cholesky_of_identity_is_identity() {
        let l = cholesky(&CorrelationMatrix::identity(4)).unwrap();
        assert_eq!(l, DMatrix::identity(4, 4));
    }

    #[test]
    fn cholesky_two_by_two() {
        let m = CorrelationMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.8, 0.8, 1.0])).unwrap();
        let l = cholesky(&m).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.8, 0.6]);
        assert!(max_abs(&(&l - expected)) < 1e-15);
    }

    #[test]
    fn cholesky_names_failing_pivot() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.5, 1.0, 0.9, 0.0, 0.9, 0.5]);
        match cholesky_lower(&m) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 2),
            other => panic!("expected pivot failure, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_solve_and_inverse() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0]);
        let l = cholesky_lower(&a).unwrap();
        let x = cholesky_solve(&l, &[1.0, 2.0, 3.0]);
        let back = &a * nalgebra::DVector::from_vec(x);
        for (i, b) in [1.0, 2.0, 3.0].iter().enumerate() {
            assert!((back[i] - b).abs() < 1e-12);
        }
        let inv = cholesky_inverse(&l);
        assert!(max_abs(&(&a * inv - DMatrix::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn identity_and_pd_pass_through() {
        let id = DMatrix::<f64>::identity(3, 3);
        let r = nearest_correlation(&id, 1e-12).unwrap();
        assert!(!r.repaired);
        assert_eq!(r.matrix.as_matrix(), &id);

        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
        let r = nearest_correlation(&m, 1e-12).unwrap();
        assert!(!r.repaired);
        assert_eq!(r.matrix.as_matrix(), &m);
        assert_eq!(r.frobenius_shift, 0.0);
    }

    #[test]
    fn indefinite_matrix_is_repaired() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, 0.9, 0.9, 1.0, -0.9, 0.9, -0.9, 1.0]);
        assert!(min_eigenvalue(&m) < 0.0);
        let r = nearest_correlation(&m, 1e-12).unwrap();
        assert!(r.repaired);
        assert!(r.frobenius_shift > 0.0);
        let out = r.matrix.as_matrix();
        assert!(min_eigenvalue(out) >= EIGEN_FLOOR);
        for i in 0..3 {
            assert_eq!(out[(i, i)], 1.0);
        }
        let l = cholesky(&r.matrix).unwrap();
        assert!(max_abs(&(&l * l.transpose() - out)) <= 1e-12);
    }

    #[test]
    fn repair_is_idempotent() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, 0.9, 0.9, 1.0, -0.9, 0.9, -0.9, 1.0]);
        let once = nearest_correlation(&m, 1e-12).unwrap().matrix;
        let twice = nearest_correlation(once.as_matrix(), 1e-12).unwrap();
        assert!(!twice.repaired);
        assert!(max_abs(&(twice.matrix.as_matrix() - once.as_matrix())) <= 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 1.0]);
        assert!(nearest_correlation(&asym, 1e-10).is_err());
        assert!(CorrelationMatrix::new(asym).is_err());
        let diag = DMatrix::from_row_slice(2, 2, &[2.0, 0.2, 0.2, 1.0]);
        assert!(CorrelationMatrix::new(diag).is_err());
        assert!(matrix_from_rows(&[vec![1.0, 0.0], vec![0.0]]).is_err());
    }
}
