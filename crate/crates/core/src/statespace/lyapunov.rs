use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::spectral_radius;

/// Solves `Q = A Q A^T + B B^T` for a Schur-stable `A`.
pub fn lyapunov_dt(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::Dimension(format!(
            "lyapunov needs square A and matching B, got {}x{} and {}",
            n,
            a.ncols(),
            b.len()
        )));
    }
    let radius = spectral_radius(a);
    if radius >= 1.0 {
        return Err(Error::NoSolution(format!(
            "discrete Lyapunov equation needs spectral radius < 1, got {radius}"
        )));
    }
    // vec(A Q A^T) = (A kron A) vec(Q) in column-major order
    let lhs = DMatrix::identity(n * n, n * n) - a.kronecker(a);
    let bb = b * b.transpose();
    let rhs = DVector::from_column_slice(bb.as_slice());
    let sol = lhs.lu().solve(&rhs).ok_or_else(|| {
        Error::NoSolution("discrete Lyapunov system is singular".into())
    })?;
    let q = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&q + q.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_case() {
        let q = lyapunov_dt(&DMatrix::from_element(1, 1, 0.5), &DVector::from_element(1, 1.0)).unwrap();
        assert!((q[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn satisfies_equation() {
        let a = DMatrix::from_row_slice(3, 3, &[0.5, 0.2, 0.0, -0.1, 0.3, 0.4, 0.0, 0.1, -0.6]);
        let b = DVector::from_vec(vec![1.0, -0.5, 0.3]);
        let q = lyapunov_dt(&a, &b).unwrap();
        let resid = &q - &a * &q * a.transpose() - &b * b.transpose();
        assert!(resid.abs().max() < 1e-12);
    }

    #[test]
    fn unstable_rejected() {
        let err = lyapunov_dt(&DMatrix::from_element(1, 1, 1.0), &DVector::from_element(1, 1.0));
        assert!(matches!(err, Err(Error::NoSolution(_))));
    }
}
