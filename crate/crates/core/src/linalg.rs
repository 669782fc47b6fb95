//! Small dense linear-algebra helpers shared by the kernel, estimator and
//! analysis modules.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative jitter levels tried by [`cholesky_jittered`], as multiples of the
/// largest diagonal entry.
pub const JITTER_LADDER: [f64; 7] = [1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Cholesky factor of `k + jitter * I` for the smallest jitter on the ladder
/// that succeeds. Returns the factor and the absolute jitter that was added.
pub fn cholesky_jittered(k: &DMatrix<f64>, context: &str) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let scale = max_abs_diag(k);
    let mut last = 0.0;
    for rel in JITTER_LADDER {
        let jitter = rel * scale;
        last = jitter;
        let mut kj = k.clone();
        for i in 0..kj.nrows() {
            kj[(i, i)] += jitter;
        }
        if let Some(ch) = kj.cholesky() {
            return Ok((ch, jitter));
        }
    }
    Err(Error::Numerical {
        context: context.to_string(),
        jitter: last,
    })
}

/// Plain Cholesky first, then the jitter ladder.
pub fn cholesky_or_jitter(k: &DMatrix<f64>, context: &str) -> Result<(Cholesky<f64, Dyn>, f64)> {
    match k.clone().cholesky() {
        Some(ch) => Ok((ch, 0.0)),
        None => cholesky_jittered(k, context),
    }
}

pub fn max_abs_diag(k: &DMatrix<f64>) -> f64 {
    k.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn max_abs(k: &DMatrix<f64>) -> f64 {
    k.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(k: &DMatrix<f64>) -> f64 {
    if k.nrows() == 0 {
        return 0.0;
    }
    let sym = (k + k.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v))
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// Symmetric square root factor `L` with `L Lᵀ = Q` for a PSD `Q`; negative
/// eigenvalues from round-off are clamped to zero.
pub fn psd_sqrt(q: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (q + q.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut v = eig.eigenvectors.clone();
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        v.column_mut(j).scale_mut(s);
    }
    v
}

/// Inverse of a symmetric positive (semi)definite matrix via Cholesky,
/// escalating jitter when the plain factorization fails. Returns the inverse
/// and the jitter used.
pub fn spd_inverse(k: &DMatrix<f64>, context: &str) -> Result<(DMatrix<f64>, f64)> {
    let (ch, jitter) = cholesky_or_jitter(k, context)?;
    Ok((ch.inverse(), jitter))
}
