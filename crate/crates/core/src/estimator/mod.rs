//! Regularized FIR impulse-response estimation with empirical-Bayes tuning.

mod data;
mod tune;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub use data::DataSet;
pub use tune::{tune, Family, ParamScale, StartReport, TuneConfig, TuneResult};

use crate::error::{Error, Result};
use crate::kernel::{gram, range_grid, KernelSpec};
use crate::linalg::cholesky_or_jitter;

/// Number of taps used for estimation and for the fit metric.
pub const FIR_TAPS: usize = 100;

/// `N x n` Toeplitz regressor with `Phi[t][tau] = u(t - tau)` (1-indexed) and
/// unmeasured inputs `u(t <= 0)` taken as zero.
pub fn regressor_matrix(u: &[f64], n: usize) -> DMatrix<f64> {
    let big_n = u.len();
    DMatrix::from_fn(big_n, n, |i, j| if i > j { u[i - j - 1] } else { 0.0 })
}

/// The data-dependent part of the marginal likelihood, reduced once by a thin
/// QR factorization `Phi = Q R` so that each evaluation only needs an
/// `r x r` factorization, `r = min(N, n)`.
#[derive(Clone, Debug)]
pub struct MarginalLikelihood {
    r: DMatrix<f64>,
    z: DVector<f64>,
    residual: f64,
    n_obs: usize,
    taps: usize,
}

impl MarginalLikelihood {
    pub fn new(data: &DataSet, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("number of taps must be >= 1".into()));
        }
        let phi = regressor_matrix(&data.u, n);
        let y = DVector::from_column_slice(&data.y);
        let qr = phi.qr();
        let q = qr.q();
        let r = qr.r();
        let z = q.tr_mul(&y);
        let residual = (&y - &q * &z).norm_squared();
        Ok(MarginalLikelihood {
            r,
            z,
            residual,
            n_obs: data.len(),
            taps: n,
        })
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    fn reduced(&self, k: &DMatrix<f64>, sigma2: f64) -> Result<(DMatrix<f64>, nalgebra::Cholesky<f64, nalgebra::Dyn>, f64)> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::domain("sigma2", sigma2, "sigma2 > 0"));
        }
        if k.nrows() != self.taps || k.ncols() != self.taps {
            return Err(Error::Dimension(format!(
                "kernel matrix must be {0}x{0}",
                self.taps
            )));
        }
        let rk = &self.r * k;
        let mut s = &rk * self.r.transpose();
        for i in 0..s.nrows() {
            s[(i, i)] += sigma2;
        }
        let (chol, jitter) = cholesky_or_jitter(&s, "marginal likelihood covariance")?;
        Ok((rk, chol, jitter))
    }

    /// `Y^T Sigma^{-1} Y + log det Sigma` with `Sigma = Phi K Phi^T + sigma2 I`.
    pub fn nll(&self, k: &DMatrix<f64>, sigma2: f64) -> Result<f64> {
        let (_, chol, _) = self.reduced(k, sigma2)?;
        let w = chol.solve(&self.z);
        let rank = self.r.nrows();
        let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let v = self.z.dot(&w)
            + self.residual / sigma2
            + (self.n_obs - rank) as f64 * sigma2.ln()
            + log_det;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numerical {
                context: "marginal likelihood is not finite".into(),
                jitter: 0.0,
            })
        }
    }

    /// `K Phi^T (Phi K Phi^T + sigma2 I)^{-1} Y`.
    pub fn estimate(&self, k: &DMatrix<f64>, sigma2: f64) -> Result<DVector<f64>> {
        let (rk, chol, _) = self.reduced(k, sigma2)?;
        let w = chol.solve(&self.z);
        Ok(rk.tr_mul(&w))
    }
}

fn kernel_matrix(spec: &KernelSpec, n: usize) -> Result<DMatrix<f64>> {
    gram(spec, &range_grid(1, n))
}

/// Negative log marginal likelihood (up to constants) of the data under the
/// kernel prior on the first `n` taps.
pub fn neg_log_marglik(spec: &KernelSpec, sigma2: f64, data: &DataSet, n: usize) -> Result<f64> {
    MarginalLikelihood::new(data, n)?.nll(&kernel_matrix(spec, n)?, sigma2)
}

/// Regularized estimate of the first `n` taps.
pub fn estimate_impulse(spec: &KernelSpec, sigma2: f64, data: &DataSet, n: usize) -> Result<DVector<f64>> {
    MarginalLikelihood::new(data, n)?.estimate(&kernel_matrix(spec, n)?, sigma2)
}

/// `100 (1 - ||g0 - g_hat|| / ||g0 - mean(g0)||)` over at least 100 taps, with
/// the shorter vector zero-padded.
pub fn fit_metric(g0: &[f64], g_hat: &[f64]) -> Result<f64> {
    let len = FIR_TAPS.max(g0.len()).max(g_hat.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let mean = g0.iter().sum::<f64>() / len as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..len {
        num += (at(g0, i) - at(g_hat, i)).powi(2);
        den += (at(g0, i) - mean).powi(2);
    }
    if den == 0.0 {
        return Err(Error::UndefinedFit);
    }
    Ok(100.0 * (1.0 - (num / den).sqrt()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimationResult {
    pub family: String,
    pub theta: BTreeMap<String, f64>,
    pub sigma2: f64,
    pub nll: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<f64>,
    pub g_hat: Vec<f64>,
    pub seed: u64,
}

/// Tunes the family on the data, estimates `n` taps and scores them against
/// the true response when the data carries one.
pub fn estimate(family: &Family, data: &DataSet, n: usize, cfg: &TuneConfig) -> Result<EstimationResult> {
    let tuned = tune(family, data, n, cfg)?;
    let lik = MarginalLikelihood::new(data, n)?;
    let g_hat = lik.estimate(&kernel_matrix(&tuned.spec, n)?, tuned.sigma2)?;
    let g_hat: Vec<f64> = g_hat.iter().copied().collect();
    let fit = match &data.g0 {
        Some(g0) => Some(fit_metric(g0, &g_hat)?),
        None => None,
    };
    Ok(EstimationResult {
        family: family.name().to_string(),
        theta: tuned.theta.to_map(),
        sigma2: tuned.sigma2,
        nll: tuned.nll,
        fit,
        g_hat,
        seed: cfg.seed,
    })
}
