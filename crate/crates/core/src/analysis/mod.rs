//! Numerical checks of the structural properties of the kernel families:
//! stability, Markov structure, banded Gram inverses and variance identities.

mod verify;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use verify::{run_verification, CheckResult, VerificationReport, VerifyOptions};

use crate::error::{Error, Result};
use crate::kernel::{gram, range_grid, DecayEnvelope, KernelSpec};
use crate::linalg::spd_inverse;
use crate::statespace::{SiTable, StateSpaceModel};

/// Ratio below which the last two partial sums are taken as converged.
pub const CONVERGED_RATIO: f64 = 1.0 + 1e-3;
/// Ratio above which the partial sums are taken as diverging.
pub const DIVERGING_RATIO: f64 = 1.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converging,
    Diverging,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `(T, S_T)` at each checkpoint
    pub partial_sums: Vec<(usize, f64)>,
    pub verdict: Verdict,
    /// `S_T` at the last checkpoint over `S_T` at the one before
    pub tail_ratio: f64,
}

/// Fast pointwise evaluation for long horizons.
enum Evaluator<'a> {
    Amls { env: Vec<f64>, corr: Vec<f64> },
    Si(SiTable),
    Direct(&'a KernelSpec),
}

impl<'a> Evaluator<'a> {
    fn new(spec: &'a KernelSpec, t_max: usize) -> Self {
        if let KernelSpec::SiStateSpace(m) = spec {
            return Evaluator::Si(SiTable::new(m, t_max));
        }
        if spec.envelope_at(0).is_some() && spec.corr_at(0).is_some() {
            let env = (0..=t_max).map(|t| spec.envelope_at(t).unwrap_or(0.0)).collect();
            let corr = (0..=t_max).map(|r| spec.corr_at(r).unwrap_or(0.0)).collect();
            return Evaluator::Amls { env, corr };
        }
        Evaluator::Direct(spec)
    }

    fn eval(&self, t: usize, s: usize) -> f64 {
        match self {
            Evaluator::Amls { env, corr } => env[t] * env[s] * corr[t.abs_diff(s)],
            Evaluator::Si(table) => table.eval(t, s),
            Evaluator::Direct(spec) => spec.eval_unchecked(t, s),
        }
    }
}

fn checkpoints(t_max: usize) -> Vec<usize> {
    let mut cps = Vec::new();
    let mut t = 10;
    while t < t_max {
        cps.push(t);
        t *= 2;
    }
    cps.push(t_max);
    cps
}

/// Truncated sums `S_T = sum_{s=1..T} |sum_{t=1..T} k(t, s)|` at geometric
/// checkpoints `10, 20, 40, ...` and `t_max`.
pub fn stability_partial_sums(spec: &KernelSpec, t_max: usize) -> Result<StabilityReport> {
    if t_max < 10 {
        return Err(Error::InvalidArgument(format!("t_max must be >= 10, got {t_max}")));
    }
    spec.validate()?;
    let k = Evaluator::new(spec, t_max);
    // col[s] = sum_{t=1..T} k(t, s), index 0 unused
    let mut col = vec![0.0; t_max + 1];
    let mut done = 0;
    let mut partial_sums = Vec::new();
    for cp in checkpoints(t_max) {
        for t in done + 1..=cp {
            for s in 1..t {
                let v = k.eval(t, s);
                col[s] += v;
                col[t] += v;
            }
            col[t] += k.eval(t, t);
        }
        done = cp;
        let total: f64 = col[1..=cp].iter().map(|v| v.abs()).sum();
        partial_sums.push((cp, total));
    }
    let n = partial_sums.len();
    let last = partial_sums[n - 1].1;
    let prev = partial_sums[n - 2].1;
    let tail_ratio = if prev == 0.0 {
        if last == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        last / prev
    };
    let verdict = if tail_ratio < CONVERGED_RATIO {
        Verdict::Converging
    } else if tail_ratio <= DIVERGING_RATIO {
        Verdict::Inconclusive
    } else {
        Verdict::Diverging
    };
    Ok(StabilityReport {
        partial_sums,
        verdict,
        tail_ratio,
    })
}

/// Whether the envelope is summable, which makes every AMLS kernel built on
/// it stable.
pub fn amls_stability_check(env: &DecayEnvelope) -> bool {
    env.validate().is_ok() && env.rate() < 1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityClause {
    /// Spectral radius of `A` is not below 1.
    SpectralRadius,
    /// Envelope decays slower than the square root of the slowest mode.
    EnvelopeDecay,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "clause")]
pub enum SiStability {
    Satisfied,
    Violated(StabilityClause),
    /// `A` has repeated eigenvalues; the sufficient condition does not apply.
    Inapplicable,
}

/// Minimum pairwise distance for eigenvalues to count as distinct.
pub const EIGEN_GAP: f64 = 1e-8;

/// Sufficient stability condition for SI kernels: distinct eigenvalues,
/// spectral radius `|l| < 1` and an envelope decaying at least like `|l|^{t/2}`.
pub fn si_stability_check(m: &StateSpaceModel) -> SiStability {
    let eig: Vec<Complex64> = m.a.complex_eigenvalues().iter().copied().collect();
    for i in 0..eig.len() {
        for j in i + 1..eig.len() {
            if (eig[i] - eig[j]).norm() <= EIGEN_GAP {
                return SiStability::Inapplicable;
            }
        }
    }
    let radius = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if radius >= 1.0 {
        return SiStability::Violated(StabilityClause::SpectralRadius);
    }
    if m.envelope.rate() > radius.sqrt() {
        return SiStability::Violated(StabilityClause::EnvelopeDecay);
    }
    SiStability::Satisfied
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandReport {
    pub bandwidth_claimed: usize,
    pub max_offband: f64,
    /// `max |K^{-1}|`
    pub scale: f64,
    pub pass: bool,
    pub jitter: f64,
}

/// Default relative tolerance for treating an entry of `K^{-1}` as zero.
pub const BAND_TOL: f64 = 1e-8;

fn max_offband(kinv: &DMatrix<f64>, bandwidth: usize) -> f64 {
    let n = kinv.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i.abs_diff(j) > bandwidth {
                worst = worst.max(kinv[(i, j)].abs());
            }
        }
    }
    worst
}

/// Whether `K^{-1}` vanishes (relative to its largest entry) outside the band
/// `|i - j| <= bandwidth`.
pub fn banded_inverse_check(k: &DMatrix<f64>, bandwidth: usize, tol: f64) -> Result<BandReport> {
    let (kinv, jitter) = spd_inverse(k, "kernel matrix inverse")?;
    let scale = kinv.abs().max();
    let off = max_offband(&kinv, bandwidth);
    Ok(BandReport {
        bandwidth_claimed: bandwidth,
        max_offband: off,
        scale,
        pass: off <= tol * scale,
        jitter,
    })
}

/// Smallest bandwidth outside of which every entry of `kinv` is at most
/// `tol` times its largest entry.
pub fn measured_bandwidth(kinv: &DMatrix<f64>, tol: f64) -> usize {
    let n = kinv.nrows();
    let scale = kinv.abs().max();
    (0..n)
        .find(|&b| max_offband(kinv, b) <= tol * scale)
        .unwrap_or(n.saturating_sub(1))
}

/// Largest deviation of `Var(g(t) - lambda^{1/2} rho g(t-1))`, computed from the
/// DC Gram matrix, from `c (1 - rho^2) lambda^t` over `t = 1..=s_max`.
pub fn maxent_dc_variance(c: f64, lambda: f64, rho: f64, s_max: usize) -> Result<f64> {
    let spec = KernelSpec::dc(c, lambda, rho)?;
    let k = gram(&spec, &range_grid(0, s_max))?;
    let a = lambda.sqrt() * rho;
    let mut worst: f64 = 0.0;
    for t in 1..=s_max {
        let v = k[(t, t)] - 2.0 * a * k[(t, t - 1)] + a * a * k[(t - 1, t - 1)];
        let expect = c * (1.0 - rho * rho) * lambda.powi(t as i32);
        worst = worst.max((v - expect).abs());
    }
    Ok(worst)
}

/// `Cov(g(t+1) - coef g(t), g(s)) = k(t+1, s) - coef k(t, s)`.
pub fn markov_residual(spec: &KernelSpec, coef: f64, t: usize, s: usize) -> Result<f64> {
    if s > t {
        return Err(Error::InvalidArgument(format!("need s <= t, got s={s}, t={t}")));
    }
    Ok(spec.eval(t + 1, s)? - coef * spec.eval(t, s)?)
}

/// First-order Markov residual of the DC kernel with coefficient `lambda^{1/2} rho`.
pub fn markov_residual_check(c: f64, lambda: f64, rho: f64, t: usize, s: usize) -> Result<f64> {
    markov_residual(&KernelSpec::dc(c, lambda, rho)?, lambda.sqrt() * rho, t, s)
}
