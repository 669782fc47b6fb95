//! Kernel families for impulse-response regularization: the stable-spline
//! (SS), diagonal/correlated (DC) and tuned/correlated (TC) kernels, general
//! amplitude-modulated locally stationary (AMLS) kernels, the two damped
//! oscillation AMLS kernels, the second-order simulation-induced kernel, SI
//! kernels from an arbitrary state-space model, and the rank-1 oracle kernel.
//!
//! Time indices are nonnegative integers. Estimation grids start at 1.

mod envelope;
mod json;
mod sample;
mod stationary;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use envelope::DecayEnvelope;
pub use json::KernelSpecJson;
pub use sample::{sample_gp, GpSamples};
pub use stationary::{bessel_normalization, MaternOrder, StationaryCorr};

use crate::error::{Error, Result};
use crate::statespace::{si2od_closed, SecondOrderNominal, SiTable, StateSpaceModel};
use stationary::powi_usize;

/// Largest admissible decay rate `lambda`.
pub const LAMBDA_MAX: f64 = 1.0 - 1e-6;
/// Largest admissible damping ratio for the second-order nominal model.
pub const XI_MAX: f64 = 1.0 - 1e-3;
/// Positivity offset inside the oscillating envelope of the AMLS-2Od kernel.
pub const AMLS2OD_EPS: f64 = 1e-6;

/// Ordered hyperparameter vector with its box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub values: Vec<f64>,
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl HyperParams {
    pub fn new(names: &[&str], values: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = names.len();
        if values.len() != n || lower.len() != n || upper.len() != n {
            return Err(Error::Dimension(format!(
                "hyperparameter vectors must have {n} entries"
            )));
        }
        for i in 0..n {
            if !(lower[i] <= values[i] && values[i] <= upper[i]) {
                return Err(Error::domain(
                    names[i],
                    values[i],
                    format!("{} <= {} <= {}", lower[i], names[i], upper[i]),
                ));
            }
        }
        Ok(HyperParams {
            values,
            names: names.iter().map(|s| s.to_string()).collect(),
            lower,
            upper,
        })
    }

    pub fn empty() -> Self {
        HyperParams {
            values: vec![],
            names: vec![],
            lower: vec![],
            upper: vec![],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    pub fn to_map(&self) -> std::collections::BTreeMap<String, f64> {
        self.names
            .iter()
            .cloned()
            .zip(self.values.iter().copied())
            .collect()
    }
}

/// One kernel family together with its hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpecJson", into = "KernelSpecJson")]
pub enum KernelSpec {
    /// Stable spline, `c lambda^{3(t+s)} (lambda^{|t-s|}/2 - lambda^{3|t-s|}/6)`.
    Ss { c: f64, lambda: f64 },
    /// Diagonal/correlated, `c lambda^{(t+s)/2} rho^{|t-s|}`.
    Dc { c: f64, lambda: f64, rho: f64 },
    /// Tuned/correlated, `c min(lambda^t, lambda^s)`; DC with `rho = lambda^{1/2}`.
    Tc { c: f64, lambda: f64 },
    /// `b(t) b(s) k^c(t - s)`
    Amls {
        envelope: DecayEnvelope,
        corr: StationaryCorr,
    },
    /// `c lambda^{t+s} cos(alpha |t-s|)`
    Amls2Os { c: f64, lambda: f64, alpha: f64 },
    /// `c lambda^{t+s} (cos(omega t)+1+eps)(cos(omega s)+1+eps) rho^{|t-s|}`
    Amls2Od {
        c: f64,
        lambda: f64,
        omega: f64,
        rho: f64,
    },
    /// Scaled closed-form SI kernel of a damped second-order nominal model.
    Si2Od { c: f64, nominal: SecondOrderNominal },
    /// SI kernel of an arbitrary discrete-time state-space model.
    SiStateSpace(Arc<StateSpaceModel>),
    /// Rank-1 kernel `g0(t) g0(s)`; `g0[i]` is the response at time `i + 1`.
    Oracle(Arc<Vec<f64>>),
    /// A bare stationary correlation (not stable; for illustration and tests).
    Stationary(StationaryCorr),
}

fn check(name: &str, v: f64, ok: bool, bound: &str) -> Result<()> {
    if ok && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, v, bound))
    }
}

fn check_c(c: f64) -> Result<()> {
    check("c", c, c >= 0.0, "c >= 0")
}

fn check_lambda(lambda: f64) -> Result<()> {
    check(
        "lambda",
        lambda,
        (0.0..=LAMBDA_MAX).contains(&lambda),
        "0 <= lambda <= 1 - 1e-6",
    )
}

fn check_rho(rho: f64) -> Result<()> {
    check("rho", rho, rho.abs() <= 1.0, "|rho| <= 1")
}

impl KernelSpec {
    pub fn ss(c: f64, lambda: f64) -> Result<Self> {
        Self::checked(KernelSpec::Ss { c, lambda })
    }

    pub fn dc(c: f64, lambda: f64, rho: f64) -> Result<Self> {
        Self::checked(KernelSpec::Dc { c, lambda, rho })
    }

    pub fn tc(c: f64, lambda: f64) -> Result<Self> {
        Self::checked(KernelSpec::Tc { c, lambda })
    }

    pub fn amls(envelope: DecayEnvelope, corr: StationaryCorr) -> Result<Self> {
        Self::checked(KernelSpec::Amls { envelope, corr })
    }

    pub fn amls2os(c: f64, lambda: f64, alpha: f64) -> Result<Self> {
        Self::checked(KernelSpec::Amls2Os { c, lambda, alpha })
    }

    pub fn amls2od(c: f64, lambda: f64, omega: f64, rho: f64) -> Result<Self> {
        Self::checked(KernelSpec::Amls2Od {
            c,
            lambda,
            omega,
            rho,
        })
    }

    pub fn si2od(c: f64, omega0: f64, xi: f64, gamma: f64) -> Result<Self> {
        Self::checked(KernelSpec::Si2Od {
            c,
            nominal: SecondOrderNominal::new(omega0, xi, gamma)?,
        })
    }

    pub fn si_state_space(model: StateSpaceModel) -> Self {
        KernelSpec::SiStateSpace(Arc::new(model))
    }

    pub fn oracle(g0: Vec<f64>) -> Result<Self> {
        Self::checked(KernelSpec::Oracle(Arc::new(g0)))
    }

    fn checked(spec: KernelSpec) -> Result<Self> {
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Ss { c, lambda } | KernelSpec::Tc { c, lambda } => {
                check_c(*c)?;
                check_lambda(*lambda)
            }
            KernelSpec::Dc { c, lambda, rho } => {
                check_c(*c)?;
                check_lambda(*lambda)?;
                check_rho(*rho)
            }
            KernelSpec::Amls { envelope, corr } => {
                envelope.validate()?;
                corr.validate()
            }
            KernelSpec::Amls2Os { c, lambda, alpha } => {
                check_c(*c)?;
                check_lambda(*lambda)?;
                check(
                    "alpha",
                    *alpha,
                    (0.0..=std::f64::consts::PI).contains(alpha),
                    "0 <= alpha <= pi",
                )
            }
            KernelSpec::Amls2Od {
                c,
                lambda,
                omega,
                rho,
            } => {
                check_c(*c)?;
                check_lambda(*lambda)?;
                check("omega", *omega, *omega >= 0.0, "omega >= 0")?;
                check_rho(*rho)
            }
            KernelSpec::Si2Od { c, nominal } => {
                check_c(*c)?;
                nominal.validate()
            }
            KernelSpec::SiStateSpace(m) => m.validate(),
            KernelSpec::Oracle(g0) => {
                if let Some(bad) = g0.iter().find(|v| !v.is_finite()) {
                    return Err(Error::domain("g0", *bad, "finite"));
                }
                Ok(())
            }
            KernelSpec::Stationary(corr) => corr.validate(),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            KernelSpec::Ss { .. } => "ss",
            KernelSpec::Dc { .. } => "dc",
            KernelSpec::Tc { .. } => "tc",
            KernelSpec::Amls { .. } => "amls",
            KernelSpec::Amls2Os { .. } => "amls2os",
            KernelSpec::Amls2Od { .. } => "amls2od",
            KernelSpec::Si2Od { .. } => "si2od",
            KernelSpec::SiStateSpace(_) => "si_state_space",
            KernelSpec::Oracle(_) => "oracle",
            KernelSpec::Stationary(_) => "stationary",
        }
    }

    /// Hyperparameters with their admissible domain as the box.
    pub fn hyperparams(&self) -> HyperParams {
        const PI: f64 = std::f64::consts::PI;
        let inf = f64::INFINITY;
        let hp = match *self {
            KernelSpec::Ss { c, lambda } | KernelSpec::Tc { c, lambda } => HyperParams::new(
                &["c", "lambda"],
                vec![c, lambda],
                vec![0.0, 0.0],
                vec![inf, LAMBDA_MAX],
            ),
            KernelSpec::Dc { c, lambda, rho } => HyperParams::new(
                &["c", "lambda", "rho"],
                vec![c, lambda, rho],
                vec![0.0, 0.0, -1.0],
                vec![inf, LAMBDA_MAX, 1.0],
            ),
            KernelSpec::Amls2Os { c, lambda, alpha } => HyperParams::new(
                &["c", "lambda", "alpha"],
                vec![c, lambda, alpha],
                vec![0.0, 0.0, 0.0],
                vec![inf, LAMBDA_MAX, PI],
            ),
            KernelSpec::Amls2Od {
                c,
                lambda,
                omega,
                rho,
            } => HyperParams::new(
                &["c", "lambda", "omega", "rho"],
                vec![c, lambda, omega, rho],
                vec![0.0, 0.0, 0.0, -1.0],
                vec![inf, LAMBDA_MAX, inf, 1.0],
            ),
            KernelSpec::Si2Od { c, nominal } => HyperParams::new(
                &["c", "omega0", "xi", "gamma"],
                vec![c, nominal.omega0, nominal.xi, nominal.gamma],
                vec![0.0, f64::MIN_POSITIVE, 0.0, f64::MIN_POSITIVE],
                vec![inf, inf, XI_MAX, inf],
            ),
            KernelSpec::Amls { envelope, corr } => {
                let mut names = Vec::new();
                let mut values = Vec::new();
                for (n, v) in envelope.params() {
                    names.push(format!("env_{n}"));
                    values.push(v);
                }
                for (n, v) in corr.params() {
                    names.push(format!("corr_{n}"));
                    values.push(v);
                }
                let k = values.len();
                let refs: Vec<&str> = names.iter().map(String::as_str).collect();
                HyperParams::new(&refs, values, vec![-inf; k], vec![inf; k])
            }
            KernelSpec::Stationary(corr) => {
                let p = corr.params();
                let names: Vec<&str> = p.iter().map(|(n, _)| *n).collect();
                let k = p.len();
                HyperParams::new(
                    &names,
                    p.iter().map(|(_, v)| *v).collect(),
                    vec![-inf; k],
                    vec![inf; k],
                )
            }
            KernelSpec::SiStateSpace(_) | KernelSpec::Oracle(_) => Ok(HyperParams::empty()),
        };
        hp.unwrap_or_else(|_| HyperParams::empty())
    }

    /// `k(t, s)` after checking the hyperparameter domain.
    pub fn eval(&self, t: usize, s: usize) -> Result<f64> {
        self.validate()?;
        Ok(self.eval_unchecked(t, s))
    }

    pub(crate) fn eval_unchecked(&self, t: usize, s: usize) -> f64 {
        // fixed argument order keeps the result bitwise symmetric
        let (t, s) = (t.max(s), t.min(s));
        let r = t - s;
        match *self {
            KernelSpec::Ss { c, lambda } => {
                c * powi_usize(lambda, 3 * (t + s))
                    * (0.5 * powi_usize(lambda, r) - powi_usize(lambda, 3 * r) / 6.0)
            }
            KernelSpec::Dc { c, lambda, rho } => {
                c * lambda.powf((t + s) as f64 / 2.0) * powi_usize(rho, r)
            }
            KernelSpec::Tc { c, lambda } => {
                c * powi_usize(lambda, t).min(powi_usize(lambda, s))
            }
            KernelSpec::Amls { envelope, corr } => {
                envelope.at(t) * envelope.at(s) * corr.at_lag(r)
            }
            KernelSpec::Amls2Os { c, lambda, alpha } => {
                c * powi_usize(lambda, t + s) * (alpha * r as f64).cos()
            }
            KernelSpec::Amls2Od {
                c,
                lambda,
                omega,
                rho,
            } => {
                let osc = |x: usize| (omega * x as f64).cos() + 1.0 + AMLS2OD_EPS;
                c * powi_usize(lambda, t + s) * osc(t) * osc(s) * powi_usize(rho, r)
            }
            KernelSpec::Si2Od { c, nominal } => c * si2od_closed(&nominal, t as f64, s as f64),
            KernelSpec::SiStateSpace(ref m) => crate::statespace::si_kernel_dt(m, t, s),
            KernelSpec::Oracle(ref g0) => oracle_at(g0, t) * oracle_at(g0, s),
            KernelSpec::Stationary(corr) => corr.at_lag(r),
        }
    }

    /// Envelope `b(t)` of the AMLS factorization `k = b(t) b(s) k^c(t-s)`, if any.
    pub(crate) fn envelope_at(&self, t: usize) -> Option<f64> {
        Some(match *self {
            KernelSpec::Ss { c, lambda } => (c / 3.0).sqrt() * powi_usize(lambda, 3 * t),
            KernelSpec::Dc { c, lambda, .. } | KernelSpec::Tc { c, lambda } => {
                c.sqrt() * lambda.powf(t as f64 / 2.0)
            }
            KernelSpec::Amls { envelope, .. } => envelope.at(t),
            KernelSpec::Amls2Os { c, lambda, .. } => c.sqrt() * powi_usize(lambda, t),
            KernelSpec::Amls2Od {
                c, lambda, omega, ..
            } => c.sqrt() * powi_usize(lambda, t) * ((omega * t as f64).cos() + 1.0 + AMLS2OD_EPS),
            KernelSpec::Stationary(_) => 1.0,
            _ => return None,
        })
    }

    /// Stationary correlation factor of the AMLS factorization, if any.
    pub(crate) fn corr_at(&self, lag: usize) -> Option<f64> {
        Some(match *self {
            KernelSpec::Ss { lambda, .. } => StationaryCorr::Ss { lambda }.at_lag(lag),
            KernelSpec::Dc { rho, .. } => powi_usize(rho, lag),
            KernelSpec::Tc { lambda, .. } => lambda.sqrt().powf(lag as f64),
            KernelSpec::Amls { corr, .. } | KernelSpec::Stationary(corr) => corr.at_lag(lag),
            KernelSpec::Amls2Os { alpha, .. } => (alpha * lag as f64).cos(),
            KernelSpec::Amls2Od { rho, .. } => powi_usize(rho, lag),
            _ => return None,
        })
    }

    /// Splits `k(t, s)` into its rank-1 amplitude part `b(t) b(s)` and its
    /// stationary correlation part `k^c(t - s)`.
    pub fn amls_parts(&self, t: usize, s: usize) -> Result<(f64, f64)> {
        self.validate()?;
        match (self.envelope_at(t), self.envelope_at(s), self.corr_at(t.abs_diff(s))) {
            (Some(bt), Some(bs), Some(kc)) => Ok((bt * bs, kc)),
            _ => Err(Error::Unsupported(format!(
                "{} kernel has no amplitude-modulated factorization",
                self.family_name()
            ))),
        }
    }
}

fn oracle_at(g0: &[f64], t: usize) -> f64 {
    if t == 0 {
        0.0
    } else {
        g0.get(t - 1).copied().unwrap_or(0.0)
    }
}

/// Kernel matrix on a strictly increasing grid.
pub fn gram(spec: &KernelSpec, grid: &[usize]) -> Result<DMatrix<f64>> {
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "grid must be strictly increasing".into(),
        ));
    }
    spec.validate()?;
    let n = grid.len();
    let mut k = DMatrix::zeros(n, n);
    if let KernelSpec::SiStateSpace(m) = spec {
        let table = SiTable::new(m, grid.last().copied().unwrap_or(0));
        for i in 0..n {
            for j in i..n {
                let v = table.eval(grid[i], grid[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        return Ok(k);
    }
    for i in 0..n {
        for j in i..n {
            let v = spec.eval_unchecked(grid[i], grid[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// `{start, start+1, ..., end}` inclusive.
pub fn range_grid(start: usize, end: usize) -> Vec<usize> {
    (start..=end).collect()
}

/// Largest deviation between the exponential form of the SS kernel,
/// `c/2 e^{-beta(t+s) - beta max(t,s)} - c/6 e^{-3 beta max(t,s)}`, and its
/// `lambda = e^{-beta/2}` power form over the given index pairs.
pub fn ss_reparam_check(c: f64, beta: f64, pairs: &[(usize, usize)]) -> f64 {
    let lambda = (-beta / 2.0).exp();
    let power_form = KernelSpec::Ss { c, lambda };
    pairs
        .iter()
        .map(|&(t, s)| {
            let (tf, sf) = (t as f64, s as f64);
            let mx = tf.max(sf);
            let exp_form =
                c / 2.0 * (-beta * (tf + sf) - beta * mx).exp() - c / 6.0 * (-3.0 * beta * mx).exp();
            (exp_form - power_form.eval_unchecked(t, s)).abs()
        })
        .fold(0.0, f64::max)
}

/// All `(t, s)` pairs with `t, s` in `0..=n`.
pub fn square_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..=n).flat_map(|t| (0..=n).map(move |s| (t, s))).collect()
}
