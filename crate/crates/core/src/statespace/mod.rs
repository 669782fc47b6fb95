//! Simulation-induced (SI) kernels.
//!
//! A nominal model `(A, B, C, D)` with random initial state `z(0) ~ N(0, Q)`
//! is driven by modulated white noise `b(t) w(t)`:
//!
//! ```text
//! z(t+1) = A z(t) + B b(t) w(t)
//! g(t)   = C z(t) + D b(t) w(t)
//! ```
//!
//! and the SI kernel is `Cov(g(t), g(s))`. This module evaluates that
//! covariance in closed form, provides state-space realizations of the SS and
//! DC kernels, the closed-form second-order (SI-2Od) kernel, a discrete
//! Lyapunov solver, and a Monte Carlo covariance oracle.

mod lyapunov;
mod quadrature;
mod simulate;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use lyapunov::lyapunov_dt;
pub use quadrature::{gauss_kronrod, si2od_quadrature, si_kernel_ct_quadrature, QuadConfig};
pub use simulate::{simulate_covariance, McCovariance};

use crate::error::{Error, Result};
use crate::kernel::{DecayEnvelope, LAMBDA_MAX, XI_MAX};
use crate::linalg::min_eigenvalue;

/// Discrete-time nominal model plus the envelope of its noise input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateSpaceJson", into = "StateSpaceJson")]
pub struct StateSpaceModel {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Output row, stored as a column vector.
    pub c: DVector<f64>,
    pub d: f64,
    pub q: DMatrix<f64>,
    pub envelope: DecayEnvelope,
}

impl StateSpaceModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: DVector<f64>,
        d: f64,
        q: DMatrix<f64>,
        envelope: DecayEnvelope,
    ) -> Result<Self> {
        let m = StateSpaceModel {
            a,
            b,
            c,
            d,
            q,
            envelope,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        if self.a.ncols() != n {
            return Err(Error::Dimension(format!(
                "A must be square, got {}x{}",
                n,
                self.a.ncols()
            )));
        }
        if self.b.len() != n || self.c.len() != n {
            return Err(Error::Dimension(format!(
                "B and C must have {n} entries, got {} and {}",
                self.b.len(),
                self.c.len()
            )));
        }
        if self.q.nrows() != n || self.q.ncols() != n {
            return Err(Error::Dimension(format!("Q must be {n}x{n}")));
        }
        let asym = (&self.q - self.q.transpose()).abs().max();
        if asym > 1e-12 * (1.0 + self.q.abs().max()) {
            return Err(Error::InvalidArgument(format!(
                "Q must be symmetric (asymmetry {asym:e})"
            )));
        }
        let min_eig = min_eigenvalue(&self.q);
        if min_eig < -1e-10 {
            return Err(Error::domain("Q", min_eig, "min eigenvalue of Q >= -1e-10"));
        }
        if !self.d.is_finite() {
            return Err(Error::domain("D", self.d, "finite"));
        }
        self.envelope.validate()
    }

    /// Controllable canonical realization of
    /// `bbar q^{n-1} / (q^n + a_1 q^{n-1} + ... + a_n)` with `D = 0`.
    pub fn controllable_canonical(
        bbar: f64,
        denominator: &[f64],
        q: DMatrix<f64>,
        envelope: DecayEnvelope,
    ) -> Result<Self> {
        let n = denominator.len();
        if n == 0 {
            return Err(Error::InvalidArgument(
                "denominator must have at least one coefficient".into(),
            ));
        }
        let mut a = DMatrix::zeros(n, n);
        for (j, coef) in denominator.iter().enumerate() {
            a[(0, j)] = -coef;
        }
        for i in 1..n {
            a[(i, i - 1)] = 1.0;
        }
        let mut b = DVector::zeros(n);
        b[0] = 1.0;
        let mut c = DVector::zeros(n);
        c[0] = bbar;
        Self::new(a, b, c, 0.0, q, envelope)
    }

    /// Nominal model `bbar q / ((q + a1)(q + a2))` in controllable canonical form.
    pub fn two_real_poles(
        bbar: f64,
        a1: f64,
        a2: f64,
        q: DMatrix<f64>,
        envelope: DecayEnvelope,
    ) -> Result<Self> {
        Self::controllable_canonical(bbar, &[a1 + a2, a1 * a2], q, envelope)
    }
}

#[derive(Serialize, Deserialize)]
struct StateSpaceJson {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<f64>,
    #[serde(rename = "C")]
    c: Vec<f64>,
    #[serde(rename = "D")]
    d: f64,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    envelope: DecayEnvelope,
}

fn rows_to_matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Dimension(format!("{name} has ragged rows")));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

impl TryFrom<StateSpaceJson> for StateSpaceModel {
    type Error = Error;

    fn try_from(j: StateSpaceJson) -> Result<Self> {
        StateSpaceModel::new(
            rows_to_matrix("A", &j.a)?,
            DVector::from_vec(j.b),
            DVector::from_vec(j.c),
            j.d,
            rows_to_matrix("Q", &j.q)?,
            j.envelope,
        )
    }
}

impl From<StateSpaceModel> for StateSpaceJson {
    fn from(m: StateSpaceModel) -> Self {
        StateSpaceJson {
            a: matrix_to_rows(&m.a),
            b: m.b.iter().copied().collect(),
            c: m.c.iter().copied().collect(),
            d: m.d,
            q: matrix_to_rows(&m.q),
            envelope: m.envelope,
        }
    }
}

/// Precomputed output maps and state covariances for evaluating an SI kernel
/// at many index pairs up to `t_max`.
///
/// With `P(m) = Cov(z(m))`, propagated by `P(m+1) = A P(m) A^T + b(m)^2 B B^T`,
/// every entry with `t >= s` is `C A^{t-s} P(s) C^T` plus the feedthrough term.
pub struct SiTable {
    /// `(C A^j)^T` for `j = 0..=t_max`
    ca: Vec<DVector<f64>>,
    /// `P(m) C^T`
    pc: Vec<DVector<f64>>,
    /// Markov parameters `C A^j B`
    markov: Vec<f64>,
    env: Vec<f64>,
    d: f64,
}

impl SiTable {
    pub fn new(m: &StateSpaceModel, t_max: usize) -> Self {
        let mut ca = Vec::with_capacity(t_max + 1);
        let mut row = m.c.clone();
        for _ in 0..=t_max {
            let next = m.a.tr_mul(&row);
            ca.push(row);
            row = next;
        }
        let markov = ca.iter().map(|r| r.dot(&m.b)).collect();
        let env: Vec<f64> = (0..=t_max).map(|k| m.envelope.at(k)).collect();
        let bb = &m.b * m.b.transpose();
        let mut p = m.q.clone();
        let mut pc = Vec::with_capacity(t_max + 1);
        for e in &env {
            pc.push(&p * &m.c);
            p = &m.a * &p * m.a.transpose() + &bb * (e * e);
        }
        SiTable {
            ca,
            pc,
            markov,
            env,
            d: m.d,
        }
    }

    /// Covariance `Cov(g(t), g(s))`; requires `t, s <= t_max`.
    pub fn eval(&self, t: usize, s: usize) -> f64 {
        let (hi, lo) = if t >= s { (t, s) } else { (s, t) };
        let mut k = self.ca[hi - lo].dot(&self.pc[lo]);
        let e = self.env[lo];
        if hi == lo {
            k += self.d * self.d * e * e;
        } else {
            // w(lo) enters g(lo) directly and g(hi) through the state
            k += self.d * e * e * self.markov[hi - 1 - lo];
        }
        k
    }
}

/// SI kernel `k(t, s) = Cov(g(t), g(s))` of the discrete-time model.
pub fn si_kernel_dt(m: &StateSpaceModel, t: usize, s: usize) -> f64 {
    SiTable::new(m, t.max(s)).eval(t, s)
}

/// State-space realization of the DC kernel: `A = lambda^{1/2} rho`,
/// `B = lambda^{1/2}`, `C = rho (1 - rho^2)^{1/2}`, `D = (1 - rho^2)^{1/2}`,
/// `Q = c / (1 - rho^2)`, `b(t) = c^{1/2} lambda^{t/2}`.
pub fn realize_dc_dt(c: f64, lambda: f64, rho: f64) -> Result<StateSpaceModel> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::domain("c", c, "c >= 0"));
    }
    if !(lambda.is_finite() && (0.0..=LAMBDA_MAX).contains(&lambda)) {
        return Err(Error::domain("lambda", lambda, "0 <= lambda <= 1 - 1e-6"));
    }
    if !(rho.is_finite() && rho.abs() < 1.0) {
        return Err(Error::domain("rho", rho, "|rho| < 1"));
    }
    let sl = lambda.sqrt();
    let w = (1.0 - rho * rho).sqrt();
    StateSpaceModel::new(
        DMatrix::from_element(1, 1, sl * rho),
        DVector::from_element(1, sl),
        DVector::from_element(1, rho * w),
        w,
        DMatrix::from_element(1, 1, c / (1.0 - rho * rho)),
        DecayEnvelope::exp(c, sl)?,
    )
}

/// Two-state realization of the SS kernel, obtained by spectral
/// factorization of its stationary correlation factor.
pub fn realize_ss_dt(c: f64, lambda: f64) -> Result<StateSpaceModel> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::domain("c", c, "c >= 0"));
    }
    if !(lambda.is_finite() && (0.0..=LAMBDA_MAX).contains(&lambda)) {
        return Err(Error::domain("lambda", lambda, "0 <= lambda <= 1 - 1e-6"));
    }
    let l2 = lambda * lambda;
    let l3 = l2 * lambda;
    let l4 = l2 * l2;
    let l6 = l3 * l3;
    let root = (1.0 + l2 + l4).sqrt();
    // 1 + l2 - root >= 0 in exact arithmetic; clamp round-off near lambda = 0
    let a_bar = (1.0 + l2 - root).max(0.0).sqrt();
    let b_bar = (1.0 + l2 + root).sqrt();
    let gain = ((1.0 - l2).powi(3) / 2.0).sqrt();

    let a = DMatrix::from_row_slice(2, 2, &[l3 * lambda, 0.0, 0.0, l3 * l3]);
    let b = DVector::from_vec(vec![l3, l3]);
    let c_row = DVector::from_vec(vec![
        gain * (a_bar + b_bar * lambda) / (1.0 - l2),
        -gain * l2 * (a_bar + b_bar * l3) / (1.0 - l2),
    ]);
    let d = b_bar * gain;
    let s = c / 3.0;
    let q = DMatrix::from_row_slice(
        2,
        2,
        &[
            s / (1.0 - l2),
            s / (1.0 - l4),
            s / (1.0 - l4),
            s / (1.0 - l6),
        ],
    );
    StateSpaceModel::new(a, b, c_row, d, q, DecayEnvelope::exp(s, l3)?)
}

/// Damped second-order nominal model `1 / (s^2 + 2 omega0 xi s + omega0^2)`
/// with uncertainty envelope `b(t) = e^{-gamma t}` and `Q = I`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderNominal {
    pub omega0: f64,
    pub xi: f64,
    pub gamma: f64,
}

impl SecondOrderNominal {
    pub fn new(omega0: f64, xi: f64, gamma: f64) -> Result<Self> {
        let p = SecondOrderNominal { omega0, xi, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return Err(Error::domain("omega0", self.omega0, "omega0 > 0"));
        }
        if !(self.xi.is_finite() && (0.0..=XI_MAX).contains(&self.xi)) {
            return Err(Error::domain("xi", self.xi, "0 <= xi <= 1 - 1e-3"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::domain("gamma", self.gamma, "gamma > 0"));
        }
        Ok(())
    }

    /// Decay rate `omega0 xi` of the nominal impulse response.
    pub fn alpha(&self) -> f64 {
        self.omega0 * self.xi
    }

    /// Damped frequency `omega0 (1 - xi^2)^{1/2}`.
    pub fn beta(&self) -> f64 {
        self.omega0 * (1.0 - self.xi * self.xi).sqrt()
    }

    /// Continuous-time `(A, B, C)` in companion form.
    pub fn ct_matrices(&self) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
        let (alpha, beta) = (self.alpha(), self.beta());
        (
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -alpha * alpha - beta * beta, -2.0 * alpha]),
            DVector::from_vec(vec![0.0, 1.0]),
            DVector::from_vec(vec![1.0, 0.0]),
        )
    }
}

/// Below this `|alpha - gamma|` the `(e^{2(alpha-gamma)m} - 1)/(alpha - gamma)`
/// factor is replaced by its limit `2m`.
pub const SI2OD_MERGE_TOL: f64 = 1e-9;

/// Closed-form covariance of the second-order SI kernel at real times `t, s >= 0`.
pub fn si2od_closed(p: &SecondOrderNominal, t: f64, s: f64) -> f64 {
    let alpha = p.alpha();
    let beta = p.beta();
    let delta = alpha - p.gamma;
    let m = t.min(s);
    let sum = t + s;
    let decay = (-alpha * sum).exp();
    let b2 = beta * beta;

    let (st, ct) = (beta * t).sin_cos();
    let (ss, cs) = (beta * s).sin_cos();
    let initial = decay
        * (ct * cs + alpha / beta * (beta * sum).sin() + (alpha * alpha + 1.0) / b2 * st * ss);

    let growth = if delta.abs() < SI2OD_MERGE_TOL {
        2.0 * m
    } else {
        (2.0 * delta * m).exp_m1() / delta
    };
    let aligned = decay * (beta * (t - s)).cos() * growth / (4.0 * b2);

    let radius = (4.0 * b2 + 4.0 * delta * delta).sqrt();
    let phi = (2.0 * delta / radius).clamp(-1.0, 1.0).acos();
    let rotating = decay / (2.0 * b2 * radius)
        * ((phi + beta * sum).cos()
            - (2.0 * delta * m).exp() * (2.0 * beta * m - phi - beta * sum).cos());

    initial + aligned + rotating
}
