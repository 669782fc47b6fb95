use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Half-integer Matérn orders, the ones with elementary closed forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaternOrder {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl MaternOrder {
    pub fn nu(self) -> f64 {
        match self {
            MaternOrder::Half => 0.5,
            MaternOrder::ThreeHalves => 1.5,
            MaternOrder::FiveHalves => 2.5,
        }
    }

    pub fn from_nu(nu: f64) -> Result<Self> {
        match nu {
            0.5 => Ok(MaternOrder::Half),
            1.5 => Ok(MaternOrder::ThreeHalves),
            2.5 => Ok(MaternOrder::FiveHalves),
            _ => Err(Error::domain("nu", nu, "nu in {0.5, 1.5, 2.5}")),
        }
    }
}

/// Stationary correlation `k^c(r)` with `k^c(0) = 1`, evaluated at a
/// nonnegative lag `r = |t - s|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StationaryCorr {
    /// `rho^r`, the correlation factor of the DC kernel.
    Dc { rho: f64 },
    /// `3/2 lambda^r - 1/2 lambda^{3r}`, the correlation factor of the SS kernel.
    Ss { lambda: f64 },
    /// `exp(-beta r^2)`
    SquaredExponential { beta: f64 },
    Matern { beta: f64, nu: MaternOrder },
    /// `c (alpha r)^{-nu} J_nu(alpha r)` with `c = 2^nu Gamma(nu + 1)`.
    BesselJ { alpha: f64, nu: f64 },
    /// `cos(alpha r)`
    Cosine { alpha: f64 },
    /// `sin(alpha r) / (alpha r)`
    Sinc { alpha: f64 },
}

impl StationaryCorr {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StationaryCorr::Dc { rho } => check_range("rho", rho, -1.0, 1.0, "|rho| <= 1"),
            StationaryCorr::Ss { lambda } => check_range(
                "lambda",
                lambda,
                0.0,
                super::LAMBDA_MAX,
                "0 <= lambda <= 1 - 1e-6",
            ),
            StationaryCorr::SquaredExponential { beta } => check_positive("beta", beta),
            StationaryCorr::Matern { beta, .. } => check_positive("beta", beta),
            StationaryCorr::BesselJ { alpha, nu } => {
                check_positive("alpha", alpha)?;
                if !nu.is_finite() || nu < -0.5 {
                    return Err(Error::domain("nu", nu, "nu >= -1/2"));
                }
                Ok(())
            }
            StationaryCorr::Cosine { alpha } => check_nonneg("alpha", alpha),
            StationaryCorr::Sinc { alpha } => check_positive("alpha", alpha),
        }
    }

    /// Correlation at integer lag `r`.
    pub fn at_lag(&self, r: usize) -> f64 {
        match *self {
            StationaryCorr::Dc { rho } => powi_usize(rho, r),
            StationaryCorr::Ss { lambda } => {
                1.5 * powi_usize(lambda, r) - 0.5 * powi_usize(lambda, 3 * r)
            }
            _ => self.at(r as f64),
        }
    }

    /// Correlation at a real lag `r >= 0`. The DC variant with negative `rho`
    /// is only meaningful on integer lags.
    pub fn at(&self, r: f64) -> f64 {
        let r = r.abs();
        match *self {
            StationaryCorr::Dc { rho } => {
                if r.fract() == 0.0 {
                    powi_usize(rho, r as usize)
                } else {
                    rho.powf(r)
                }
            }
            StationaryCorr::Ss { lambda } => {
                if r.fract() == 0.0 {
                    self.at_lag(r as usize)
                } else {
                    1.5 * lambda.powf(r) - 0.5 * lambda.powf(3.0 * r)
                }
            }
            StationaryCorr::SquaredExponential { beta } => (-beta * r * r).exp(),
            StationaryCorr::Matern { beta, nu } => {
                let z = beta * (2.0 * nu.nu()).sqrt() * r;
                match nu {
                    MaternOrder::Half => (-z).exp(),
                    MaternOrder::ThreeHalves => (1.0 + z) * (-z).exp(),
                    MaternOrder::FiveHalves => (1.0 + z + z * z / 3.0) * (-z).exp(),
                }
            }
            StationaryCorr::BesselJ { alpha, nu } => normalized_bessel_j(nu, alpha * r),
            StationaryCorr::Cosine { alpha } => (alpha * r).cos(),
            StationaryCorr::Sinc { alpha } => {
                let x = alpha * r;
                if x == 0.0 {
                    1.0
                } else {
                    x.sin() / x
                }
            }
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            StationaryCorr::Dc { .. } => "dc",
            StationaryCorr::Ss { .. } => "ss",
            StationaryCorr::SquaredExponential { .. } => "se",
            StationaryCorr::Matern { .. } => "matern",
            StationaryCorr::BesselJ { .. } => "bessel_j",
            StationaryCorr::Cosine { .. } => "cosine",
            StationaryCorr::Sinc { .. } => "sinc",
        }
    }

    /// Named parameters in a fixed order.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            StationaryCorr::Dc { rho } => vec![("rho", rho)],
            StationaryCorr::Ss { lambda } => vec![("lambda", lambda)],
            StationaryCorr::SquaredExponential { beta } => vec![("beta", beta)],
            StationaryCorr::Matern { beta, nu } => vec![("beta", beta), ("nu", nu.nu())],
            StationaryCorr::BesselJ { alpha, nu } => vec![("alpha", alpha), ("nu", nu)],
            StationaryCorr::Cosine { alpha } => vec![("alpha", alpha)],
            StationaryCorr::Sinc { alpha } => vec![("alpha", alpha)],
        }
    }

    pub fn from_params(tag: &str, get: impl Fn(&str) -> Result<f64>) -> Result<Self> {
        let corr = match tag {
            "dc" => StationaryCorr::Dc { rho: get("rho")? },
            "ss" => StationaryCorr::Ss {
                lambda: get("lambda")?,
            },
            "se" => StationaryCorr::SquaredExponential { beta: get("beta")? },
            "matern" => StationaryCorr::Matern {
                beta: get("beta")?,
                nu: MaternOrder::from_nu(get("nu")?)?,
            },
            "bessel_j" => StationaryCorr::BesselJ {
                alpha: get("alpha")?,
                nu: get("nu")?,
            },
            "cosine" => StationaryCorr::Cosine {
                alpha: get("alpha")?,
            },
            "sinc" => StationaryCorr::Sinc {
                alpha: get("alpha")?,
            },
            other => return Err(Error::Unsupported(format!("stationary kernel '{other}'"))),
        };
        corr.validate()?;
        Ok(corr)
    }
}

/// `x^n` for a nonnegative integer exponent, with `0^0 = 1`.
pub(crate) fn powi_usize(x: f64, n: usize) -> f64 {
    if n <= i32::MAX as usize {
        x.powi(n as i32)
    } else {
        x.powf(n as f64)
    }
}

/// Normalization constant so that `c x^{-nu} J_nu(x) -> 1` as `x -> 0`.
pub fn bessel_normalization(nu: f64) -> f64 {
    2f64.powf(nu) * puruspe::gamma(nu + 1.0)
}

fn normalized_bessel_j(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let c = bessel_normalization(nu);
    if x < 1e-6 {
        // leading two terms of the power series
        let x2 = 0.25 * x * x;
        return 1.0 - x2 / (nu + 1.0);
    }
    c * x.powf(-nu) * bessel_j(nu, x)
}

/// Bessel function of the first kind for real order `nu >= -1/2`, `x > 0`.
fn bessel_j(nu: f64, x: f64) -> f64 {
    if x > 5.0e3 {
        // large-argument asymptotics; relative error O(1/x)
        return (2.0 / (PI * x)).sqrt() * (x - 0.5 * nu * PI - 0.25 * PI).cos();
    }
    if nu >= 0.0 {
        puruspe::besseljy(nu, x).0
    } else {
        // downward step from orders nu + 1 and nu + 2
        let j1 = puruspe::besseljy(nu + 1.0, x).0;
        let j2 = puruspe::besseljy(nu + 2.0, x).0;
        2.0 * (nu + 1.0) / x * j1 - j2
    }
}

fn check_range(name: &str, v: f64, lo: f64, hi: f64, bound: &str) -> Result<()> {
    if v.is_finite() && v >= lo && v <= hi {
        Ok(())
    } else {
        Err(Error::domain(name, v, bound))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(name, v, format!("{name} > 0")))
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(name, v, format!("{name} >= 0")))
    }
}
