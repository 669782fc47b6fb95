use serde::{Deserialize, Serialize};

use super::LAMBDA_MAX;
use crate::error::{Error, Result};

/// Amplitude envelope `b(t)` of an amplitude-modulated kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayEnvelope {
    /// `b(t) = c^{1/2} lambda^t`
    Exp { c: f64, lambda: f64 },
    /// `b(t) = c^{1/2} lambda^t (cos(omega t) + 1 + eps)`
    ExpOsc {
        c: f64,
        lambda: f64,
        omega: f64,
        eps: f64,
    },
}

impl DecayEnvelope {
    pub fn exp(c: f64, lambda: f64) -> Result<Self> {
        let env = DecayEnvelope::Exp { c, lambda };
        env.validate()?;
        Ok(env)
    }

    pub fn exp_osc(c: f64, lambda: f64, omega: f64, eps: f64) -> Result<Self> {
        let env = DecayEnvelope::ExpOsc {
            c,
            lambda,
            omega,
            eps,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        let (c, lambda) = self.scale_and_rate();
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::domain("c", c, "c >= 0"));
        }
        if !(lambda.is_finite() && (0.0..=LAMBDA_MAX).contains(&lambda)) {
            return Err(Error::domain("lambda", lambda, "0 <= lambda <= 1 - 1e-6"));
        }
        if let DecayEnvelope::ExpOsc { omega, eps, .. } = *self {
            if !(omega.is_finite() && omega >= 0.0) {
                return Err(Error::domain("omega", omega, "omega >= 0"));
            }
            if !(eps.is_finite() && eps > 0.0) {
                return Err(Error::domain("eps", eps, "eps > 0"));
            }
        }
        Ok(())
    }

    pub fn scale_and_rate(&self) -> (f64, f64) {
        match *self {
            DecayEnvelope::Exp { c, lambda } | DecayEnvelope::ExpOsc { c, lambda, .. } => {
                (c, lambda)
            }
        }
    }

    /// Geometric decay rate of the envelope.
    pub fn rate(&self) -> f64 {
        self.scale_and_rate().1
    }

    pub fn at(&self, t: usize) -> f64 {
        match *self {
            DecayEnvelope::Exp { c, lambda } => c.sqrt() * super::stationary::powi_usize(lambda, t),
            DecayEnvelope::ExpOsc {
                c,
                lambda,
                omega,
                eps,
            } => {
                c.sqrt()
                    * super::stationary::powi_usize(lambda, t)
                    * ((omega * t as f64).cos() + 1.0 + eps)
            }
        }
    }

    /// Upper bound of `b(t) / lambda^t` over all `t`.
    pub fn amplitude_bound(&self) -> f64 {
        match *self {
            DecayEnvelope::Exp { c, .. } => c.sqrt(),
            DecayEnvelope::ExpOsc { c, eps, .. } => c.sqrt() * (2.0 + eps),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            DecayEnvelope::Exp { .. } => "exp",
            DecayEnvelope::ExpOsc { .. } => "exp_osc",
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            DecayEnvelope::Exp { c, lambda } => vec![("c", c), ("lambda", lambda)],
            DecayEnvelope::ExpOsc {
                c,
                lambda,
                omega,
                eps,
            } => vec![("c", c), ("lambda", lambda), ("omega", omega), ("eps", eps)],
        }
    }

    pub fn from_params(tag: &str, get: impl Fn(&str) -> Result<f64>) -> Result<Self> {
        match tag {
            "exp" => DecayEnvelope::exp(get("c")?, get("lambda")?),
            "exp_osc" => DecayEnvelope::exp_osc(get("c")?, get("lambda")?, get("omega")?, get("eps")?),
            other => Err(Error::Unsupported(format!("envelope '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_envelope_values() {
        let env = DecayEnvelope::exp(4.0, 0.5).unwrap();
        assert_eq!(env.at(0), 2.0);
        assert_eq!(env.at(3), 0.25);
    }

    #[test]
    fn osc_envelope_stays_positive() {
        let env = DecayEnvelope::exp_osc(1.0, 0.95, std::f64::consts::PI, 1e-6).unwrap();
        for t in 0..100 {
            assert!(env.at(t) > 0.0);
        }
    }

    #[test]
    fn unit_rate_rejected() {
        let err = DecayEnvelope::exp(1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::Domain { ref param, .. } if param == "lambda"));
        assert!(DecayEnvelope::exp_osc(1.0, 0.5, 1.0, 0.0).is_err());
    }
}
