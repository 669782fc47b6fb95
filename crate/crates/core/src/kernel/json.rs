use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{DecayEnvelope, KernelSpec, StationaryCorr};
use crate::error::{Error, Result};
use crate::statespace::StateSpaceModel;

fn default_true() -> bool {
    true
}

/// Wire form of a [`KernelSpec`]:
/// `{"family": "...", "params": {"name": value, ...}, "seedless": true}`.
///
/// The generic AMLS family also carries `envelope` and `corr` tags, the bare
/// stationary family carries `corr`, the state-space family carries `model`
/// and the oracle carries `g0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelSpecJson {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default = "default_true")]
    pub seedless: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<StateSpaceModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0: Option<Vec<f64>>,
}

impl KernelSpecJson {
    fn bare(family: &str, params: &[(&str, f64)]) -> Self {
        KernelSpecJson {
            family: family.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            seedless: true,
            envelope: None,
            corr: None,
            model: None,
            g0: None,
        }
    }

    fn param(&self, name: &str) -> Result<f64> {
        self.params.get(name).copied().ok_or_else(|| {
            Error::InvalidArgument(format!(
                "kernel family '{}' requires parameter '{name}'",
                self.family
            ))
        })
    }
}

impl From<KernelSpec> for KernelSpecJson {
    fn from(spec: KernelSpec) -> Self {
        match spec {
            KernelSpec::Ss { c, lambda } => Self::bare("ss", &[("c", c), ("lambda", lambda)]),
            KernelSpec::Tc { c, lambda } => Self::bare("tc", &[("c", c), ("lambda", lambda)]),
            KernelSpec::Dc { c, lambda, rho } => {
                Self::bare("dc", &[("c", c), ("lambda", lambda), ("rho", rho)])
            }
            KernelSpec::Amls2Os { c, lambda, alpha } => {
                Self::bare("amls2os", &[("c", c), ("lambda", lambda), ("alpha", alpha)])
            }
            KernelSpec::Amls2Od {
                c,
                lambda,
                omega,
                rho,
            } => Self::bare(
                "amls2od",
                &[("c", c), ("lambda", lambda), ("omega", omega), ("rho", rho)],
            ),
            KernelSpec::Si2Od { c, nominal } => Self::bare(
                "si2od",
                &[
                    ("c", c),
                    ("omega0", nominal.omega0),
                    ("xi", nominal.xi),
                    ("gamma", nominal.gamma),
                ],
            ),
            KernelSpec::Amls { envelope, corr } => {
                let mut j = Self::bare("amls", &[]);
                for (n, v) in envelope.params() {
                    j.params.insert(format!("env_{n}"), v);
                }
                for (n, v) in corr.params() {
                    j.params.insert(format!("corr_{n}"), v);
                }
                j.envelope = Some(envelope.tag().to_string());
                j.corr = Some(corr.tag().to_string());
                j
            }
            KernelSpec::Stationary(corr) => {
                let mut j = Self::bare("stationary", &[]);
                for (n, v) in corr.params() {
                    j.params.insert(format!("corr_{n}"), v);
                }
                j.corr = Some(corr.tag().to_string());
                j
            }
            KernelSpec::SiStateSpace(m) => {
                let mut j = Self::bare("si_state_space", &[]);
                j.model = Some((*m).clone());
                j
            }
            KernelSpec::Oracle(g0) => {
                let mut j = Self::bare("oracle", &[]);
                j.g0 = Some((*g0).clone());
                j
            }
        }
    }
}

impl TryFrom<KernelSpecJson> for KernelSpec {
    type Error = Error;

    fn try_from(j: KernelSpecJson) -> Result<Self> {
        let p = |n: &str| j.param(n);
        match j.family.as_str() {
            "ss" => KernelSpec::ss(p("c")?, p("lambda")?),
            "tc" => KernelSpec::tc(p("c")?, p("lambda")?),
            "dc" => KernelSpec::dc(p("c")?, p("lambda")?, p("rho")?),
            "amls2os" => KernelSpec::amls2os(p("c")?, p("lambda")?, p("alpha")?),
            "amls2od" => KernelSpec::amls2od(p("c")?, p("lambda")?, p("omega")?, p("rho")?),
            "si2od" => KernelSpec::si2od(p("c")?, p("omega0")?, p("xi")?, p("gamma")?),
            "amls" => {
                let env_tag = j.envelope.as_deref().unwrap_or("exp");
                let corr_tag = j
                    .corr
                    .as_deref()
                    .ok_or_else(|| Error::InvalidArgument("amls kernel requires 'corr'".into()))?;
                let envelope = DecayEnvelope::from_params(env_tag, |n| p(&format!("env_{n}")))?;
                let corr = StationaryCorr::from_params(corr_tag, |n| p(&format!("corr_{n}")))?;
                KernelSpec::amls(envelope, corr)
            }
            "stationary" => {
                let corr_tag = j.corr.as_deref().ok_or_else(|| {
                    Error::InvalidArgument("stationary kernel requires 'corr'".into())
                })?;
                let corr = StationaryCorr::from_params(corr_tag, |n| p(&format!("corr_{n}")))?;
                Ok(KernelSpec::Stationary(corr))
            }
            "si_state_space" => {
                let model = j.model.clone().ok_or_else(|| {
                    Error::InvalidArgument("si_state_space kernel requires 'model'".into())
                })?;
                model.validate()?;
                Ok(KernelSpec::SiStateSpace(Arc::new(model)))
            }
            "oracle" => {
                let g0 = j.g0.clone().ok_or_else(|| {
                    Error::InvalidArgument("oracle kernel requires 'g0'".into())
                })?;
                KernelSpec::oracle(g0)
            }
            other => Err(Error::Unsupported(format!("kernel family '{other}'"))),
        }
    }
}

impl KernelSpec {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: KernelSpecJson = serde_json::from_str(s)?;
        KernelSpec::try_from(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dc_wire_format() {
        let k = KernelSpec::dc(1.0, 0.9, -0.5).unwrap();
        let v: serde_json::Value = serde_json::to_value(&k).unwrap();
        assert_eq!(v["family"], "dc");
        assert_eq!(v["params"]["rho"], -0.5);
        assert_eq!(v["seedless"], true);
    }

    #[test]
    fn amls_round_trip() {
        let k = KernelSpec::amls(
            DecayEnvelope::exp_osc(1.0, 0.9, 0.3, 1e-6).unwrap(),
            StationaryCorr::Matern {
                beta: 0.4,
                nu: super::super::MaternOrder::ThreeHalves,
            },
        )
        .unwrap();
        let s = k.to_json_string().unwrap();
        assert_eq!(KernelSpec::from_json_str(&s).unwrap(), k);
    }

    #[test]
    fn out_of_domain_json_rejected() {
        let s = r#"{"family":"dc","params":{"c":1,"lambda":1.0,"rho":0.5}}"#;
        assert!(matches!(
            KernelSpec::from_json_str(s),
            Err(Error::Domain { .. })
        ));
        let s = r#"{"family":"dc","params":{"c":1,"lambda":0.5}}"#;
        assert!(KernelSpec::from_json_str(s).is_err());
    }
}
