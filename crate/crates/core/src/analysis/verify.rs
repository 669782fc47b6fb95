use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    banded_inverse_check, maxent_dc_variance, markov_residual, markov_residual_check,
    measured_bandwidth, si_stability_check, stability_partial_sums, SiStability,
    StabilityClause, Verdict, BAND_TOL,
};
use crate::error::{Error, Result};
use crate::kernel::{gram, range_grid, DecayEnvelope, KernelSpec, StationaryCorr};
use crate::linalg::spd_inverse;
use crate::statespace::{realize_dc_dt, realize_ss_dt, SiTable, StateSpaceModel};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_name: String,
    pub params: BTreeMap<String, f64>,
    pub pass: bool,
    pub metric: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub fault_injected: bool,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Perturb the feedthrough `D` of the DC realization by 1%.
    pub inject_fault: bool,
    /// Tolerance overrides by name: `realization`, `factorization`, `band`,
    /// `maxent`, `markov`.
    pub tolerances: BTreeMap<String, f64>,
    /// Horizon of the partial-sum stability checks.
    pub stability_horizon: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            inject_fault: false,
            tolerances: BTreeMap::new(),
            stability_horizon: 2000,
        }
    }
}

const TOLERANCE_DEFAULTS: [(&str, f64); 5] = [
    ("realization", 1e-9),
    ("factorization", 1e-12),
    ("band", BAND_TOL),
    ("maxent", 1e-12),
    ("markov", 1e-14),
];

impl VerifyOptions {
    fn tol(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().unwrap_or_else(|| {
            TOLERANCE_DEFAULTS
                .iter()
                .find(|(n, _)| *n == name)
                .map_or(0.0, |(_, v)| *v)
        })
    }

    fn check_names(&self) -> Result<()> {
        for name in self.tolerances.keys() {
            if !TOLERANCE_DEFAULTS.iter().any(|(n, _)| n == name) {
                return Err(Error::InvalidArgument(format!("unknown tolerance '{name}'")));
            }
        }
        Ok(())
    }
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn max_kernel_gap(spec: &KernelSpec, m: &StateSpaceModel, horizon: usize) -> Result<f64> {
    let table = SiTable::new(m, horizon);
    let mut worst: f64 = 0.0;
    for t in 0..=horizon {
        for s in 0..=horizon {
            worst = worst.max((spec.eval(t, s)? - table.eval(t, s)).abs());
        }
    }
    Ok(worst)
}

/// Runs every registered structural check and collects the results.
pub fn run_verification(opts: &VerifyOptions) -> Result<VerificationReport> {
    opts.check_names()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut checks = Vec::new();

    // amplitude-modulated factorization k = b(t) b(s) k^c(t - s)
    let families = [
        KernelSpec::ss(1.7, 0.93)?,
        KernelSpec::dc(0.8, 0.9, -0.6)?,
        KernelSpec::tc(1.2, 0.85)?,
        KernelSpec::amls2os(1.0, 0.9, 0.7)?,
        KernelSpec::amls2od(1.0, 0.92, 0.4, 0.5)?,
    ];
    for spec in &families {
        let mut worst: f64 = 0.0;
        for t in 0..40 {
            for s in 0..40 {
                let (amp, corr) = spec.amls_parts(t, s)?;
                worst = worst.max((amp * corr - spec.eval(t, s)?).abs());
            }
        }
        let mut p = spec.hyperparams().to_map();
        p.insert("horizon".into(), 40.0);
        checks.push(CheckResult {
            check_name: format!("amls_factorization_{}", spec.family_name()),
            params: p,
            pass: worst <= opts.tol("factorization"),
            metric: worst,
        });
    }

    // summable envelopes give converging partial sums; bare stationary ones do not
    let horizon = opts.stability_horizon;
    for spec in families.iter().chain([
        &KernelSpec::amls(
            DecayEnvelope::exp_osc(1.0, 0.95, std::f64::consts::PI / 5.0, 1e-6)?,
            StationaryCorr::Matern {
                beta: 0.5,
                nu: crate::kernel::MaternOrder::ThreeHalves,
            },
        )?,
    ]) {
        let r = stability_partial_sums(spec, horizon)?;
        let mut p = spec.hyperparams().to_map();
        p.insert("t_max".into(), horizon as f64);
        checks.push(CheckResult {
            check_name: format!("partial_sums_converge_{}", spec.family_name()),
            params: p,
            pass: r.verdict == Verdict::Converging,
            metric: r.tail_ratio,
        });
    }
    let bare = KernelSpec::Stationary(StationaryCorr::Dc { rho: 0.5 });
    let r = stability_partial_sums(&bare, horizon)?;
    checks.push(CheckResult {
        check_name: "partial_sums_diverge_stationary".into(),
        params: params(&[("rho", 0.5), ("t_max", horizon as f64)]),
        pass: r.verdict == Verdict::Diverging,
        metric: r.tail_ratio,
    });

    // state-space realizations reproduce the DC and SS kernels
    let mut worst_dc: f64 = 0.0;
    let mut worst_ss: f64 = 0.0;
    for _ in 0..20 {
        let c = rng.gen_range(0.1..3.0);
        let lambda = rng.gen_range(0.5..0.99);
        let rho = rng.gen_range(-0.95..0.95);
        let mut m = realize_dc_dt(c, lambda, rho)?;
        if opts.inject_fault {
            m.d *= 1.01;
        }
        worst_dc = worst_dc.max(max_kernel_gap(&KernelSpec::dc(c, lambda, rho)?, &m, 50)?);
        let m = realize_ss_dt(c, lambda)?;
        worst_ss = worst_ss.max(max_kernel_gap(&KernelSpec::ss(c, lambda)?, &m, 50)?);
    }
    let tol = opts.tol("realization");
    checks.push(CheckResult {
        check_name: "realization_equivalence_dc".into(),
        params: params(&[("draws", 20.0), ("horizon", 50.0)]),
        pass: worst_dc <= tol,
        metric: worst_dc,
    });
    checks.push(CheckResult {
        check_name: "realization_equivalence_ss".into(),
        params: params(&[("draws", 20.0), ("horizon", 50.0)]),
        pass: worst_ss <= tol,
        metric: worst_ss,
    });

    // sufficient SI stability condition
    let lambda = 0.9f64.sqrt();
    let ss_status = si_stability_check(&realize_ss_dt(1.0, lambda)?);
    checks.push(CheckResult {
        check_name: "si_stability_ss_satisfied".into(),
        params: params(&[("c", 1.0), ("lambda", lambda)]),
        pass: ss_status == SiStability::Satisfied,
        metric: f64::from(u8::from(ss_status == SiStability::Satisfied)),
    });
    let dc_status = si_stability_check(&realize_dc_dt(1.0, 0.9, 0.5)?);
    let violated = dc_status == SiStability::Violated(StabilityClause::EnvelopeDecay);
    checks.push(CheckResult {
        check_name: "si_stability_dc_violated".into(),
        params: params(&[("c", 1.0), ("lambda", 0.9), ("rho", 0.5)]),
        pass: violated,
        metric: f64::from(u8::from(violated)),
    });

    // first-order Markov structure of DC
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let c = rng.gen_range(0.1..3.0);
        let lambda = rng.gen_range(0.1..0.999);
        let rho = rng.gen_range(-1.0..=1.0);
        let t = rng.gen_range(0..30usize);
        let s = rng.gen_range(0..=t);
        worst = worst.max(markov_residual_check(c, lambda, rho, t, s)?.abs());
    }
    checks.push(CheckResult {
        check_name: "markov_residual_dc".into(),
        params: params(&[("draws", 50.0), ("t_max", 30.0)]),
        pass: worst <= opts.tol("markov"),
        metric: worst,
    });
    let ss_resid = markov_residual(&KernelSpec::ss(1.0, 0.9)?, 0.9f64.powi(4), 5, 3)?.abs();
    checks.push(CheckResult {
        check_name: "markov_residual_ss_nonzero".into(),
        params: params(&[("c", 1.0), ("lambda", 0.9), ("t", 5.0), ("s", 3.0)]),
        pass: ss_resid > 1e3 * opts.tol("markov"),
        metric: ss_resid,
    });

    // banded inverses
    let band_tol = opts.tol("band");
    let k = gram(&KernelSpec::dc(1.0, 0.9, 0.5)?, &range_grid(1, 10))?;
    let r = banded_inverse_check(&k, 1, band_tol)?;
    checks.push(CheckResult {
        check_name: "banded_inverse_dc".into(),
        params: params(&[("c", 1.0), ("lambda", 0.9), ("rho", 0.5), ("bandwidth", 1.0)]),
        pass: r.pass,
        metric: r.max_offband / r.scale,
    });
    let m = StateSpaceModel::two_real_poles(
        1.0,
        0.5,
        0.9,
        nalgebra::DMatrix::identity(2, 2),
        DecayEnvelope::exp(1.0, 0.8)?,
    )?;
    let k = gram(&KernelSpec::si_state_space(m), &range_grid(1, 10))?;
    let (kinv, _) = spd_inverse(&k, "second-order Gram inverse")?;
    let bw = measured_bandwidth(&kinv, band_tol);
    checks.push(CheckResult {
        check_name: "banded_inverse_second_order_si".into(),
        params: params(&[("bbar", 1.0), ("a1", 0.5), ("a2", 0.9), ("env_lambda", 0.8)]),
        pass: bw == 2,
        metric: bw as f64,
    });

    // variance identity of the DC innovations
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let c = rng.gen_range(0.1..3.0);
        let lambda = rng.gen_range(0.1..0.999);
        let rho = rng.gen_range(-0.999..0.999);
        worst = worst.max(maxent_dc_variance(c, lambda, rho, 30)?);
    }
    checks.push(CheckResult {
        check_name: "maxent_dc_variance".into(),
        params: params(&[("draws", 50.0), ("s_max", 30.0)]),
        pass: worst <= opts.tol("maxent"),
        metric: worst,
    });

    Ok(VerificationReport {
        seed: opts.seed,
        fault_injected: opts.inject_fault,
        checks,
    })
}
