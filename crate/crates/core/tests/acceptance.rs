//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line to stderr,
//! bypassing the harness capture so the lines show up in normal runs.

use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kernelreg::analysis::{
    banded_inverse_check, maxent_dc_variance, measured_bandwidth, si_stability_check,
    stability_partial_sums, SiStability, Verdict, BAND_TOL,
};
use kernelreg::benchmark::{run_suite, SuiteConfig};
use kernelreg::estimator::{estimate_impulse, regressor_matrix, DataSet};
use kernelreg::kernel::range_grid;
use kernelreg::linalg::spd_inverse;
use kernelreg::statespace::{
    realize_dc_dt, realize_ss_dt, si2od_closed, si2od_quadrature, si_kernel_dt,
    simulate_covariance, QuadConfig,
};
use kernelreg::{gram, DecayEnvelope, KernelSpec, SecondOrderNominal, StateSpaceModel, StationaryCorr};

fn report(id: u32, name: &str, pass: bool, detail: &str, elapsed: Duration, budget: Duration) {
    let within = elapsed <= budget;
    let _ = writeln!(
        std::io::stderr(),
        "criterion {id} [{name}]: {} {detail} ({:.2}s, budget {:.0}s{})",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64(),
        if within { "" } else { ", over budget" }
    );
    assert!(pass, "criterion {id} failed: {detail}");
}

#[test]
fn c1_realization_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut dc_gap, mut ss_gap) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let c = rng.gen_range(0.1..5.0);
        let lambda = rng.gen_range(0.05..0.99);
        let rho = rng.gen_range(-0.99..0.99);
        let dc = KernelSpec::dc(c, lambda, rho).unwrap();
        let ss = KernelSpec::ss(c, lambda).unwrap();
        let mdc = realize_dc_dt(c, lambda, rho).unwrap();
        let mss = realize_ss_dt(c, lambda).unwrap();
        for t in 0..=50 {
            for s in 0..=50 {
                dc_gap = dc_gap.max((dc.eval(t, s).unwrap() - si_kernel_dt(&mdc, t, s)).abs());
                ss_gap = ss_gap.max((ss.eval(t, s).unwrap() - si_kernel_dt(&mss, t, s)).abs());
            }
        }
    }
    report(
        1,
        "realization equivalence",
        dc_gap <= 1e-9 && ss_gap <= 1e-9,
        &format!("max gap dc={dc_gap:.2e} ss={ss_gap:.2e}"),
        start.elapsed(),
        Duration::from_secs(5),
    );
}

#[test]
fn c2_banded_inverse() {
    let start = Instant::now();
    let dc = KernelSpec::dc(1.0, 0.8, 0.6).unwrap();
    let band = banded_inverse_check(&gram(&dc, &range_grid(1, 10)).unwrap(), 1, BAND_TOL).unwrap();

    let m = StateSpaceModel::two_real_poles(
        1.0,
        0.5,
        0.9,
        DMatrix::identity(2, 2),
        DecayEnvelope::exp(1.0, 0.8).unwrap(),
    )
    .unwrap();
    let k = gram(&KernelSpec::si_state_space(m), &range_grid(1, 10)).unwrap();
    let (kinv, _) = spd_inverse(&k, "test").unwrap();
    let bw = measured_bandwidth(&kinv, BAND_TOL);
    report(
        2,
        "banded inverse",
        band.pass && bw == 2,
        &format!(
            "dc off-band/scale={:.2e}, second-order bandwidth={bw}",
            band.max_offband / band.scale
        ),
        start.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn c3_maxent_variance() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let c = rng.gen_range(0.1..5.0);
        let lambda = rng.gen_range(0.05..0.99);
        let rho = rng.gen_range(-0.99..0.99);
        worst = worst.max(maxent_dc_variance(c, lambda, rho, 30).unwrap());
    }
    report(
        3,
        "maxent variance identity",
        worst <= 1e-12,
        &format!("max deviation={worst:.2e}"),
        start.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn c4_si2od_closed_vs_quadrature() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (w0, xi, gamma) in [(1.0, 0.3, 0.5), (2.0, 0.1, 0.2), (1.0, 0.7, 0.7 + 1e-10)] {
        let p = SecondOrderNominal::new(w0, xi, gamma).unwrap();
        for t in 0..=10 {
            for s in 0..=10 {
                let (t, s) = (t as f64, s as f64);
                let closed = si2od_closed(&p, t, s);
                let quad = si2od_quadrature(&p, t, s, QuadConfig::default()).unwrap();
                let rel = if quad == 0.0 {
                    closed.abs()
                } else {
                    ((closed - quad) / quad).abs()
                };
                worst = worst.max(rel);
            }
        }
    }
    report(
        4,
        "second-order closed form vs quadrature",
        worst < 1e-6,
        &format!("max rel err={worst:.2e}"),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn c5_monte_carlo_covariance() {
    let start = Instant::now();
    let horizon = 10;
    let n_paths = 200_000;
    let mut worst = 0.0f64;
    let models = [
        realize_dc_dt(1.5, 0.8, 0.4).unwrap(),
        StateSpaceModel::two_real_poles(
            1.0,
            0.5,
            0.9,
            DMatrix::identity(2, 2),
            DecayEnvelope::exp(1.0, 0.8).unwrap(),
        )
        .unwrap(),
    ];
    for (i, m) in models.iter().enumerate() {
        let mc = simulate_covariance(m, horizon, n_paths, 500 + i as u64).unwrap();
        for t in 0..horizon {
            for s in 0..horizon {
                let z = (mc.cov[(t, s)] - si_kernel_dt(m, t, s)).abs() / mc.std_err[(t, s)];
                worst = worst.max(z);
            }
        }
    }
    report(
        5,
        "Monte Carlo covariance",
        worst <= 4.0,
        &format!("max |z|={worst:.2} over 2 models"),
        start.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn c6_stability_suite() {
    let start = Instant::now();
    let t_max = 10_000;
    let stable = [
        KernelSpec::ss(1.0, 0.9).unwrap(),
        KernelSpec::dc(1.0, 0.9, 0.7).unwrap(),
        KernelSpec::tc(1.0, 0.9).unwrap(),
        KernelSpec::amls2os(1.0, 0.9, 0.5).unwrap(),
        KernelSpec::amls2od(1.0, 0.9, 0.4, 0.6).unwrap(),
        KernelSpec::amls(
            DecayEnvelope::exp(1.0, 0.95).unwrap(),
            StationaryCorr::SquaredExponential { beta: 0.1 },
        )
        .unwrap(),
    ];
    let mut bad = Vec::new();
    for spec in &stable {
        let r = stability_partial_sums(spec, t_max).unwrap();
        if r.verdict != Verdict::Converging {
            bad.push(format!("{} {:?}", spec.family_name(), r.verdict));
        }
    }
    for corr in [StationaryCorr::Dc { rho: 0.5 }, StationaryCorr::SquaredExponential { beta: 0.2 }] {
        let r = stability_partial_sums(&KernelSpec::Stationary(corr), t_max).unwrap();
        if r.verdict != Verdict::Diverging {
            bad.push(format!("stationary {:?}", r.verdict));
        }
    }
    let ss = si_stability_check(&realize_ss_dt(1.0, 0.9).unwrap());
    let dc = si_stability_check(&realize_dc_dt(1.0, 0.9, 0.7).unwrap());
    if ss != SiStability::Satisfied {
        bad.push(format!("ss realization {ss:?}"));
    }
    if !matches!(dc, SiStability::Violated(_)) {
        bad.push(format!("dc realization {dc:?}"));
    }
    report(
        6,
        "stability suite",
        bad.is_empty(),
        &if bad.is_empty() {
            "8 partial-sum verdicts and 2 SI checks as expected".to_string()
        } else {
            bad.join("; ")
        },
        start.elapsed(),
        Duration::from_secs(10),
    );
}

fn bench_families() -> [&'static str; 6] {
    ["tc", "dc", "amls2os", "amls2od", "si2od", "oracle"]
}

#[test]
fn c7_benchmark_desk_scale() {
    let start = Instant::now();
    let r = run_suite(&SuiteConfig::new(50, &bench_families(), 2024)).unwrap();
    let mean = |f: &str| r.summary.family(f).and_then(|s| s.mean_fit).unwrap_or(f64::NAN);
    let oracle = mean("oracle");
    let oracle_first = bench_families()[..5].iter().all(|f| oracle > mean(f));
    let gap = mean("si2od") - mean("tc");
    let means: Vec<String> = bench_families().iter().map(|f| format!("{f}={:.1}", mean(f))).collect();
    report(
        7,
        "benchmark, 50 systems",
        gap >= 2.0 && oracle_first,
        &format!("si2od-tc={gap:.2}, oracle first={oracle_first}; {}", means.join(" ")),
        start.elapsed(),
        Duration::from_secs(15 * 60),
    );
}

#[test]
#[ignore = "long run: 200 systems"]
fn c8_benchmark_full_scale() {
    let start = Instant::now();
    let r = run_suite(&SuiteConfig::new(200, &bench_families(), 2024)).unwrap();
    let mean = |f: &str| r.summary.family(f).and_then(|s| s.mean_fit).unwrap_or(f64::NAN);
    let target = [("tc", 47.5), ("dc", 50.0), ("amls2os", 48.4), ("amls2od", 49.7), ("si2od", 53.3)];
    let mut detail = Vec::new();
    let mut within = true;
    for (f, t) in target {
        let m = mean(f);
        within &= (m - t).abs() <= 5.0;
        detail.push(format!("{f}={m:.1} (ref {t})"));
    }
    let ordered = mean("si2od") > mean("tc");
    report(
        8,
        "benchmark, 200 systems",
        within && ordered,
        &format!("{}; si2od>tc={ordered}", detail.join(" ")),
        start.elapsed(),
        Duration::from_secs(4 * 3600),
    );
}

/// `argmin ||y - Phi g||^2 + sigma2 g' K^-1 g` by the normal equations.
fn dense_qp(phi: &DMatrix<f64>, y: &DVector<f64>, k: &DMatrix<f64>, sigma2: f64) -> DVector<f64> {
    let kinv = k.clone().try_inverse().unwrap();
    let h = phi.transpose() * phi + kinv * sigma2;
    h.lu().solve(&(phi.transpose() * y)).unwrap()
}

fn problem() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, f64, f64)> {
    (20usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-2.0..2.0f64, n),
            prop::collection::vec(-2.0..2.0f64, n),
            prop::collection::vec(-2.0..2.0f64, n),
            0.3..0.9f64,
            0.01..2.0f64,
        )
    })
}

#[test]
fn c9_estimator_oracle() {
    let start = Instant::now();
    let taps = 10;
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..50 {
        let n = rng.gen_range(15..60);
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let spec = KernelSpec::dc(rng.gen_range(0.5..3.0), rng.gen_range(0.5..0.95), rng.gen_range(-0.8..0.8)).unwrap();
        let sigma2 = rng.gen_range(0.01..1.0);
        let data = DataSet::new(u.clone(), y.clone()).unwrap();
        let g = estimate_impulse(&spec, sigma2, &data, taps).unwrap();
        let k = gram(&spec, &range_grid(1, taps)).unwrap();
        let qp = dense_qp(&regressor_matrix(&u, taps), &DVector::from_vec(y), &k, sigma2);
        worst = worst.max((&g - &qp).norm() / qp.norm());
    }

    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let props = runner.run(&problem(), |(u, y1, y2, lambda, a)| {
        let spec = KernelSpec::tc(1.0, lambda).unwrap();
        let est = |y: &[f64], s2: f64| {
            estimate_impulse(&spec, s2, &DataSet::new(u.clone(), y.to_vec()).unwrap(), taps).unwrap()
        };
        // linear in the data
        let mix: Vec<f64> = y1.iter().zip(&y2).map(|(p, q)| p + a * q).collect();
        let lhs = est(&mix, 0.5);
        let rhs = est(&y1, 0.5) + est(&y2, 0.5) * a;
        prop_assert!((&lhs - &rhs).norm() <= 1e-9 * (1.0 + rhs.norm()));

        // more noise, more shrinkage in the kernel norm and a worse data fit
        let k = gram(&spec, &range_grid(1, taps)).unwrap();
        let chol = k.cholesky().unwrap();
        let phi = regressor_matrix(&u, taps);
        let yv = DVector::from_column_slice(&y1);
        let mut prev: Option<(f64, f64)> = None;
        for s2 in [0.01, 0.1, 1.0, 10.0] {
            let g = est(&y1, s2);
            let knorm = g.dot(&chol.solve(&g));
            let resid = (&yv - &phi * &g).norm_squared();
            if let Some((pk, pr)) = prev {
                prop_assert!(knorm <= pk * (1.0 + 1e-9) + 1e-12);
                prop_assert!(resid >= pr * (1.0 - 1e-9) - 1e-12);
            }
            prev = Some((knorm, resid));
        }
        Ok(())
    });
    let pass = worst <= 1e-6 && props.is_ok();
    report(
        9,
        "estimator oracle equivalence",
        pass,
        &format!(
            "max rel err vs dense solve={worst:.2e}, property cases={}",
            match &props {
                Ok(()) => "1000 ok".to_string(),
                Err(e) => format!("failed: {e}"),
            }
        ),
        start.elapsed(),
        Duration::from_secs(30),
    );
}
