use std::f64::consts::PI;

use kernelreg::benchmark::{
    gen_dataset, gen_dataset_noise_free, gen_input, gen_system, run_suite, SuiteConfig, DATA_LEN,
};

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

#[test]
fn poles_inside_unit_circle() {
    for seed in 0..1000 {
        let sys = gen_system(seed);
        assert!(sys.poles().iter().all(|p| p.norm() < 1.0), "seed {seed}");
        assert_eq!(sys.g0.len(), 100);
        assert!(sys.g0.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn responses_decay_late() {
    let decaying = (0..1000)
        .filter(|&seed| {
            let g = gen_system(seed).g0;
            let peak = |r: std::ops::Range<usize>| g[r].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            peak(79..100) <= peak(59..79)
        })
        .count();
    assert!(decaying >= 950, "{decaying} of 1000");
}

/// Mean periodogram power at normalized frequency `f` (1 = Nyquist), from
/// Hann-windowed segments.
fn band_power(x: &[f64], freqs: &[f64]) -> Vec<f64> {
    let seg = 512;
    let w: Vec<f64> = (0..seg).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / seg as f64).cos()).collect();
    let mut out = vec![0.0; freqs.len()];
    let mut count = 0;
    for chunk in x.chunks_exact(seg) {
        count += 1;
        for (f, acc) in freqs.iter().zip(out.iter_mut()) {
            let om = PI * f;
            let (mut re, mut im) = (0.0, 0.0);
            for (i, (v, wi)) in chunk.iter().zip(&w).enumerate() {
                re += v * wi * (om * i as f64).cos();
                im -= v * wi * (om * i as f64).sin();
            }
            *acc += re * re + im * im;
        }
    }
    out.iter().map(|p| p / count as f64).collect()
}

#[test]
fn input_is_band_limited() {
    let u = gen_input(42, 100_000);
    assert!((variance(&u) - 1.0).abs() < 0.05);
    let pass: Vec<f64> = (1..=40).map(|i| 0.02 * i as f64).collect();
    let stop: Vec<f64> = (0..8).map(|i| 0.97 + 0.004 * i as f64).collect();
    let avg = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let ratio_db = 10.0 * (avg(band_power(&u, &stop)) / avg(band_power(&u, &pass))).log10();
    assert!(ratio_db <= -20.0, "stopband at {ratio_db:.1} dB");
}

#[test]
fn input_variance_over_seeds() {
    for seed in 0..50 {
        assert!((variance(&gen_input(seed, DATA_LEN)) - 1.0).abs() < 0.05);
    }
}

#[test]
fn signal_to_noise_band() {
    let mut ratios = Vec::new();
    for seed in 0..300 {
        let sys = gen_system(seed);
        let noisy = gen_dataset(&sys, seed + 10_000).unwrap();
        let clean = gen_dataset_noise_free(&sys, seed + 10_000).unwrap();
        assert_eq!(noisy.u, clean.u);
        let e: Vec<f64> = noisy.y.iter().zip(&clean.y).map(|(a, b)| a - b).collect();
        let snr = variance(&clean.y) / variance(&e);
        // sampling error of a 210-sample variance stays well inside 40%
        assert!((0.6..=6.0).contains(&snr), "seed {seed}: {snr}");
        let r: f64 = noisy.meta["noise_ratio"].parse().unwrap();
        assert!((0.5..1.0).contains(&r));
        ratios.push(snr);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    // E[1 / r^2] for r ~ U[0.5, 1] is 2
    assert!((mean - 2.0).abs() < 0.25, "mean snr {mean}");
}

#[test]
fn datasets_are_seeded() {
    let sys = gen_system(9);
    let a = gen_dataset(&sys, 1).unwrap();
    let b = gen_dataset(&sys, 1).unwrap();
    assert_eq!(a.y, b.y);
    assert_ne!(a.y, gen_dataset(&sys, 2).unwrap().y);
}

#[test]
fn suite_independent_of_worker_count() {
    let run = |jobs| {
        let mut cfg = SuiteConfig::new(2, &["tc", "oracle"], 31);
        cfg.jobs = jobs;
        run_suite(&cfg).unwrap()
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.records.len(), 4);
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!((x.system_index, &x.family, x.system_seed), (y.system_index, &y.family, y.system_seed));
        assert_eq!(x.fit, y.fit);
        assert_eq!(x.nll, y.nll);
        assert_eq!(x.theta, y.theta);
        assert!(x.error.is_none());
        assert!(x.fit.unwrap() <= 100.0);
    }
    let tc = a.summary.family("tc").unwrap();
    assert_eq!(tc.n_trials, 2);

    let dir = tempfile::tempdir().unwrap();
    a.write(dir.path()).unwrap();
    for f in ["trials.csv", "summary.json", "boxplot.csv"] {
        assert!(dir.path().join(f).is_file());
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 31);
    assert_eq!(summary["not_implemented"][0], "ssp");
}

#[test]
fn single_trial_aggregate_is_that_fit() {
    let r = run_suite(&SuiteConfig::new(1, &["dc"], 4)).unwrap();
    assert_eq!(r.records.len(), 1);
    let s = r.summary.family("dc").unwrap();
    assert_eq!(s.mean_fit, r.records[0].fit);
}
