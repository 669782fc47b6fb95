//! Monte Carlo study on randomly generated lightly damped systems.

mod suite;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub use suite::{
    run_suite, FamilySummary, SuiteConfig, SuiteResult, SuiteSummary, TrialRecord,
};

use crate::error::Result;
use crate::estimator::{DataSet, FIR_TAPS};

/// Number of samples in each generated data set.
pub const DATA_LEN: usize = 210;

/// `splitmix64` finalizer, used to derive independent seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `tag` of item `index` under a master seed.
pub fn derive_seed(master: u64, index: u64, tag: u64) -> u64 {
    mix64(mix64(mix64(master) ^ index) ^ tag)
}

/// Second-order resonant section `K (q + 0.9) / ((q - p)(q - p*))`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Section {
    pub gain: f64,
    pub pole_re: f64,
    pub pole_im: f64,
}

impl Section {
    pub fn pole(&self) -> Complex64 {
        Complex64::new(self.pole_re, self.pole_im)
    }

    fn num_den(&self) -> (Vec<f64>, Vec<f64>) {
        let p = self.pole();
        (
            vec![0.0, self.gain, 0.9 * self.gain],
            vec![1.0, -2.0 * p.re, p.norm_sqr()],
        )
    }
}

/// Random strictly proper fourth-order block with unit DC gain, as
/// coefficients of `q^{-1}`: `num[0] = 0`, `den[0] = 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailBlock {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    pub poles: Vec<(f64, f64)>,
    pub zeros: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestSystem {
    pub seed: u64,
    pub sections: Vec<Section>,
    pub tail: TailBlock,
    /// True response on lags `1..=100`.
    pub g0: Vec<f64>,
    /// Response on lags `0..DATA_LEN`, used to simulate outputs.
    pub response: Vec<f64>,
}

impl TestSystem {
    /// All poles other than the one at the origin from the `(q + 0.99)/q` factor.
    pub fn poles(&self) -> Vec<Complex64> {
        let mut out = Vec::new();
        for s in &self.sections {
            out.push(s.pole());
            out.push(s.pole().conj());
        }
        out.extend(self.tail.poles.iter().map(|&(re, im)| Complex64::new(re, im)));
        out
    }
}

/// Impulse response of `num(q^{-1}) / den(q^{-1})` on lags `0..len`.
pub fn impulse_response(num: &[f64], den: &[f64], len: usize) -> Vec<f64> {
    let mut h = vec![0.0; len];
    for k in 0..len {
        let mut v = num.get(k).copied().unwrap_or(0.0);
        for j in 1..den.len().min(k + 1) {
            v -= den[j] * h[k - j];
        }
        h[k] = v / den[0];
    }
    h
}

/// Monic polynomial in `x` with the given roots, highest power first.
fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, v) in c.iter().enumerate() {
            next[i] += v;
            next[i + 1] -= v * r;
        }
        c = next;
    }
    c.iter().map(|z| z.re).collect()
}

fn uniform_in_disk(rng: &mut ChaCha8Rng, radius: f64) -> Complex64 {
    let r = radius * rng.gen::<f64>().sqrt();
    let th = rng.gen_range(0.0..PI);
    Complex64::from_polar(r, th)
}

/// Roots of a random real polynomial of degree `n` inside `radius`: a random
/// number of conjugate pairs, the rest real.
fn random_roots(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<Complex64> {
    let pairs = rng.gen_range(0..=n / 2);
    let mut roots = Vec::with_capacity(n);
    for _ in 0..pairs {
        let z = uniform_in_disk(rng, radius);
        roots.push(z);
        roots.push(z.conj());
    }
    while roots.len() < n {
        roots.push(Complex64::new(rng.gen_range(-radius..radius), 0.0));
    }
    roots
}

fn gen_tail(rng: &mut ChaCha8Rng) -> TailBlock {
    loop {
        let poles = random_roots(rng, 4, 0.95);
        let zeros = random_roots(rng, 3, 1.0);
        let den = poly_from_roots(&poles);
        let b = poly_from_roots(&zeros);
        let dc_num: f64 = b.iter().sum();
        let dc_den: f64 = den.iter().sum();
        if dc_num.abs() < 1e-3 || !poles.iter().all(|p| p.norm() < 0.95) {
            continue;
        }
        let k = dc_den / dc_num;
        let mut num = vec![0.0];
        num.extend(b.iter().map(|v| k * v));
        return TailBlock {
            num,
            den,
            poles: poles.iter().map(|z| (z.re, z.im)).collect(),
            zeros: zeros.iter().map(|z| (z.re, z.im)).collect(),
        };
    }
}

/// Random lightly damped system: `(q + 0.99)/q` times the sum of `N_r`
/// resonant sections and a random fourth-order block.
pub fn gen_system(seed: u64) -> TestSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_r: usize = rng.gen_range(3..=8);
    let phi0 = rng.gen_range(0.0..PI / 2.0);
    let sections: Vec<Section> = (0..n_r)
        .map(|i| {
            let gain = rng.gen_range(2.0..10.0);
            let rho = rng.gen_range(0.8..0.99);
            let angle = phi0 + PI * i as f64 / (2.0 * n_r as f64);
            let p = Complex64::from_polar(rho, angle);
            Section {
                gain,
                pole_re: p.re,
                pole_im: p.im,
            }
        })
        .collect();
    let tail = gen_tail(&mut rng);

    let len = DATA_LEN;
    let mut sum = impulse_response(&tail.num, &tail.den, len);
    for s in &sections {
        let (num, den) = s.num_den();
        for (acc, v) in sum.iter_mut().zip(impulse_response(&num, &den, len)) {
            *acc += v;
        }
    }
    let response: Vec<f64> = (0..len)
        .map(|k| sum[k] + if k > 0 { 0.99 * sum[k - 1] } else { 0.0 })
        .collect();
    TestSystem {
        seed,
        sections,
        tail,
        g0: response[1..=FIR_TAPS].to_vec(),
        response,
    }
}

/// Digital biquad `(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Clone, Copy, Debug)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

/// Order of the input low-pass filter.
pub const INPUT_FILTER_ORDER: usize = 8;
/// Input cutoff as a fraction of the Nyquist frequency.
pub const INPUT_CUTOFF: f64 = 0.95;
const INPUT_WARMUP: usize = 500;

/// Butterworth low-pass as cascaded bilinear-transformed biquads.
fn butterworth_lowpass(order: usize, cutoff: f64) -> Vec<Biquad> {
    let k = (PI * cutoff / 2.0).tan();
    (0..order / 2)
        .map(|i| {
            let theta = PI * (2 * i + 1) as f64 / (2 * order) as f64;
            let q = 1.0 / (2.0 * theta.sin());
            let norm = 1.0 / (1.0 + k / q + k * k);
            let b0 = k * k * norm;
            Biquad {
                b: [b0, 2.0 * b0, b0],
                a: [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm],
            }
        })
        .collect()
}

fn filter(sections: &[Biquad], x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    for s in sections {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in y.iter_mut() {
            // transposed direct form II
            let out = s.b[0] * *v + z1;
            z1 = s.b[1] * *v - s.a[0] * out + z2;
            z2 = s.b[2] * *v - s.a[1] * out;
            *v = out;
        }
    }
    y
}

/// Band-limited Gaussian input of length `n` with unit sample variance.
pub fn gen_input(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..n + INPUT_WARMUP)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let filtered = filter(&butterworth_lowpass(INPUT_FILTER_ORDER, INPUT_CUTOFF), &white);
    let mut u = filtered[INPUT_WARMUP..].to_vec();
    let mean = u.iter().sum::<f64>() / n as f64;
    let var = u.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if var > 0.0 {
        let sd = var.sqrt();
        for v in u.iter_mut() {
            *v /= sd;
        }
    }
    u
}

/// `y(t) = sum_{tau >= 1} g(tau) u(t - tau)` with zero input before `t = 1`.
pub fn simulate_output(response: &[f64], u: &[f64]) -> Vec<f64> {
    (0..u.len())
        .map(|t| {
            (1..=t)
                .map(|tau| response.get(tau).copied().unwrap_or(0.0) * u[t - tau])
                .sum()
        })
        .collect()
}

fn sample_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Data set of length 210 whose noise standard deviation is `U[0.5, 1]`
/// times that of the noise-free output.
pub fn gen_dataset(sys: &TestSystem, seed: u64) -> Result<DataSet> {
    dataset_with_noise(sys, seed, None)
}

/// Same input as [`gen_dataset`] with the noise switched off.
pub fn gen_dataset_noise_free(sys: &TestSystem, seed: u64) -> Result<DataSet> {
    dataset_with_noise(sys, seed, Some(0.0))
}

fn dataset_with_noise(sys: &TestSystem, seed: u64, ratio: Option<f64>) -> Result<DataSet> {
    let u = gen_input(derive_seed(seed, 0, 1), DATA_LEN);
    let clean = simulate_output(&sys.response, &u);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, 2));
    let drawn = rng.gen_range(0.5..1.0);
    let ratio = ratio.unwrap_or(drawn);
    let sd = ratio * sample_std(&clean);
    let y: Vec<f64> = clean
        .iter()
        .map(|v| {
            let e: f64 = StandardNormal.sample(&mut rng);
            v + sd * e
        })
        .collect();
    let mut data = DataSet::new(u, y)?.with_g0(sys.g0.clone());
    data.meta.insert("system_seed".into(), sys.seed.to_string());
    data.meta.insert("data_seed".into(), seed.to_string());
    data.meta.insert("noise_ratio".into(), ratio.to_string());
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn systems_are_stable_and_seeded() {
        for seed in 0..200 {
            let sys = gen_system(seed);
            assert!(sys.poles().iter().all(|p| p.norm() < 1.0));
            assert!((3..=8).contains(&sys.sections.len()));
            assert!(sys.g0.iter().all(|v| v.is_finite()));
        }
        let a = gen_system(7);
        let b = gen_system(7);
        assert_eq!(a.g0, b.g0);
    }

    #[test]
    fn tail_has_unit_dc_gain() {
        let sys = gen_system(3);
        let h = impulse_response(&sys.tail.num, &sys.tail.den, 3000);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        assert_eq!(h[0], 0.0);
    }

    #[test]
    fn impulse_response_of_first_order() {
        let h = impulse_response(&[0.0, 1.0], &[1.0, -0.5], 5);
        assert_eq!(h, vec![0.0, 1.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn input_unit_variance_and_seeded() {
        let u = gen_input(5, DATA_LEN);
        assert_eq!(u.len(), DATA_LEN);
        assert!((sample_std(&u) - 1.0).abs() < 1e-12);
        assert_eq!(u, gen_input(5, DATA_LEN));
    }

    #[test]
    fn noise_free_output_is_convolution() {
        let sys = gen_system(11);
        let d = gen_dataset_noise_free(&sys, 4).unwrap();
        for t in 0..DATA_LEN {
            let direct: f64 = (0..t).map(|k| sys.response[t - k] * d.u[k]).sum();
            assert!((d.y[t] - direct).abs() < 1e-9 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn butterworth_unit_dc_gain() {
        let s = butterworth_lowpass(8, 0.95);
        let gain: f64 = s
            .iter()
            .map(|b| b.b.iter().sum::<f64>() / (1.0 + b.a[0] + b.a[1]))
            .product();
        assert!((gain - 1.0).abs() < 1e-12);
    }
}
