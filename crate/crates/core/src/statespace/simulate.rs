use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::StateSpaceModel;
use crate::error::{Error, Result};
use crate::linalg::psd_sqrt;

/// Paths per independent random stream. Fixed so that results do not depend
/// on how shards are scheduled.
const SHARD: usize = 8192;

/// Empirical covariance of `g(0..horizon)` and the standard error of each entry.
#[derive(Clone, Debug)]
pub struct McCovariance {
    pub cov: DMatrix<f64>,
    pub std_err: DMatrix<f64>,
    pub n_paths: usize,
}

struct Moments {
    n: usize,
    s1: DVector<f64>,
    s2: DMatrix<f64>,
    s4: DMatrix<f64>,
}

impl Moments {
    fn new(h: usize) -> Self {
        Moments {
            n: 0,
            s1: DVector::zeros(h),
            s2: DMatrix::zeros(h, h),
            s4: DMatrix::zeros(h, h),
        }
    }

    fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.s1 += &o.s1;
        self.s2 += &o.s2;
        self.s4 += &o.s4;
    }
}

/// Monte Carlo estimate of the SI kernel on `0..horizon` by simulating the
/// state recursion. Deterministic for a given seed regardless of thread count.
pub fn simulate_covariance(
    m: &StateSpaceModel,
    horizon: usize,
    n_paths: usize,
    seed: u64,
) -> Result<McCovariance> {
    if n_paths < 2 {
        return Err(Error::InvalidArgument("need at least 2 paths".into()));
    }
    let n = m.order();
    let q_half = psd_sqrt(&m.q);
    let env: Vec<f64> = (0..horizon).map(|t| m.envelope.at(t)).collect();
    let shards = n_paths.div_ceil(SHARD);

    let parts: Vec<Moments> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard as u64);
            let count = SHARD.min(n_paths - shard * SHARD);
            let mut acc = Moments::new(horizon);
            let mut g = DVector::zeros(horizon);
            for _ in 0..count {
                let e = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
                let mut z = &q_half * e;
                for t in 0..horizon {
                    let w: f64 = StandardNormal.sample(&mut rng);
                    let u = env[t] * w;
                    g[t] = m.c.dot(&z) + m.d * u;
                    z = &m.a * z + &m.b * u;
                }
                acc.n += 1;
                acc.s1 += &g;
                for i in 0..horizon {
                    for j in 0..horizon {
                        let p = g[i] * g[j];
                        acc.s2[(i, j)] += p;
                        acc.s4[(i, j)] += p * p;
                    }
                }
            }
            acc
        })
        .collect();

    let mut total = Moments::new(horizon);
    for p in &parts {
        total.merge(p);
    }
    let nf = total.n as f64;
    let mean = &total.s1 / nf;
    let cov = (&total.s2 - &mean * mean.transpose() * nf) / (nf - 1.0);
    let std_err = DMatrix::from_fn(horizon, horizon, |i, j| {
        let m2 = total.s2[(i, j)] / nf;
        let var = (total.s4[(i, j)] / nf - m2 * m2).max(0.0);
        (var / nf).sqrt()
    });
    Ok(McCovariance {
        cov,
        std_err,
        n_paths: total.n,
    })
}
