//! Empirical-Bayes hyperparameter search: multi-start Nelder-Mead in a
//! normalized box, with per-parameter log/logit/linear scaling.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{kernel_matrix, DataSet, MarginalLikelihood};
use crate::error::{Error, Result};
use crate::kernel::{HyperParams, KernelSpec, LAMBDA_MAX, XI_MAX};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamScale {
    Log,
    Logit,
    Linear,
}

#[derive(Clone, Copy, Debug)]
struct ParamBox {
    name: &'static str,
    lo: f64,
    hi: f64,
    scale: ParamScale,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl ParamBox {
    const fn new(name: &'static str, lo: f64, hi: f64, scale: ParamScale) -> Self {
        ParamBox { name, lo, hi, scale }
    }

    /// Parameter value at unit coordinate `u in [0, 1]`.
    fn value(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let v = match self.scale {
            ParamScale::Log => (self.lo.ln() + u * (self.hi.ln() - self.lo.ln())).exp(),
            ParamScale::Logit => sigmoid(logit(self.lo) + u * (logit(self.hi) - logit(self.lo))),
            ParamScale::Linear => self.lo + u * (self.hi - self.lo),
        };
        v.clamp(self.lo, self.hi)
    }
}

const C_BOX: ParamBox = ParamBox::new("c", 1e-6, 1e4, ParamScale::Log);
const LAMBDA_BOX: ParamBox = ParamBox::new("lambda", 1e-6, LAMBDA_MAX, ParamScale::Logit);
const RHO_BOX: ParamBox = ParamBox::new("rho", 1e-6, 1.0 - 1e-6, ParamScale::Logit);
const OMEGA_BOX: ParamBox = ParamBox::new("omega", 0.0, PI, ParamScale::Linear);
const ALPHA_BOX: ParamBox = ParamBox::new("alpha", 0.0, PI, ParamScale::Linear);
const OMEGA0_BOX: ParamBox = ParamBox::new("omega0", 1e-3, PI, ParamScale::Log);
const XI_BOX: ParamBox = ParamBox::new("xi", 0.0, XI_MAX, ParamScale::Linear);
const GAMMA_BOX: ParamBox = ParamBox::new("gamma", 1e-4, 5.0, ParamScale::Log);

/// A tunable kernel family.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Ss,
    Tc,
    Dc,
    Amls2Os,
    Amls2Od,
    Si2Od,
    /// The rank-1 kernel of the true response; only the noise level is tuned.
    Oracle(Arc<Vec<f64>>),
}

impl Family {
    /// Looks a family up by name; `oracle` needs the true response.
    pub fn from_name(name: &str, g0: Option<&[f64]>) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "ss" => Family::Ss,
            "tc" => Family::Tc,
            "dc" => Family::Dc,
            "amls2os" => Family::Amls2Os,
            "amls2od" => Family::Amls2Od,
            "si2od" => Family::Si2Od,
            "oracle" => {
                let g0 = g0.ok_or_else(|| {
                    Error::InvalidArgument("oracle family needs the true impulse response".into())
                })?;
                Family::Oracle(Arc::new(g0.to_vec()))
            }
            other => return Err(Error::Unsupported(format!("kernel family '{other}'"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Ss => "ss",
            Family::Tc => "tc",
            Family::Dc => "dc",
            Family::Amls2Os => "amls2os",
            Family::Amls2Od => "amls2od",
            Family::Si2Od => "si2od",
            Family::Oracle(_) => "oracle",
        }
    }

    fn boxes(&self) -> Vec<ParamBox> {
        match self {
            Family::Ss | Family::Tc => vec![C_BOX, LAMBDA_BOX],
            Family::Dc => vec![C_BOX, LAMBDA_BOX, RHO_BOX],
            Family::Amls2Os => vec![C_BOX, LAMBDA_BOX, ALPHA_BOX],
            Family::Amls2Od => vec![C_BOX, LAMBDA_BOX, OMEGA_BOX, RHO_BOX],
            Family::Si2Od => vec![C_BOX, OMEGA0_BOX, XI_BOX, GAMMA_BOX],
            Family::Oracle(_) => vec![],
        }
    }

    /// Families whose correlation sign is searched as separate starts.
    fn signed(&self) -> bool {
        matches!(self, Family::Dc | Family::Amls2Od)
    }

    fn build(&self, v: &[f64], sign: f64) -> Result<KernelSpec> {
        match self {
            Family::Ss => KernelSpec::ss(v[0], v[1]),
            Family::Tc => KernelSpec::tc(v[0], v[1]),
            Family::Dc => KernelSpec::dc(v[0], v[1], sign * v[2]),
            Family::Amls2Os => KernelSpec::amls2os(v[0], v[1], v[2]),
            Family::Amls2Od => KernelSpec::amls2od(v[0], v[1], v[2], sign * v[3]),
            Family::Si2Od => KernelSpec::si2od(v[0], v[1], v[2], v[3]),
            Family::Oracle(g0) => Ok(KernelSpec::Oracle(g0.clone())),
        }
    }

    /// Names of the searched coordinates, ending with `sigma2`.
    pub fn search_names(&self) -> Vec<&'static str> {
        let mut names: Vec<_> = self.boxes().iter().map(|b| b.name).collect();
        names.push("sigma2");
        names
    }
}

#[derive(Clone, Debug)]
pub struct TuneConfig {
    pub n_starts: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            n_starts: 8,
            max_iter: 500,
            rel_tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StartReport {
    pub index: usize,
    pub sign: f64,
    pub start_nll: f64,
    pub final_nll: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct TuneResult {
    pub spec: KernelSpec,
    pub theta: HyperParams,
    pub sigma2: f64,
    pub nll: f64,
    pub starts: Vec<StartReport>,
    /// Best objective value after each iteration of the winning start.
    pub trace: Vec<f64>,
}

struct Search<'a> {
    family: &'a Family,
    boxes: Vec<ParamBox>,
    lik: &'a MarginalLikelihood,
}

impl Search<'_> {
    fn decode(&self, u: &[f64]) -> Vec<f64> {
        self.boxes.iter().zip(u).map(|(b, &x)| b.value(x)).collect()
    }

    fn objective(&self, u: &[f64], sign: f64) -> f64 {
        let v = self.decode(u);
        let d = v.len() - 1;
        let nll = self
            .family
            .build(&v[..d], sign)
            .and_then(|spec| kernel_matrix(&spec, self.lik.taps()))
            .and_then(|k| self.lik.nll(&k, v[d]));
        match nll {
            Ok(x) if x.is_finite() => x,
            _ => f64::INFINITY,
        }
    }
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut x = 0.0;
    while i > 0 {
        x += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    x
}

/// Halton points with a random Cranley-Patterson rotation.
fn start_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    (0..n)
        .map(|i| {
            (0..dim)
                .map(|j| (radical_inverse(i as u64 + 1, PRIMES[j % PRIMES.len()]) + shift[j]).fract())
                .collect()
        })
        .collect()
}

struct NmOutcome {
    x: Vec<f64>,
    f: f64,
    f0: f64,
    iterations: usize,
    trace: Vec<f64>,
}

fn initial_simplex(x0: &[f64], step: f64) -> Vec<Vec<f64>> {
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut x = x0.to_vec();
        x[i] = if x[i] + step <= 1.0 { x[i] + step } else { x[i] - step };
        simplex.push(x);
    }
    simplex
}

/// Nelder-Mead on the unit cube; trial points are clamped to the cube.
fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], max_iter: usize, rel_tol: f64) -> NmOutcome {
    let d = x0.len();
    let clamp = |x: Vec<f64>| x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect::<Vec<_>>();
    let mut simplex = initial_simplex(x0, 0.1);
    let mut restart_from = f64::INFINITY;
    let mut vals: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    let f0 = vals[0];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        // a + t (b - a)
        a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
    };
    while iterations < max_iter {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        trace.push(vals[0]);

        let spread = (vals[d] - vals[0]).abs();
        let diameter = simplex[1..]
            .iter()
            .flat_map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if vals[0].is_finite() && (spread <= rel_tol * vals[0].abs().max(1e-12) || diameter < 1e-12) {
            // restart around the best vertex until a restart stops paying off
            if restart_from - vals[0] > rel_tol * vals[0].abs().max(1e-12) {
                restart_from = vals[0];
                simplex = initial_simplex(&simplex[0], 0.05);
                vals = simplex.iter().map(|x| f(x)).collect();
                continue;
            }
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; d];
        for x in &simplex[..d] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / d as f64;
            }
        }
        let worst = simplex[d].clone();
        let xr = clamp(combine(&centroid, &worst, -1.0));
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = clamp(combine(&centroid, &worst, -2.0));
            let fe = f(&xe);
            if fe < fr {
                simplex[d] = xe;
                vals[d] = fe;
            } else {
                simplex[d] = xr;
                vals[d] = fr;
            }
            continue;
        }
        if fr < vals[d - 1] {
            simplex[d] = xr;
            vals[d] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[d] {
            let xc = clamp(combine(&centroid, &xr, 0.5));
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = clamp(combine(&centroid, &worst, 0.5));
            let fc = f(&xc);
            (xc, fc)
        };
        if fc < fr.min(vals[d]) {
            simplex[d] = xc;
            vals[d] = fc;
            continue;
        }
        for i in 1..=d {
            simplex[i] = combine(&simplex[0], &simplex[i], 0.5);
            vals[i] = f(&simplex[i]);
        }
    }
    let best = (0..=d).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    NmOutcome {
        x: simplex[best].clone(),
        f: vals[best],
        f0,
        iterations,
        trace,
    }
}

/// Minimizes the negative log marginal likelihood jointly over the family's
/// hyperparameters and the noise variance.
pub fn tune(family: &Family, data: &DataSet, n: usize, cfg: &TuneConfig) -> Result<TuneResult> {
    if cfg.n_starts == 0 {
        return Err(Error::InvalidArgument("need at least one start".into()));
    }
    let lik = MarginalLikelihood::new(data, n)?;
    let var_y = data.output_variance();
    let scale = if var_y > 0.0 { var_y } else { 1.0 };
    // kernel scale relative to the output-to-input power ratio, so that the
    // search is invariant to the units of u and y
    let u_power = data.u.iter().map(|v| v * v).sum::<f64>() / data.len() as f64;
    let c_scale = if u_power > 0.0 { scale / u_power } else { scale };
    let mut boxes: Vec<ParamBox> = family
        .boxes()
        .into_iter()
        .map(|b| {
            if b.name == "c" {
                ParamBox { lo: b.lo * c_scale, hi: b.hi * c_scale, ..b }
            } else {
                b
            }
        })
        .collect();
    boxes.push(ParamBox::new("sigma2", 1e-8 * scale, scale, ParamScale::Log));
    let search = Search {
        family,
        boxes,
        lik: &lik,
    };
    let dim = search.boxes.len();
    let starts = start_points(cfg.n_starts, dim, cfg.seed);
    let sign_of = |i: usize| if family.signed() && i % 2 == 1 { -1.0 } else { 1.0 };

    let outcomes: Vec<NmOutcome> = starts
        .par_iter()
        .enumerate()
        .map(|(i, x0)| {
            let sign = sign_of(i);
            nelder_mead(|u| search.objective(u, sign), x0, cfg.max_iter, cfg.rel_tol)
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if o.f.is_finite() && best.is_none_or(|b| o.f < outcomes[b].f) {
            best = Some(i);
        }
    }
    let reports: Vec<StartReport> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| StartReport {
            index: i,
            sign: sign_of(i),
            start_nll: o.f0,
            final_nll: o.f,
            iterations: o.iterations,
        })
        .collect();
    let Some(b) = best else {
        return Err(Error::Tuning(format!(
            "all {} starts of the {} search failed; start objectives: {:?}",
            cfg.n_starts,
            family.name(),
            reports.iter().map(|r| r.start_nll).collect::<Vec<_>>()
        )));
    };
    let win = &outcomes[b];
    let v = search.decode(&win.x);
    let spec = family.build(&v[..dim - 1], sign_of(b))?;
    Ok(TuneResult {
        theta: spec.hyperparams(),
        spec,
        sigma2: v[dim - 1],
        nll: win.f,
        starts: reports,
        trace: win.trace.clone(),
    })
}
