//! Continuous-time SI kernels by adaptive Gauss-Kronrod quadrature.

use nalgebra::{DMatrix, DVector};

use super::SecondOrderNominal;
use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            abs_tol: 1e-9,
            rel_tol: 1e-12,
            max_intervals: 20_000,
        }
    }
}

fn g7k15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(mid);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(mid - dx) + f(mid + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive G7K15 integral of `f` over `[a, b]`; returns the value and the
/// summed error estimate.
pub fn gauss_kronrod(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    cfg: QuadConfig,
) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let (v, e) = g7k15(&mut f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    loop {
        let total: f64 = intervals.iter().map(|x| x.2).sum();
        let err: f64 = intervals.iter().map(|x| x.3).sum();
        if err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
            return Ok((total, err));
        }
        if intervals.len() >= cfg.max_intervals {
            return Err(Error::Numerical {
                context: format!("quadrature did not converge (error estimate {err:e})"),
                jitter: 0.0,
            });
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let m = 0.5 * (lo + hi);
        let (vl, el) = g7k15(&mut f, lo, m);
        let (vr, er) = g7k15(&mut f, m, hi);
        intervals.push((lo, m, vl, el));
        intervals.push((m, hi, vr, er));
    }
}

/// Covariance of the continuous-time SI model
/// `dz = A z dt + B b(tau) dw`, `g = C z`, `z(0) ~ N(0, Q)` at times `t, s`:
/// `C e^{At} Q e^{A^T s} C^T + int_0^{min(t,s)} b(tau)^2 h(t - tau) h(s - tau) dtau`
/// with `h(x) = C e^{Ax} B`.
#[allow(clippy::too_many_arguments)]
pub fn si_kernel_ct_quadrature(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    q: &DMatrix<f64>,
    envelope: impl Fn(f64) -> f64,
    t: f64,
    s: f64,
    cfg: QuadConfig,
) -> Result<f64> {
    let phi = |x: f64| (a * x).exp();
    let ct = phi(t).tr_mul(c);
    let cs = phi(s).tr_mul(c);
    let initial = ct.dot(&(q * cs));
    let h = |x: f64| c.dot(&(phi(x) * b));
    let m = t.min(s);
    let (forced, _) = gauss_kronrod(
        |tau| {
            let e = envelope(tau);
            e * e * h(t - tau) * h(s - tau)
        },
        0.0,
        m,
        cfg,
    )?;
    Ok(initial + forced)
}

/// Numerical reference for the second-order SI kernel.
pub fn si2od_quadrature(p: &SecondOrderNominal, t: f64, s: f64, cfg: QuadConfig) -> Result<f64> {
    let (a, b, c) = p.ct_matrices();
    let q = DMatrix::identity(2, 2);
    let gamma = p.gamma;
    si_kernel_ct_quadrature(&a, &b, &c, &q, |tau| (-gamma * tau).exp(), t, s, cfg)
}
