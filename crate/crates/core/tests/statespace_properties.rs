use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

use kernelreg::analysis::{banded_inverse_check, maxent_dc_variance, markov_residual_check, BAND_TOL};
use kernelreg::kernel::range_grid;
use kernelreg::statespace::{lyapunov_dt, si_kernel_dt, SiTable};
use kernelreg::{gram, DecayEnvelope, KernelSpec, StateSpaceModel};

/// Covariance of `g(t) = C x(t) + D u(t)`, `x(t+1) = A x(t) + B u(t)`,
/// `u(t) = b(t) w(t)`, `x(0) ~ N(0, Q)`, summed term by term.
fn brute_force(m: &StateSpaceModel, t: usize, s: usize) -> f64 {
    let pow = |k: usize| (0..k).fold(DMatrix::identity(m.order(), m.order()), |acc, _| &m.a * acc);
    let ct = |k: usize| pow(k).transpose() * &m.c; // (C A^k)'
    let b2 = |i: usize| m.envelope.at(i).powi(2);
    let mut v = ct(t).dot(&(&m.q * ct(s)));
    for i in 0..t.min(s) {
        v += b2(i) * ct(t - 1 - i).dot(&m.b) * ct(s - 1 - i).dot(&m.b);
    }
    if s < t {
        v += m.d * b2(s) * ct(t - 1 - s).dot(&m.b);
    }
    if t < s {
        v += m.d * b2(t) * ct(s - 1 - t).dot(&m.b);
    }
    if t == s {
        v += m.d * m.d * b2(t);
    }
    v
}

fn model(n: usize) -> impl Strategy<Value = StateSpaceModel> {
    (
        prop::collection::vec(-0.6..0.6f64, n * n),
        prop::collection::vec(-1.0..1.0f64, n),
        prop::collection::vec(-1.0..1.0f64, n),
        -1.0..1.0f64,
        prop::collection::vec(-1.0..1.0f64, n * n),
        0.0..3.0f64,
        0.3..0.99f64,
    )
        .prop_map(move |(a, b, c, d, l, ec, el)| {
            let a = DMatrix::from_vec(n, n, a) / n as f64;
            let l = DMatrix::from_vec(n, n, l);
            let q = &l * l.transpose();
            StateSpaceModel::new(
                a,
                DVector::from_vec(b),
                DVector::from_vec(c),
                d,
                q,
                DecayEnvelope::exp(ec, el).unwrap(),
            )
            .unwrap()
        })
}

/// Monic polynomial coefficients `[a1, .., an]` of `prod (q - p)`.
fn monic(poles: &[Complex64]) -> Vec<f64> {
    let mut coef = vec![Complex64::new(1.0, 0.0)];
    for p in poles {
        let mut next = vec![Complex64::new(0.0, 0.0); coef.len() + 1];
        for (i, c) in coef.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * p;
        }
        coef = next;
    }
    coef[1..].iter().map(|c| c.re).collect()
}

fn stable_poles(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    (prop::collection::vec(-0.9..0.9f64, n), 0.1..0.9f64, 0.2..3.0f64, any::<bool>()).prop_map(
        move |(real, r, th, pair)| {
            if n >= 2 && pair {
                let p = Complex64::from_polar(r, th);
                let mut v = vec![p, p.conj()];
                v.extend(real[2..].iter().map(|x| Complex64::new(*x, 0.0)));
                v
            } else {
                real.iter().map(|x| Complex64::new(*x, 0.0)).collect()
            }
        },
    )
}

fn canonical(n: usize) -> impl Strategy<Value = StateSpaceModel> {
    (
        stable_poles(n),
        0.5..2.0f64,
        prop::collection::vec(-1.0..1.0f64, n * n),
        0.5..2.0f64,
        0.7..0.99f64,
    )
        .prop_map(move |(poles, bbar, l, ec, el)| {
            let l = DMatrix::from_vec(n, n, l);
            let q = &l * l.transpose() + DMatrix::identity(n, n) * 0.1;
            StateSpaceModel::controllable_canonical(bbar, &monic(&poles), q, DecayEnvelope::exp(ec, el).unwrap())
                .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_brute_force(m in (1usize..=3).prop_flat_map(model), t in 0usize..25, s in 0usize..25) {
        let expect = brute_force(&m, t, s);
        let scale = brute_force(&m, t, t).abs().max(brute_force(&m, s, s).abs()).max(1e-300);
        prop_assert!((si_kernel_dt(&m, t, s) - expect).abs() <= 1e-10 * scale.max(expect.abs()));
        let table = SiTable::new(&m, 30);
        prop_assert!((table.eval(t, s) - expect).abs() <= 1e-10 * scale.max(expect.abs()));
    }

    #[test]
    fn n_band_inverse(m in (1usize..=3).prop_flat_map(canonical)) {
        let n = m.order();
        let k = gram(&KernelSpec::si_state_space(m), &range_grid(1, 12)).unwrap();
        let r = banded_inverse_check(&k, n, BAND_TOL).unwrap();
        prop_assert!(r.pass, "order {n}: off-band {:e}, scale {:e}", r.max_offband, r.scale);
    }

    #[test]
    fn stationary_dc_factor_has_unit_variance(rho in -0.999..0.999f64) {
        let a = DMatrix::from_element(1, 1, rho);
        let b = DVector::from_element(1, (1.0 - rho * rho).sqrt());
        let q = lyapunov_dt(&a, &b).unwrap();
        prop_assert!((q[(0, 0)] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn lyapunov_residual(m in (1usize..=3).prop_flat_map(model)) {
        let q = lyapunov_dt(&m.a, &m.b).unwrap();
        let r = &m.a * &q * m.a.transpose() + &m.b * m.b.transpose() - &q;
        prop_assert!(r.abs().max() <= 1e-10 * q.abs().max().max(1.0));
    }

    #[test]
    fn dc_identities(c in 0.01..10.0f64, lambda in 1e-3..0.999f64, rho in -0.999..0.999f64) {
        prop_assert!(maxent_dc_variance(c, lambda, rho, 30).unwrap() <= 1e-12 * c.max(1.0));
        for t in 0..30 {
            for s in 0..=t {
                let r = markov_residual_check(c, lambda, rho, t, s).unwrap();
                prop_assert!(r.abs() <= 1e-14 * c.max(1.0), "t={t} s={s}: {r:e}");
            }
        }
    }
}
