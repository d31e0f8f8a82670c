//! Sample-size constants against values computed independently with mpmath
//! at 50 significant digits, plus the dominance and monotonicity laws.

#![allow(clippy::excessive_precision)]

use mfrb_core::solver::{compute_lambda_prime, compute_lambda_star, log_binomial, theta_1, theta_2, SolverParams};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

// mpmath, mp.dps = 50:
//   eps' = sqrt(2) * 0.1, delta3 = 1 / (400 * log2(800))
//   lambda' = nr (2 w + 2/3 eps') (ln C(380, 20) + ln(1/delta3)) / eps'^2
//   lambda* = 2 nr w (2 - 1/e)(2 - 1/e + eps / (3 w)) (ln C(380, 20) + ln 2 + ln 400) / eps^2
const LN_C_380_20: f64 = 75.959029678362605408472;
const LAMBDA_PRIME: f64 = 5033743.154905902199346607;
const LAMBDA_STAR: f64 = 25375912.32775368130536256;

#[test]
fn lambda_values_at_reference_point() {
    let (n, r, w, eps, k, n_r, ell) = (400, 2, 0.7, 0.1, 20, 20, 1.0);
    let d = SolverParams::new(k, eps, ell).derive(n, r, n_r);
    assert!(rel(log_binomial(380, 20).unwrap(), LN_C_380_20) < 1e-12);
    let lp = compute_lambda_prime(n, r, w, d.eps_prime, k, n_r, d.delta3).unwrap();
    let ls = compute_lambda_star(n, r, w, eps, k, n_r, ell).unwrap();
    assert!(rel(lp, LAMBDA_PRIME) < 1e-10, "lambda' = {lp}");
    assert!(rel(ls, LAMBDA_STAR) < 1e-10, "lambda* = {ls}");
}

#[test]
fn log_binomial_large_arguments() {
    // mpmath: ln C(10^9, 12345) and ln C(10^6, 400000).
    assert!(rel(log_binomial(1_000_000_000, 12_345).unwrap(), 151865.6870850002452180807) < 1e-9);
    assert!(rel(log_binomial(1_000_000, 400_000).unwrap(), 673004.5538733581803709109) < 1e-9);
}

#[test]
fn lambda_prime_monotonicity() {
    let base = |n: usize, ep: f64| compute_lambda_prime(n, 2, 0.5, ep, 10, 5, 0.01).unwrap();
    for n in [50, 100, 400, 1000] {
        assert!(base(2 * n, 0.2) > 2.0 * base(n, 0.2));
    }
    let grid: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
    for pair in grid.windows(2) {
        assert!(base(200, pair[1]) < base(200, pair[0]));
    }
}

#[test]
fn lambda_star_single_layer_shape() {
    // r = 1, w = 1: 2n (2 - 1/e)(2 - 1/e + eps/3)(ln C(n, k) + ln 2 + ell ln n) / eps^2.
    let (n, k, eps) = (1000usize, 5usize, 0.2);
    let c = 2.0 - (-1f64).exp();
    let expect = 2.0 * n as f64 * c * (c + eps / 3.0)
        * (log_binomial(n as u64, k as u64).unwrap() + 2f64.ln() + (n as f64).ln())
        / (eps * eps);
    assert!(rel(compute_lambda_star(n, 1, 1.0, eps, k, 0, 1.0).unwrap(), expect) < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lambda_star_dominates_thetas(
        n in 10usize..5000,
        r in 1usize..6,
        eps in 0.01f64..0.99,
        ell in 0.1f64..3.0,
        raw_w in prop::collection::vec(0.01f64..1.0, 1..6),
        k_frac in 0.0f64..1.0,
        nr_frac in 0.0f64..0.5,
        opt_frac in 0.0f64..1.0,
    ) {
        let mut w: Vec<f64> = raw_w.into_iter().cycle().take(r).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        let w_bar = w.iter().cloned().fold(0.0, f64::max);
        let n_r = ((n as f64) * nr_frac) as usize;
        let k = 1 + ((n - n_r - 1) as f64 * k_frac) as usize;
        let opt = k as f64 + (n - k) as f64 * opt_frac;
        let d = SolverParams::new(k, eps, ell).derive(n, r, n_r);
        let star = compute_lambda_star(n, r, w_bar, eps, k, n_r, ell).unwrap() / opt;
        let t1 = theta_1(n, r, w_bar, d.eps1, d.delta1, opt);
        let t2 = theta_2(n, r, w_bar, d.eps2, d.delta2, k, n_r, opt).unwrap();
        prop_assert!(star >= t1, "theta* {star} < theta1 {t1}");
        // With eps2 = eps / (2 - 1/e) and delta2 = 1 / (2 n^ell), theta2 is
        // algebraically equal to lambda* / OPT; allow for rounding only.
        prop_assert!(star >= t2 * (1.0 - 1e-12), "theta* {star} < theta2 {t2}");
        prop_assert!(((star - t2) / t2).abs() < 1e-12);
    }
}
