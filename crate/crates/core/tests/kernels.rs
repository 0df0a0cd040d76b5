use std::f64::consts::PI;

use proptest::prelude::*;
use rdctl_core::kernels::*;
use rdctl_core::quadrature::gregory;

const LAMBDA: f64 = 11.0;
const D0: f64 = 0.5;

fn cfg() -> KernelConfig {
    KernelConfig::new(LAMBDA, D0)
}

/// `−λy Σ_k (±λ(x²−y²)/4)^k / (2·k!(k+1)!)`, 30 terms.
fn series_kernel(x: f64, y: f64, sign: f64) -> f64 {
    let q = sign * LAMBDA * (x * x - y * y) / 4.0;
    let mut term = 0.5;
    let mut sum = 0.0;
    for k in 0..30 {
        sum += term;
        let k = k as f64;
        term *= q / ((k + 1.0) * (k + 2.0));
    }
    -LAMBDA * y * sum
}

fn p_oracle(x: f64, y: f64) -> f64 {
    series_kernel(x, y, 1.0)
}

fn q_oracle(x: f64, y: f64) -> f64 {
    series_kernel(x, y, -1.0)
}

/// `2∫₀¹ f(ξ) sin(nπξ) dξ` by composite Simpson on 20 000 panels.
fn sine_coefficient(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let m = 20_000;
    let h = 1.0 / m as f64;
    let g = |i: usize| {
        let x = i as f64 * h;
        f(x) * (n as f64 * PI * x).sin()
    };
    let inner: f64 = (1..m).map(|i| if i % 2 == 1 { 4.0 * g(i) } else { 2.0 * g(i) }).sum();
    2.0 * h / 3.0 * (g(0) + inner + g(m))
}

/// `e^{gx} Σ_{n≤2000} e^{−D₀n²π²x} sin(nπy) c_n`, stopping once the damping
/// factor underflows.
fn oracle_series(x: f64, y: f64, g: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut s = 0.0;
    for n in 1..=2000usize {
        let decay = (-D0 * (n * n) as f64 * PI * PI * x).exp();
        if decay == 0.0 {
            break;
        }
        s += decay * (n as f64 * PI * y).sin() * sine_coefficient(&f, n);
    }
    (g * x).exp() * s
}

#[test]
fn p_and_q_match_series_oracle() {
    for (x, y) in [(1.0, 0.5), (1.0, 1.0), (0.7, 0.2), (0.3, 0.29), (0.9, 0.0), (0.5, 0.5)] {
        assert!((eval_p(x, y, &cfg()).unwrap() - p_oracle(x, y)).abs() < 1e-13, "p({x},{y})");
        assert!((eval_q(x, y, &cfg()).unwrap() - q_oracle(x, y)).abs() < 1e-13, "q({x},{y})");
    }
}

#[test]
fn gamma_and_eta_match_long_series() {
    let cfg = cfg();
    let p = compute_p1n(&cfg).unwrap();
    let q = compute_q1n(&cfg).unwrap();
    let g = oracle_series(1.0, 0.5, D0 * LAMBDA, |s| p_oracle(1.0, s));
    let e = oracle_series(1.0, 0.5, 0.0, |s| q_oracle(1.0, s));
    assert!((eval_gamma(1.0, 0.5, &p, &cfg) - g).abs() < 1e-8, "γ {g}");
    assert!((eval_eta(1.0, 0.5, &q, &cfg) - e).abs() < 1e-8, "η {e}");
}

#[test]
fn kernels_at_x_zero_are_the_plant_kernels() {
    let cfg = cfg();
    let p = compute_p1n(&cfg).unwrap();
    let q = compute_q1n(&cfg).unwrap();
    for k in 1..20 {
        let y = k as f64 / 20.0;
        assert!((eval_gamma(0.0, y, &p, &cfg) - p_oracle(1.0, y)).abs() < 1e-6);
        assert!((eval_eta(0.0, y, &q, &cfg) - q_oracle(1.0, y)).abs() < 1e-6);
    }
}

#[test]
fn parseval_and_diagonal_finite_part() {
    let cfg = cfg();
    let p = compute_p1n(&cfg).unwrap();
    let m = 4000;
    let sq: Vec<f64> = (0..=m).map(|i| p_oracle(1.0, i as f64 / m as f64).powi(2)).collect();
    assert!((p.energy() - 2.0 * gregory(&sq, 1.0 / m as f64)).abs() < 1e-6);
    // −∂_y p(1,1) = λ/2 − λ²/8
    assert!((eval_kappa(0.0, &p, &cfg) + 9.625).abs() < 1e-4);
    let q = compute_q1n(&cfg).unwrap();
    assert!((eval_l(0.3, 0.3, &q, &cfg) - (5.5 + 121.0 / 8.0)).abs() < 1e-4);
}

#[test]
fn diagonal_band_is_constant() {
    let cfg = cfg();
    let p = compute_p1n(&cfg).unwrap();
    for s in [0.05, 0.2, 0.6] {
        let a = eval_k(0.9, 0.9 - s, &p, &cfg);
        let b = eval_k(1.0, 1.0 - s, &p, &cfg);
        assert_eq!(a, b);
    }
}

fn refinement_quantities(n: usize) -> [f64; 4] {
    let cfg = cfg().with_terms(n);
    let p = compute_p1n(&cfg).unwrap();
    let q = compute_q1n(&cfg).unwrap();
    let m = 2000;
    let h = 1.0 / m as f64;
    let r: Vec<f64> = (0..=m).map(|i| p.reconstruct(i as f64 * h)).collect();
    let dy: Vec<f64> = (0..=m)
        .map(|i| match i {
            0 => (-3.0 * r[0] + 4.0 * r[1] - r[2]) / (2.0 * h),
            i if i == m => (3.0 * r[m] - 4.0 * r[m - 1] + r[m - 2]) / (2.0 * h),
            i => (r[i + 1] - r[i - 1]) / (2.0 * h),
        })
        .collect();
    let py_sq: Vec<f64> = dy.iter().map(|d| d * d).collect();
    let kappa_max = (1..=100).map(|i| eval_kappa(i as f64 / 100.0, &p, &cfg).abs()).fold(0.0, f64::max);
    let eta_x_max = (0..=100).map(|i| eval_eta_x(1.0, i as f64 / 100.0, &q, &cfg).abs()).fold(0.0, f64::max);
    [p.energy() / 2.0, gregory(&py_sq, h), kappa_max, eta_x_max]
}

#[test]
fn refinement_in_terms_is_stable() {
    let a = refinement_quantities(200);
    let b = refinement_quantities(400);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-6, "{x} vs {y}");
    }
}

#[test]
fn tables_match_pointwise_evaluation() {
    let cfg = cfg().with_terms(80);
    let t = build_tables(&cfg, 40).unwrap();
    for i in [0, 7, 20, 40] {
        let x = t.grid[i];
        assert!((t.p_1[i] - p_oracle(1.0, x)).abs() < 1e-13);
        assert_eq!(t.gamma_1[i], eval_gamma(1.0, x, &t.coeffs, &cfg));
        for j in 0..=i {
            assert!((t.q_tri[i][j] - q_oracle(x, t.grid[j])).abs() < 1e-13);
        }
    }
    assert!(build_tables(&cfg, 5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reciprocity_holds_anywhere(x in 0.0..1.0f64, frac in 0.0..1.0f64) {
        let y = x * frac;
        let n = 400;
        let h = (x - y) / n as f64;
        let vals: Vec<f64> = (0..=n).map(|k| {
            let s = y + k as f64 * h;
            p_oracle(x, s) * q_oracle(s, y)
        }).collect();
        let integral = if h > 0.0 { rdctl_core::quadrature::trapezoid(&vals, h) } else { 0.0 };
        let r = eval_q(x, y, &cfg()).unwrap() - eval_p(x, y, &cfg()).unwrap() - integral;
        prop_assert!(r.abs() < 1e-5, "residual {r}");
    }

    #[test]
    fn outside_triangle_is_rejected(x in 0.0..0.5f64, dy in 0.001..0.5f64) {
        prop_assert!(eval_p(x, x + dy, &cfg()).is_err());
        prop_assert!(eval_q(-0.1 - x, 0.0, &cfg()).is_err());
    }
}
