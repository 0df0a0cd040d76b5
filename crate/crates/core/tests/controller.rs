use std::f64::consts::PI;

use proptest::prelude::*;
use rdctl_core::actuator::{vhat_exact, ControlHistory, InitialHistory};
use rdctl_core::controller::ControllerContext;
use rdctl_core::diagnostics::forward_transform;
use rdctl_core::kernels::{build_tables, eval_gamma, KernelConfig, KernelTables};
use rdctl_core::plant::{CrankNicolson, PlantProfile};

fn tables(d0: f64) -> KernelTables {
    build_tables(&KernelConfig::new(11.0, d0), 100).unwrap()
}

#[test]
fn spatial_term_matches_fine_quadrature() {
    let t = tables(0.5);
    let ctx = ControllerContext::new(&t, 0.01).unwrap();
    let u: Vec<f64> = t.grid.iter().map(|x| (PI * x).sin()).collect();
    let n = 10_000;
    let h = 1.0 / n as f64;
    let f = |i: usize| {
        let y = i as f64 * h;
        eval_gamma(1.0, y, &t.coeffs, &t.config) * (PI * y).sin()
    };
    let inner: f64 = (1..n).map(|i| if i % 2 == 1 { 4.0 * f(i) } else { 2.0 * f(i) }).sum();
    let oracle = h / 3.0 * (f(0) + inner + f(n));
    assert!((ctx.spatial_term(&u).unwrap() - oracle).abs() < 1e-5, "{oracle}");
}

/// Largest `|z(1,t)|` over closed-loop steps `from..to`, constant delay `D₀`.
fn boundary_residual(d0: f64, from: usize, to: usize) -> f64 {
    let t = tables(d0);
    let dt = 0.01;
    let ctx = ControllerContext::new(&t, dt).unwrap();
    let cn = CrankNicolson::new(100, dt, 11.0).unwrap();
    let mut hist = ControlHistory::new(dt, d0 + 2.0 * dt, InitialHistory::Zero);
    let mut u = PlantProfile::from_fn(100, |x| (PI * x).sin());
    hist.push_control(0.0, ctx.compute_control(&u, &hist, 0.0).unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    for n in 0..to {
        let next = (n + 1) as f64 * dt;
        let bc_next = hist.sample_control(next - d0).unwrap();
        let bc_now = u.values[100];
        cn.step(&mut u, bc_now, bc_next).unwrap();
        let control = ctx.compute_control(&u, &hist, next).unwrap();
        hist.push_control(next, control).unwrap();
        if n + 1 >= from {
            let vhat = vhat_exact(&hist, next, &t.grid, d0).unwrap();
            let z = forward_transform(&u.values, &vhat, &t).unwrap().z;
            worst = worst.max(z[100].abs());
        }
    }
    worst
}

#[test]
fn target_boundary_vanishes_under_the_law() {
    // history breakpoints fall on grid nodes when dt/(D₀dx) is an integer
    let r = boundary_residual(0.5, 52, 200);
    assert!(r < 1e-4, "|z(1)| = {r}");
}

#[test]
fn self_coefficient_is_nondegenerate() {
    for d0 in [0.4, 0.5, 0.55, 0.6] {
        let ctx = ControllerContext::new(&tables(d0), 0.01).unwrap();
        assert!(ctx.self_coefficient().abs() > 1e-3);
        assert!(ctx.history_len() >= (d0 / 0.01).floor() as usize);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn control_is_linear(a in -2.0..2.0f64, b in -2.0..2.0f64, k in 1.0..6.0f64) {
        let t = build_tables(&KernelConfig::new(11.0, 0.5).with_terms(60), 50).unwrap();
        let ctx = ControllerContext::new(&t, 0.01).unwrap();
        let run = |scale: f64, shift: f64| {
            let mut h = ControlHistory::new(0.01, 0.6, InitialHistory::Zero);
            for n in 0..70 {
                h.push_control(n as f64 * 0.01, scale * (k * n as f64 * 0.01).sin() + shift).unwrap();
            }
            let u = PlantProfile::from_fn(50, |x| scale * (k * x).sin() + shift * x);
            ctx.compute_control(&u, &h, 0.7).unwrap()
        };
        let combined = run(a, b);
        let parts = run(a, 0.0) + run(0.0, b);
        prop_assert!((combined - parts).abs() < 1e-10 * (1.0 + combined.abs()));
    }
}
