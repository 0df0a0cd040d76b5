use std::f64::consts::PI;

use proptest::prelude::*;
use rdctl_core::diagnostics::l2_sq;
use rdctl_core::plant::{step_cn, CrankNicolson, PlantProfile};

fn evolve(m: usize, dt: f64, lambda: f64, steps: usize, f: impl Fn(f64) -> f64, bc: f64) -> PlantProfile {
    let cn = CrankNicolson::new(m, dt, lambda).unwrap();
    let mut u = PlantProfile::from_fn(m, f);
    u.values[m] = bc;
    for _ in 0..steps {
        cn.step(&mut u, bc, bc).unwrap();
    }
    u
}

fn heat_error(m: usize, dt: f64) -> f64 {
    let steps = (0.1 / dt).round() as usize;
    let u = evolve(m, dt, 0.0, steps, |x| (PI * x).sin(), 0.0);
    let decay = (-PI * PI * 0.1).exp();
    (0..=m)
        .map(|i| (u.values[i] - (PI * i as f64 / m as f64).sin() * decay).abs())
        .fold(0.0, f64::max)
}

#[test]
fn heat_equation_is_second_order() {
    let coarse = heat_error(100, 0.01);
    let fine = heat_error(200, 0.005);
    assert!(coarse < 5e-4, "{coarse}");
    let ratio = coarse / fine;
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn unstable_mode_grows_at_modal_rate() {
    let cn = CrankNicolson::new(100, 0.01, 11.0).unwrap();
    let mut u = PlantProfile::from_fn(100, |x| (PI * x).sin());
    let mut norms = Vec::new();
    for k in 1..=500 {
        cn.step(&mut u, 0.0, 0.0).unwrap();
        if k % 100 == 0 {
            norms.push(0.5 * l2_sq(&u.values, 0.01).ln());
        }
    }
    let rate = (norms[4] - norms[0]) / 4.0;
    let exact = 11.0 - PI * PI;
    assert!((rate / exact - 1.0).abs() < 0.01, "{rate}");
    assert!((u.t - 5.0).abs() < 1e-12);
}

#[test]
fn second_mode_decays_at_modal_rate() {
    let u = evolve(200, 0.005, 11.0, 100, |x| (2.0 * PI * x).sin(), 0.0);
    let g = ((11.0 - 4.0 * PI * PI) * 0.5).exp();
    let err = (0..=200).map(|i| (u.values[i] - g * (2.0 * PI * i as f64 / 200.0).sin()).abs()).fold(0.0, f64::max);
    assert!(err < 1e-4 * g.max(1e-3), "{err}");
}

#[test]
fn boundary_forcing_reaches_steady_state() {
    let lambda: f64 = 2.0;
    let u = evolve(100, 0.01, lambda, 1000, |_| 0.0, 1.0);
    let k = lambda.sqrt();
    for i in 0..=100 {
        let x = i as f64 / 100.0;
        assert!((u.values[i] - (k * x).sin() / k.sin()).abs() < 1e-4);
    }
    assert_eq!(u.values[0], 0.0);
    assert_eq!(u.values[100], 1.0);
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(CrankNicolson::new(1, 0.01, 1.0).is_err());
    assert!(CrankNicolson::new(10, -0.01, 1.0).is_err());
    let cn = CrankNicolson::new(10, 0.01, 1.0).unwrap();
    let mut u = PlantProfile::from_fn(20, |_| 0.0);
    assert!(cn.step(&mut u, 0.0, 0.0).is_err());
    let mut u = PlantProfile::from_fn(10, |_| 0.0);
    assert!(cn.step(&mut u, 0.0, f64::NAN).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn one_step_is_linear(
        a in prop::collection::vec(-1.0..1.0f64, 41),
        b in prop::collection::vec(-1.0..1.0f64, 41),
        ba in -2.0..2.0f64,
        bb in -2.0..2.0f64,
        c in -3.0..3.0f64,
    ) {
        let mk = |v: &[f64], end: f64| {
            let mut v = v.to_vec();
            v[0] = 0.0;
            v[40] = end;
            PlantProfile::new(v, 0.0)
        };
        let pa = mk(&a, ba);
        let pb = mk(&b, bb);
        let sum: Vec<f64> = pa.values.iter().zip(&pb.values).map(|(x, y)| c * x + y).collect();
        let sa = step_cn(&pa, ba, 2.0 * ba, 11.0, 0.01).unwrap();
        let sb = step_cn(&pb, bb, 2.0 * bb, 11.0, 0.01).unwrap();
        let ss = step_cn(&PlantProfile::new(sum, 0.0), c * ba + bb, 2.0 * (c * ba + bb), 11.0, 0.01).unwrap();
        for i in 0..=40 {
            prop_assert!((ss.values[i] - c * sa.values[i] - sb.values[i]).abs() < 1e-12);
        }
    }
}
