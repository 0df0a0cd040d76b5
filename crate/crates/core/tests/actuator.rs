use rdctl_core::actuator::*;
use rdctl_core::delay::DelayModel;

const STATES: [f64; 5] = [0.40, 0.45, 0.5, 0.55, 0.6];

fn model(d0: f64) -> DelayModel {
    let mut q = vec![0.0; 25];
    for i in 0..5 {
        for j in 0..5 {
            q[i * 5 + j] = if i == j { -1.0 } else { 0.25 };
        }
    }
    DelayModel::from_row_major(STATES.to_vec(), &q, d0).unwrap()
}

fn control(t: f64) -> f64 {
    (3.0 * t).sin() + 0.5 * (1.3 * t).cos()
}

fn grid(m: usize) -> Vec<f64> {
    (0..=m).map(|i| i as f64 / m as f64).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Transport profiles carried for `steps` steps from data consistent with `control`.
fn run_pde(d0: f64, m: usize, dt: f64, steps: usize) -> (ActuatorProfiles, DelayModel) {
    let model = model(d0);
    let x = grid(m);
    let mut prof = ActuatorProfiles {
        vhat: x.iter().map(|x| control(d0 * (x - 1.0))).collect(),
        vtilde: STATES
            .iter()
            .map(|&dj| x.iter().map(|x| control(dj * (x - 1.0)) - control(d0 * (x - 1.0))).collect())
            .collect(),
        mode: ActuatorMode::Pde,
    };
    for k in 0..steps {
        prof = step_transport_pde(&prof, control((k + 1) as f64 * dt), dt, &model).unwrap();
        assert_eq!(prof.vhat[m], control((k + 1) as f64 * dt));
        assert!(prof.vtilde.iter().all(|v| v[m] == 0.0));
    }
    (prof, model)
}

#[test]
fn pde_mode_tracks_shifted_control() {
    for d0 in [0.5, 0.55] {
        let (prof, _) = run_pde(d0, 100, 0.01, 100);
        let exact: Vec<f64> = grid(100).iter().map(|x| control(1.0 + d0 * (x - 1.0))).collect();
        assert!(max_diff(&prof.vhat, &exact) < 1e-3, "D0 = {d0}");
    }
}

#[test]
fn pde_mode_matches_history_shift_for_vtilde() {
    for d0 in [0.5, 0.55] {
        let (prof, _) = run_pde(d0, 100, 0.01, 100);
        for (j, &dj) in STATES.iter().enumerate() {
            let exact: Vec<f64> =
                grid(100).iter().map(|x| control(1.0 + dj * (x - 1.0)) - control(1.0 + d0 * (x - 1.0))).collect();
            assert!(max_diff(&prof.vtilde[j], &exact) < 1e-2, "D0 = {d0}, j = {j}");
        }
    }
}

#[test]
fn matched_delays_keep_vtilde_zero() {
    let model = DelayModel::constant(0.5).unwrap();
    let mut prof = ActuatorProfiles {
        vhat: grid(50).iter().map(|x| x.sin()).collect(),
        vtilde: vec![vec![0.0; 51]],
        mode: ActuatorMode::Pde,
    };
    for k in 0..30 {
        prof = step_transport_pde(&prof, (k as f64).cos(), 0.01, &model).unwrap();
    }
    assert!(prof.vtilde.iter().flatten().all(|&v| v == 0.0));
}

fn history_for(dt: f64, until: f64) -> ControlHistory {
    let mut h = ControlHistory::new(dt, 0.7, InitialHistory::Zero);
    let n = (until / dt).round() as usize;
    for k in 0..=n {
        h.push_control(k as f64 * dt, control(k as f64 * dt)).unwrap();
    }
    h
}

/// Max of `D₀∂_t v̂ − ∂_x v̂` over interior nodes, time-centred.
fn transport_residual(h: f64) -> f64 {
    let d0 = 0.5;
    let m = (1.0 / h).round() as usize;
    let x = grid(m);
    let t = 1.0;
    let hist = history_for(h, t + h);
    let a = vhat_exact(&hist, t, &x, d0).unwrap();
    let b = vhat_exact(&hist, t + h, &x, d0).unwrap();
    (1..m)
        .map(|i| {
            let dt = d0 * (b[i] - a[i]) / h;
            let dx = 0.25 * (a[i + 1] - a[i - 1] + b[i + 1] - b[i - 1]) / h;
            (dt - dx).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn exact_mode_residual_is_second_order() {
    let coarse = transport_residual(0.02);
    let fine = transport_residual(0.01);
    assert!(coarse / fine > 3.5, "{coarse} / {fine}");
}

#[test]
fn exact_profiles_at_the_ends() {
    let hist = history_for(0.01, 2.0);
    let x = grid(100);
    let v = vhat_exact(&hist, 2.0, &x, 0.5).unwrap();
    assert_eq!(v[100], control(2.0));
    assert!((v[0] - control(1.5)).abs() < 1e-12);
    let vt = vtilde_exact(&hist, 2.0, &x, &model(0.5)).unwrap();
    assert!(vt.iter().all(|p| p[100] == 0.0));
    assert!(vt[2].iter().all(|&p| p == 0.0));
    assert!(vhat_exact(&hist, 2.5, &x, 0.5).is_err());
}

#[test]
fn history_buffer_contract() {
    let mut h = ControlHistory::new(0.01, 0.6, InitialHistory::Zero);
    for k in 0..=120 {
        h.push_control(k as f64 * 0.01, 1.0).unwrap();
        assert!(h.len() <= 62);
    }
    assert!(h.push_control(1.22, 1.0).is_err());
    assert_eq!(h.sample_control(-0.3).unwrap(), 0.0);
    let mut h = ControlHistory::new(0.1, 1.0, InitialHistory::Zero);
    h.push_control(0.0, 1.0).unwrap();
    h.push_control(0.1, 3.0).unwrap();
    assert!((h.sample_control(0.05).unwrap() - 2.0).abs() < 1e-15);
    assert_eq!(h.sample_control(0.1).unwrap(), 3.0);
    assert!(h.sample_control(0.15).is_err());
}
