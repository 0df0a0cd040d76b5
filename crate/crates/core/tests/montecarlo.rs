use rdctl_core::config::load_config;
use rdctl_core::montecarlo::*;
use rdctl_core::simulator::{PathSource, SimConfig, Simulator};

fn short(name: &str, horizon: f64) -> SimConfig {
    let mut cfg = load_config(name).unwrap().sim;
    cfg.horizon = horizon;
    cfg
}

#[test]
fn single_realization_is_its_own_mean() {
    let sim = Simulator::new(short("paper_stable", 2.0)).unwrap();
    let ens = run_ensemble_with(&sim, 1, 5, Some(1), (1.0, 2.0)).unwrap();
    let rec = sim.run_source(&PathSource::Seed { seed: 5, index: 0 }).unwrap();
    let v: Vec<f64> = rec.snapshots.iter().map(|s| s.v_total).collect();
    assert_eq!(ens.mean_v, v);
    assert!(ens.ci_halfwidth.iter().all(|h| h.is_nan()));
    assert_eq!(ens.realizations[0].jumps, rec.delay_path.jumps());
}

#[test]
fn thread_count_does_not_change_results() {
    let sim = Simulator::new(short("paper_stable", 2.0)).unwrap();
    let a = run_ensemble_with(&sim, 8, 2, Some(1), (1.0, 2.0)).unwrap();
    let b = run_ensemble_with(&sim, 8, 2, Some(4), (1.0, 2.0)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn identical_members_have_zero_spread() {
    let mut cfg = short("paper_stable", 1.0);
    // no jumps possible from an absorbing state
    let r = cfg.model.states().len();
    let mut q = vec![0.0; r * r];
    q[0] = -1.0;
    q[1] = 1.0;
    cfg.model = rdctl_core::delay::DelayModel::from_row_major(cfg.model.states().to_vec(), &q, cfg.model.d0()).unwrap();
    let ens = run_ensemble(&cfg, 4, 0, Some(2)).unwrap();
    assert!(ens.ci_halfwidth.iter().all(|&h| h == 0.0));
    assert!(ens.realizations.iter().all(|r| r.jumps == 0));
}

#[test]
fn empty_ensemble_is_an_error() {
    assert!(run_ensemble(&short("paper_stable", 1.0), 0, 0, None).is_err());
}

#[test]
fn fit_recovers_noisy_exponentials() {
    let t: Vec<f64> = (0..=150).map(|k| k as f64 * 0.1).collect();
    let v: Vec<f64> = t.iter().enumerate().map(|(k, t)| 80.0 * 0.3 * (-0.5 * t).exp() * (1.0 + 0.01 * (k as f64).sin())).collect();
    let (alpha, beta) = fit_decay(&t, &v, default_window(15.0), 80.0).unwrap();
    assert!((beta - 0.5).abs() < 1e-3, "{beta}");
    assert!((alpha - 0.3).abs() < 1e-2, "{alpha}");
}

#[test]
fn decay_is_seen_in_both_windows() {
    let sim = Simulator::new(load_config("paper_stable").unwrap().sim).unwrap();
    let a = run_ensemble_with(&sim, 50, 3, None, (5.0, 15.0)).unwrap();
    let (_, b7) = fit_decay(&a.times, &a.mean_v, (7.0, 15.0), a.mean_v[0]).unwrap();
    let b5 = a.fitted_beta.unwrap();
    assert!(b5 > 0.0 && b7 > 0.0, "{b5} vs {b7}");
}
