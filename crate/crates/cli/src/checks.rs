//! Self-checks run by `rdctl validate`.

use rdctl_core::delay::{transition_matrix, validate_generator};
use rdctl_core::diagnostics::{forward_transform, inverse_transform};
use rdctl_core::kernels::{build_tables, compute_p1n, eval_gamma, eval_kappa, eval_p, eval_q};
use rdctl_core::plant::{CrankNicolson, PlantProfile};
use rdctl_core::quadrature::{gregory, trapezoid};
use rdctl_core::simulator::{PathSource, SimConfig, Simulator};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, tol: f64) -> Check {
    Check { name, passed: value <= tol, detail: format!("{value:.3e} (tolerance {tol:.0e})") }
}

fn failed(name: &'static str, err: impl std::fmt::Display) -> Check {
    Check { name, passed: false, detail: err.to_string() }
}

fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |a, b| a.max(b.abs()))
}

pub fn run_all(cfg: &SimConfig) -> Vec<Check> {
    let mut out = Vec::new();
    let model = &cfg.model;
    out.push(match validate_generator(model.q_matrix()) {
        Ok(()) => Check { name: "generator conservative", passed: true, detail: format!("{} states", model.len()) },
        Err(e) => failed("generator conservative", e),
    });

    let rows = [0.1, 1.0, 10.0].iter().map(|&t| {
        transition_matrix(model, t).map(|p| max_abs(p.row_iter().map(|r| r.sum() - 1.0)))
    });
    out.push(match rows.collect::<Result<Vec<_>, _>>() {
        Ok(errs) => check("transition rows sum to one", max_abs(errs), 1e-10),
        Err(e) => failed("transition rows sum to one", e),
    });
    out.push(match (transition_matrix(model, 0.5), transition_matrix(model, 1.0)) {
        (Ok(a), Ok(b)) => check("chapman-kolmogorov", max_abs((&a * &a - b).iter().copied()), 1e-8),
        (Err(e), _) | (_, Err(e)) => failed("chapman-kolmogorov", e),
    });

    let kcfg = cfg.kernel_config();
    out.extend(kernel_checks(&kcfg).unwrap_or_else(|e| vec![failed("kernel evaluation", e)]));

    out.push(match roundtrip(cfg) {
        Ok(err) => check("transform roundtrip", err, 1e-3),
        Err(e) => failed("transform roundtrip", e),
    });
    out.push(match cn_linearity(cfg) {
        Ok(err) => check("crank-nicolson linearity", err, 1e-12),
        Err(e) => failed("crank-nicolson linearity", e),
    });
    out.push(match determinism(cfg) {
        Ok(true) => Check { name: "seeded determinism", passed: true, detail: "bit-identical".into() },
        Ok(false) => Check { name: "seeded determinism", passed: false, detail: "runs differ".into() },
        Err(e) => failed("seeded determinism", e),
    });
    out
}

fn kernel_checks(kcfg: &rdctl_core::kernels::KernelConfig) -> rdctl_core::Result<Vec<Check>> {
    let mut out = Vec::new();
    let n = 10;
    let h = 1.0 / 400.0;
    let mut worst: f64 = 0.0;
    for i in 0..=n {
        let x = i as f64 / n as f64;
        for j in 0..=i {
            let y = j as f64 / n as f64;
            let vals: Vec<f64> = (0..=400)
                .map(|k| {
                    let s = y + (x - y) * k as f64 * h;
                    Ok(eval_p(x, s, kcfg)? * eval_q(s, y, kcfg)?)
                })
                .collect::<rdctl_core::Result<_>>()?;
            let r = eval_q(x, y, kcfg)? - eval_p(x, y, kcfg)? - trapezoid(&vals, (x - y) * h);
            worst = worst.max(r.abs());
        }
    }
    out.push(check("kernel reciprocity", worst, 1e-5));

    let coeffs = compute_p1n(kcfg)?;
    let edge = max_abs(
        (1..10)
            .map(|k| k as f64 / 10.0)
            .map(|y| Ok(eval_gamma(0.0, y, &coeffs, kcfg) - eval_p(1.0, y, kcfg)?))
            .collect::<rdctl_core::Result<Vec<_>>>()?,
    );
    out.push(check("gamma(0,.) = p(1,.)", edge, 1e-6));

    let m = 4000;
    let sq: Vec<f64> = (0..=m)
        .map(|i| eval_p(1.0, i as f64 / m as f64, kcfg).map(|v| v * v))
        .collect::<rdctl_core::Result<_>>()?;
    out.push(check("parseval", (coeffs.energy() - 2.0 * gregory(&sq, 1.0 / m as f64)).abs(), 1e-6));

    let d = 1e-4;
    let py = (3.0 * eval_p(1.0, 1.0, kcfg)? - 4.0 * eval_p(1.0, 1.0 - d, kcfg)? + eval_p(1.0, 1.0 - 2.0 * d, kcfg)?) / (2.0 * d);
    out.push(check("kappa(0) = -p_y(1,1)", (eval_kappa(0.0, &coeffs, kcfg) + py).abs(), 1e-4));
    Ok(out)
}

fn roundtrip(cfg: &SimConfig) -> rdctl_core::Result<f64> {
    let m = cfg.cells()?;
    let tables = build_tables(&cfg.kernel_config(), m)?;
    let u: Vec<f64> = tables.grid.iter().map(|x| (2.0 * std::f64::consts::PI * x).sin()).collect();
    let v: Vec<f64> = tables.grid.iter().map(|x| x * (1.0 - x)).collect();
    let t = forward_transform(&u, &v, &tables)?;
    let (u2, v2) = inverse_transform(&t.w, &t.z, &tables)?;
    Ok(max_abs(u.iter().zip(&u2).chain(v.iter().zip(&v2)).map(|(a, b)| a - b)))
}

fn cn_linearity(cfg: &SimConfig) -> rdctl_core::Result<f64> {
    let m = cfg.cells()?;
    let cn = CrankNicolson::new(m, cfg.dt, cfg.lambda)?;
    let mut a = PlantProfile::from_fn(m, |x| (std::f64::consts::PI * x).sin());
    let mut b = PlantProfile::from_fn(m, |x| x * x * (1.0 - x));
    let mut s = PlantProfile::new(a.values.iter().zip(&b.values).map(|(p, q)| p + q).collect(), 0.0);
    cn.step(&mut a, 0.0, 0.3)?;
    cn.step(&mut b, 0.0, -0.1)?;
    cn.step(&mut s, 0.0, 0.2)?;
    Ok(max_abs(s.values.iter().zip(a.values.iter().zip(&b.values)).map(|(s, (a, b))| s - a - b)))
}

fn determinism(cfg: &SimConfig) -> rdctl_core::Result<bool> {
    let mut short = cfg.clone();
    short.horizon = (cfg.dt * 50.0).min(cfg.horizon);
    let sim = Simulator::new(short)?;
    let src = PathSource::Seed { seed: cfg.seed, index: 0 };
    Ok(sim.run_source(&src)? == sim.run_source(&src)?)
}
