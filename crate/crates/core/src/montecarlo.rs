//! Ensembles of closed-loop realizations and the decay fit of `E[V(t)]`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::simulator::{PathSource, SimConfig, Simulator, TrajectoryRecord};

/// Outcome of one ensemble member.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationSummary {
    pub index: u64,
    pub v0: f64,
    /// `V(T)`, `+∞` when the divergence guard tripped.
    pub v_final: f64,
    pub diverged: bool,
    pub jumps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub mean_v: Vec<f64>,
    pub ci_halfwidth: Vec<f64>,
    pub n_realizations: usize,
    pub window: (f64, f64),
    /// `β` of `αV(0)e^{−βt}`; `None` when the window holds non-positive or
    /// infinite means.
    pub fitted_beta: Option<f64>,
    pub fitted_alpha: Option<f64>,
    pub diverged_count: usize,
    pub realizations: Vec<RealizationSummary>,
}

/// Sum in ascending order, so the result does not depend on input order.
fn ordered_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

/// Per-time mean and 95% normal half-width over `series` (one row per
/// realization, missing tail entries count as `+∞`).
pub fn aggregate(series: &[Vec<f64>], len: usize) -> (Vec<f64>, Vec<f64>) {
    let n = series.len();
    let mut mean = Vec::with_capacity(len);
    let mut half = Vec::with_capacity(len);
    for k in 0..len {
        let mut col: Vec<f64> = series.iter().map(|s| s.get(k).copied().unwrap_or(f64::INFINITY)).collect();
        let m = ordered_sum(&mut col) / n as f64;
        mean.push(m);
        let (lo, hi) = (col[0], col[n - 1]);
        half.push(if n < 2 {
            f64::NAN
        } else if lo == hi {
            0.0
        } else if !m.is_finite() {
            f64::INFINITY
        } else {
            let mut dev: Vec<f64> = col.iter().map(|v| (v - m) * (v - m)).collect();
            let var = ordered_sum(&mut dev) / (n - 1) as f64;
            1.96 * (var / n as f64).sqrt()
        });
    }
    (mean, half)
}

/// Least-squares line through `(t, ln V)` for `t` in `window`; returns
/// `(α, β)` with `β = −slope` and `α = e^{intercept}/V(0)`.
pub fn fit_decay(times: &[f64], mean_v: &[f64], window: (f64, f64), v0: f64) -> Result<(f64, f64)> {
    let tol = 1e-9 * window.1.abs().max(1.0);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(mean_v)
        .filter(|(t, _)| **t >= window.0 - tol && **t <= window.1 + tol)
        .map(|(&t, &v)| (t, v))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Fit(format!("fewer than two samples in [{}, {}]", window.0, window.1)));
    }
    if let Some(&(t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Fit(format!("mean V({t}) = {v} cannot be log-fitted")));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1.ln() - ym)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("window holds a single time".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    Ok((intercept.exp() / v0, -slope))
}

/// Default fit window `[T/3, T]`.
pub fn default_window(horizon: f64) -> (f64, f64) {
    (horizon / 3.0, horizon)
}

fn summarize(index: u64, rec: &TrajectoryRecord) -> RealizationSummary {
    RealizationSummary {
        index,
        v0: rec.initial_v(),
        v_final: rec.final_v(),
        diverged: rec.diverged,
        jumps: rec.delay_path.jumps(),
    }
}

/// Runs `n` realizations with streams `0..n` of `master_seed` on up to
/// `jobs` threads (all available when `None`).
pub fn run_ensemble(cfg: &SimConfig, n: usize, master_seed: u64, jobs: Option<usize>) -> Result<EnsembleResult> {
    run_ensemble_with(&Simulator::new(cfg.clone())?, n, master_seed, jobs, default_window(cfg.horizon))
}

pub fn run_ensemble_with(
    sim: &Simulator,
    n: usize,
    master_seed: u64,
    jobs: Option<usize>,
    window: (f64, f64),
) -> Result<EnsembleResult> {
    if n == 0 {
        return Err(Error::Fit("ensemble needs at least one realization".into()));
    }
    let run = || -> Result<Vec<TrajectoryRecord>> {
        (0..n as u64)
            .into_par_iter()
            .map(|i| sim.run_source(&PathSource::Seed { seed: master_seed, index: i }))
            .collect()
    };
    let records = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::Fit(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };

    // the longest record carries the full time axis
    let full = records.iter().max_by_key(|r| r.snapshots.len()).expect("n ≥ 1");
    let times: Vec<f64> = full.snapshots.iter().map(|s| s.t).collect();
    let series: Vec<Vec<f64>> = records.iter().map(|r| r.snapshots.iter().map(|s| s.v_total).collect()).collect();
    let (mean_v, ci_halfwidth) = aggregate(&series, times.len());
    let fit = fit_decay(&times, &mean_v, window, mean_v[0]).ok();
    let realizations: Vec<_> = records.iter().zip(0u64..).map(|(r, i)| summarize(i, r)).collect();
    Ok(EnsembleResult {
        times,
        mean_v,
        ci_halfwidth,
        n_realizations: n,
        window,
        fitted_beta: fit.map(|f| f.1),
        fitted_alpha: fit.map(|f| f.0),
        diverged_count: realizations.iter().filter(|r| r.diverged).count(),
        realizations,
    })
}
