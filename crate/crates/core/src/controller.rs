//! Delay-compensating feedback law
//!
//! ```text
//! U(t) = ∫₀¹ γ(1,y) u(y,t) dy + D₀ ∫₀¹ κ(s) U(t − D₀s) ds
//! ```
//!
//! The second term is `D₀∫₀¹ k(1,y) v̂(y,t) dy` written on the control
//! history. `κ` is weakly singular at `s = 0`, so the history integral uses
//! product weights for a piecewise-linear `U`; the self-weight of `U(t)` is
//! moved to the left-hand side and the scalar equation solved exactly.

use crate::actuator::ControlHistory;
use crate::error::{Error, Result};
use crate::kernels::{eval_kappa, KernelConfig, KernelTables};
use crate::plant::PlantProfile;
use crate::quadrature::{gregory_weights, ProductWeights};

const DEGENERATE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ControllerContext {
    pub kernel: KernelConfig,
    pub dt: f64,
    pub dx: f64,
    /// Gregory weights times `γ(1, x_i)`.
    spatial: Vec<f64>,
    /// `D₀W_m` for the history samples `U(t − m·dt)`, `m = 0..=cells`.
    temporal: Vec<f64>,
    /// `D₀` times the weight of `U(t − D₀)` when `D₀/dt` is fractional.
    tail: Option<f64>,
    /// `1/(1 − D₀W₀)`.
    inv_self: f64,
}

impl ControllerContext {
    pub fn new(tables: &KernelTables, dt: f64) -> Result<Self> {
        let cfg = tables.config;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::NonFinite("controller time step"));
        }
        let dx = tables.dx;
        let spatial = gregory_weights(tables.grid.len(), dx)
            .iter()
            .zip(&tables.gamma_1)
            .map(|(w, g)| w * g)
            .collect();

        let h = dt / cfg.d0;
        let ratio = 1.0 / h;
        let mut cells = ratio.floor() as usize;
        if (ratio - ratio.round()).abs() < 1e-9 {
            cells = ratio.round() as usize;
        }
        if cells == 0 {
            return Err(Error::GridMismatch(format!("time step {dt} exceeds d0 = {}", cfg.d0)));
        }
        let pw = ProductWeights::new(h, cells, Some(1.0), |s| eval_kappa(s, &tables.coeffs, &cfg));
        let mut nodal = pw.nodal();
        let tail = if pw.cells() > cells { nodal.pop().map(|w| cfg.d0 * w) } else { None };
        let temporal: Vec<f64> = nodal.iter().map(|w| cfg.d0 * w).collect();
        let denom = 1.0 - temporal[0];
        if denom.abs() < DEGENERATE_TOL {
            return Err(Error::DegenerateControl(denom.abs()));
        }
        Ok(Self { kernel: cfg, dt, dx, spatial, temporal, tail, inv_self: 1.0 / denom })
    }

    /// Number of past samples the law reads.
    pub fn history_len(&self) -> usize {
        self.temporal.len() - 1
    }

    /// `1 − D₀W₀`.
    pub fn self_coefficient(&self) -> f64 {
        1.0 / self.inv_self
    }

    /// `∫₀¹ γ(1,y) u(y) dy` by the Gregory rule.
    pub fn spatial_term(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.spatial.len() {
            return Err(Error::GridMismatch(format!(
                "profile has {} nodes, kernel tables {}",
                u.len(),
                self.spatial.len()
            )));
        }
        Ok(self.spatial.iter().zip(u).map(|(w, v)| w * v).sum())
    }

    /// `U(t)` from the plant state at `t` and the history up to `t − dt`.
    pub fn compute_control(&self, u: &PlantProfile, history: &ControlHistory, t: f64) -> Result<f64> {
        if (history.dt() - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::GridMismatch("history and controller time steps differ".into()));
        }
        if let Some(now) = history.current_time() {
            if (now + self.dt - t).abs() > 1e-9 * self.dt.max(1.0) {
                return Err(Error::History(format!("history ends at {now}, control requested at {t}")));
            }
        }
        let spatial = self.spatial_term(&u.values)?;
        let past = history.recent(self.history_len().saturating_sub(1))?;
        let mut acc = spatial;
        for (w, v) in self.temporal[1..].iter().zip(&past) {
            acc += w * v;
        }
        if let Some(w) = self.tail {
            acc += w * history.sample_control(t - self.kernel.d0)?;
        }
        let out = acc * self.inv_self;
        if !out.is_finite() {
            return Err(Error::NonFinite("control value"));
        }
        Ok(out)
    }
}
