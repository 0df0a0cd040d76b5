//! Control history and the transport representation of the delayed input.
//!
//! `v̂(x,t) = U(t + D₀(x−1))` solves `D₀v̂_t = v̂_x`, `v̂(1,t) = U(t)`, and each
//! `ṽ_j` solves `D_j ṽ_t = ṽ_x − σ_j v̂_x`, `ṽ_j(1,t) = 0`, with
//! `σ_j = (D_j − D₀)/D₀`.

use std::collections::VecDeque;

use crate::delay::DelayModel;
use crate::error::{Error, Result};

const STAMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActuatorMode {
    /// Transport equations integrated along characteristics.
    Pde,
    /// Actuator states read directly from the control history.
    ExactHistory,
}

/// Control values before the first stamp `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialHistory {
    Zero,
    /// Samples on a uniform grid of `θ ∈ [−span, 0]`; constant below `−span`.
    Sampled { span: f64, values: Vec<f64> },
}

impl InitialHistory {
    pub fn value(&self, theta: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Sampled { span, values } => {
                let n = values.len() - 1;
                let s = ((theta + span) / span * n as f64).clamp(0.0, n as f64);
                let k = (s.floor() as usize).min(n.saturating_sub(1));
                let w = s - k as f64;
                if n == 0 {
                    values[0]
                } else {
                    (1.0 - w) * values[k] + w * values[k + 1]
                }
            }
        }
    }
}

/// Uniformly stamped control samples `U(k·dt)` covering a trailing window.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlHistory {
    dt: f64,
    window: f64,
    first: usize,
    values: VecDeque<f64>,
    initial: InitialHistory,
}

impl ControlHistory {
    /// Empty history keeping at least `window` time units behind the newest
    /// stamp (use `D̄ + dt`).
    pub fn new(dt: f64, window: f64, initial: InitialHistory) -> Self {
        Self { dt, window, first: 0, values: VecDeque::new(), initial }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time of the newest sample.
    pub fn current_time(&self) -> Option<f64> {
        (!self.values.is_empty()).then(|| self.stamp(self.first + self.values.len() - 1))
    }

    pub fn latest(&self) -> Option<f64> {
        self.values.back().copied()
    }

    fn stamp(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Appends `U(t)`; `t` must be the next stamp.
    pub fn push_control(&mut self, t: f64, u: f64) -> Result<()> {
        if !u.is_finite() {
            return Err(Error::NonFinite("control value"));
        }
        let k = self.first + self.values.len();
        let expected = self.stamp(k);
        if (t - expected).abs() > STAMP_TOL * self.dt.max(1.0) {
            return Err(Error::History(format!("expected stamp {expected}, got {t}")));
        }
        self.values.push_back(u);
        let oldest = expected - self.window;
        while self.values.len() > 1 && self.stamp(self.first + 1) <= oldest {
            self.values.pop_front();
            self.first += 1;
        }
        Ok(())
    }

    /// `U(θ)` by linear interpolation between stamps.
    pub fn sample_control(&self, theta: f64) -> Result<f64> {
        if !theta.is_finite() {
            return Err(Error::NonFinite("history time"));
        }
        if theta < 0.0 {
            return Ok(self.initial.value(theta));
        }
        let now = self
            .current_time()
            .ok_or_else(|| Error::History("history is empty".into()))?;
        if theta > now + STAMP_TOL * self.dt {
            return Err(Error::History(format!("time {theta} is after the newest stamp {now}")));
        }
        let mut s = theta / self.dt;
        if (s - s.round()).abs() < STAMP_TOL {
            s = s.round();
        }
        let k = s.floor() as usize;
        if k < self.first {
            return Err(Error::History(format!("time {theta} has been evicted")));
        }
        let w = s - k as f64;
        let i = k - self.first;
        if w == 0.0 || i + 1 >= self.values.len() {
            return Ok(self.values[i.min(self.values.len() - 1)]);
        }
        Ok((1.0 - w) * self.values[i] + w * self.values[i + 1])
    }

    /// Values at stamps `t − m·dt`, `m = 0..=count`, newest first.
    pub fn recent(&self, count: usize) -> Result<Vec<f64>> {
        let now = self.first + self.values.len();
        (0..=count)
            .map(|m| {
                if m >= now {
                    Ok(self.initial.value(-((m + 1 - now) as f64) * self.dt))
                } else if now - 1 - m < self.first {
                    Err(Error::History("requested samples have been evicted".into()))
                } else {
                    Ok(self.values[now - 1 - m - self.first])
                }
            })
            .collect()
    }
}

/// `v̂(x_i,t) = U(t + D₀(x_i − 1))`.
pub fn vhat_exact(history: &ControlHistory, t: f64, grid: &[f64], d0: f64) -> Result<Vec<f64>> {
    grid.iter().map(|&x| history.sample_control(t + d0 * (x - 1.0))).collect()
}

/// `ṽ_j(x_i,t) = U(t + D_j(x_i − 1)) − U(t + D₀(x_i − 1))`.
pub fn vtilde_exact(history: &ControlHistory, t: f64, grid: &[f64], model: &DelayModel) -> Result<Vec<Vec<f64>>> {
    model
        .states()
        .iter()
        .map(|&d| {
            grid.iter()
                .map(|&x| Ok(history.sample_control(t + d * (x - 1.0))? - history.sample_control(t + model.d0() * (x - 1.0))?))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorProfiles {
    pub vhat: Vec<f64>,
    pub vtilde: Vec<Vec<f64>>,
    pub mode: ActuatorMode,
}

impl ActuatorProfiles {
    /// `v̂(0) + ṽ_j(0)`, the input reaching the plant in state `j`.
    pub fn delivered(&self, j: usize) -> f64 {
        self.vhat[0] + self.vtilde[j][0]
    }
}

/// Derivative on a uniform grid: central inside, second-order one-sided at
/// the ends.
pub fn derivative(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        if n == 2 {
            let s = (f[1] - f[0]) / dx;
            d.fill(s);
        }
        return d;
    }
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx);
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dx);
    for i in 1..n - 1 {
        d[i] = (f[i + 1] - f[i - 1]) / (2.0 * dx);
    }
    d
}

/// Cubic Lagrange interpolation of grid data at `xi ∈ [0,1]`.
fn interp_cubic(f: &[f64], dx: f64, xi: f64) -> f64 {
    let m = f.len() - 1;
    let s = xi / dx;
    let k = (s.floor() as isize).clamp(1, m as isize - 2) as usize;
    let base = k - 1;
    let t = s - base as f64;
    let mut out = 0.0;
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (t - b as f64) / (a as f64 - b as f64);
            }
        }
        out += w * f[base + a];
    }
    out
}

/// Value at `x_i + shift` where `shift/dx` is an integer `cells` or not.
fn foot_value(f: &[f64], dx: f64, i: usize, shift: f64, cells: Option<usize>) -> f64 {
    match cells {
        Some(c) => f[i + c],
        None => interp_cubic(f, dx, i as f64 * dx + shift),
    }
}

fn whole_cells(shift: f64, dx: f64) -> Option<usize> {
    let s = shift / dx;
    ((s - s.round()).abs() < 1e-10).then(|| s.round() as usize)
}

/// Advances `v̂` and every `ṽ_j` by `dt` along their characteristics, with
/// `v̂(1) = u_next` imposed at the new time.
pub fn step_transport_pde(
    profiles: &ActuatorProfiles,
    u_next: f64,
    dt: f64,
    model: &DelayModel,
) -> Result<ActuatorProfiles> {
    if !u_next.is_finite() {
        return Err(Error::NonFinite("actuator boundary input"));
    }
    if profiles.vtilde.len() != model.len() {
        return Err(Error::GridMismatch(format!(
            "{} transport profiles for {} delay states",
            profiles.vtilde.len(),
            model.len()
        )));
    }
    let old = &profiles.vhat;
    let m = old.len() - 1;
    if m < 3 {
        return Err(Error::GridMismatch("transport grid needs at least 4 nodes".into()));
    }
    let dx = 1.0 / m as f64;
    let d0 = model.d0();
    let u_now = old[m];

    let shift = dt / d0;
    let cells = whole_cells(shift, dx);
    let mut vhat = vec![0.0; m + 1];
    for (i, v) in vhat.iter_mut().enumerate() {
        let x = i as f64 * dx;
        *v = if x + shift <= 1.0 + 1e-12 {
            foot_value(old, dx, i, shift, cells)
        } else {
            // characteristic left the boundary during the step
            let w = 1.0 - d0 * (1.0 - x) / dt;
            (1.0 - w) * u_now + w * u_next
        };
    }
    vhat[m] = u_next;

    let old_x = derivative(old, dx);
    let new_x = derivative(&vhat, dx);
    let mut vtilde = Vec::with_capacity(model.len());
    for (prof, &dj) in profiles.vtilde.iter().zip(model.states()) {
        let sigma = (dj - d0) / d0;
        let shift = dt / dj;
        let cells = whole_cells(shift, dx);
        let mut next = vec![0.0; m + 1];
        for i in 0..m {
            let x = i as f64 * dx;
            next[i] = if x + shift <= 1.0 + 1e-12 {
                let carried = foot_value(prof, dx, i, shift, cells);
                let src = foot_value(&old_x, dx, i, shift, cells) + new_x[i];
                carried - sigma / dj * 0.5 * dt * src
            } else {
                let elapsed = dj * (1.0 - x);
                let w = 1.0 - elapsed / dt;
                let entry = (1.0 - w) * old_x[m] + w * new_x[m];
                -sigma / dj * 0.5 * elapsed * (entry + new_x[i])
            };
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("transport profile"));
        }
        vtilde.push(next);
    }
    Ok(ActuatorProfiles { vhat, vtilde, mode: profiles.mode })
}
