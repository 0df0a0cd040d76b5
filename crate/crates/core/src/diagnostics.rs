//! Norms, the Lyapunov functional and the backstepping transforms.

use crate::actuator::derivative;
use crate::error::{Error, Result};
use crate::kernels::KernelTables;
use crate::quadrature::{gregory, trapezoid};

/// `‖f‖²_{L²}` by the trapezoid rule.
pub fn l2_sq(f: &[f64], dx: f64) -> f64 {
    let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
    trapezoid(&sq, dx)
}

/// `‖f‖²_{L²} + ‖f_x‖²_{L²}`, with `f_x` the cell-wise difference quotient
/// (exact for the piecewise-linear interpolant).
pub fn h1_sq(f: &[f64], dx: f64) -> f64 {
    let grad: f64 = f.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum::<f64>() / dx;
    l2_sq(f, dx) + grad
}

/// Sum of `h1_sq` over the components of a vector profile.
pub fn h1_sq_vec(f: &[Vec<f64>], dx: f64) -> f64 {
    f.iter().map(|c| h1_sq(c, dx)).sum()
}

/// `V = ‖u‖²_{L²} + ‖v̂‖²_{H¹} + ‖ṽ‖²_{H¹}`.
pub fn lyapunov_v(u: &[f64], vhat: &[f64], vtilde: &[Vec<f64>], dx: f64) -> f64 {
    l2_sq(u, dx) + h1_sq(vhat, dx) + h1_sq_vec(vtilde, dx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSnapshot {
    pub t: f64,
    pub u_l2sq: f64,
    pub vhat_h1sq: f64,
    pub vtilde_h1sq: f64,
    pub v_total: f64,
    pub u_ctrl: f64,
    pub delay_index: usize,
}

impl NormSnapshot {
    pub fn new(t: f64, u: &[f64], vhat: &[f64], vtilde: &[Vec<f64>], dx: f64, u_ctrl: f64, delay_index: usize) -> Self {
        let u_l2sq = l2_sq(u, dx);
        let vhat_h1sq = h1_sq(vhat, dx);
        let vtilde_h1sq = h1_sq_vec(vtilde, dx);
        Self {
            t,
            u_l2sq,
            vhat_h1sq,
            vtilde_h1sq,
            v_total: u_l2sq + vhat_h1sq + vtilde_h1sq,
            u_ctrl,
            delay_index,
        }
    }
}

/// Target-system variables `(w, z)` and `h = ∂_x v̂` rebuilt from them.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSnapshot {
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub h: Vec<f64>,
}

fn check_len(tables: &KernelTables, f: &[f64], name: &str) -> Result<()> {
    if f.len() == tables.grid.len() {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "{name} has {} nodes, kernel tables {}",
            f.len(),
            tables.grid.len()
        )))
    }
}

/// `∫₀^{x_i} K(x_i, y) f(y) dy` for a triangular table.
fn volterra(tri: &[Vec<f64>], f: &[f64], dx: f64) -> Vec<f64> {
    tri.iter()
        .enumerate()
        .map(|(i, row)| {
            let prod: Vec<f64> = row.iter().zip(&f[..=i]).map(|(k, v)| k * v).collect();
            gregory(&prod, dx)
        })
        .collect()
}

/// `∫₀¹ K(x_i, y) f(y) dy` for a full table.
fn fredholm(full: &[Vec<f64>], f: &[f64], dx: f64) -> Vec<f64> {
    full.iter()
        .map(|row| {
            let prod: Vec<f64> = row.iter().zip(f).map(|(k, v)| k * v).collect();
            gregory(&prod, dx)
        })
        .collect()
}

/// `w = u − ∫p u`, `z = v̂ − ∫γ u − D₀∫k v̂`, and `h`.
pub fn forward_transform(u: &[f64], vhat: &[f64], tables: &KernelTables) -> Result<TargetSnapshot> {
    check_len(tables, u, "u")?;
    check_len(tables, vhat, "vhat")?;
    let dx = tables.dx;
    let d0 = tables.config.d0;
    let pu = volterra(&tables.p_tri, u, dx);
    let gu = fredholm(&tables.gamma_grid, u, dx);
    let kv = tables.kappa_weights.convolve(vhat);
    let w: Vec<f64> = u.iter().zip(&pu).map(|(a, b)| a - b).collect();
    let z: Vec<f64> = (0..u.len()).map(|i| vhat[i] - gu[i] - d0 * kv[i]).collect();
    let h = target_h(&w, &z, tables);
    Ok(TargetSnapshot { w, z, h })
}

/// `(u, v̂)` from `(w, z)`: `u = w + ∫q w`, `v̂ = z + ∫η w + D₀∫l z`.
pub fn inverse_transform(w: &[f64], z: &[f64], tables: &KernelTables) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(tables, w, "w")?;
    check_len(tables, z, "z")?;
    Ok((inverse_u(w, tables), inverse_vhat(w, z, tables)))
}

fn inverse_u(w: &[f64], tables: &KernelTables) -> Vec<f64> {
    let qw = volterra(&tables.q_tri, w, tables.dx);
    w.iter().zip(&qw).map(|(a, b)| a + b).collect()
}

fn inverse_vhat(w: &[f64], z: &[f64], tables: &KernelTables) -> Vec<f64> {
    let ew = fredholm(&tables.eta_grid, w, tables.dx);
    let lz = tables.l_weights.convolve_quadratic(z);
    let d0 = tables.config.d0;
    (0..w.len()).map(|i| z[i] + ew[i] + d0 * lz[i]).collect()
}

fn target_h(w: &[f64], z: &[f64], tables: &KernelTables) -> Vec<f64> {
    derivative(&inverse_vhat(w, z, tables), tables.dx)
}
