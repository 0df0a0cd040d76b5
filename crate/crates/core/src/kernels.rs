//! Backstepping kernels for the reaction–diffusion plant and its transport
//! actuator.
//!
//! The plant kernels `p` (forward) and `q` (inverse) are closed-form Bessel
//! expressions. The actuator kernels are Fourier series, the forward ones in
//! the sine coefficients `p₁ₙ` of `p(1,·)` and the inverse ones in the sine
//! coefficients `q₁ₙ` of `q(1,·)`:
//!
//! ```text
//! γ(x,y) = Σ e^{D₀(λ−n²π²)x} sin(nπy) p₁ₙ      η(x,y) = Σ e^{−D₀n²π²x} sin(nπy) q₁ₙ
//! κ(s)   = −Σ (−1)ⁿ nπ e^{D₀(λ−n²π²)s} p₁ₙ      l(s)   = −Σ (−1)ⁿ nπ e^{−D₀n²π²s} q₁ₙ
//! ```
//!
//! with `k(x,y) = κ(x−y)` and `l(x,y) = l(x−y)`. At `x = 0` the inverse map
//! must undo `z(0) = v̂(0) − ∫p(1,y)u dy`, and `∫p(1,y)u dy = ∫q(1,y)w dy`
//! by kernel reciprocity, so `η(0,·) = q(1,·)`.
//!
//! `p(1,1) = q(1,1) = −λ/2` is not zero, so the coefficients only decay like
//! `1/n`: the sine series converge slowly near `y = 1` and the `κ`/`l`
//! series diverge on the diagonal like `s^{-1/2}`. All series are therefore
//! split as
//!
//! ```text
//! p(1,y) = f₁ y + f₂ (y³ − y)/6 + r(y)
//! ```
//!
//! where `f₁ = p(1,1)`, `f₂ = ∂²_y p(1,1)` (likewise for `q`). The cubic has
//! known sine coefficients and its contributions are summed in closed form
//! (Jacobi theta identities for the `κ`/`l` sums); `r` vanishes with its
//! second derivative at both ends, so its coefficients decay like `n⁻⁵` and
//! `N` quadrature coefficients suffice.
//!
//! The value returned for `κ(0)` is the finite part of the diagonal
//! singularity, which equals `−∂_y p(1,1)`; for `l(x,x)` it is `−∂_y q(1,1)`.
//! Integrals against `κ` and `l` must use [`ProductWeights`], never a nodal
//! rule through `s = 0`.

use std::f64::consts::PI;

use crate::bessel::{i1_over_z, j1_over_z};
use crate::error::{Error, Result};
use crate::quadrature::ProductWeights;

pub const DEFAULT_TERMS: usize = 200;

/// Series stop: `|nπ c_n| e^{(growth − D₀n²π²)x}` below this for
/// `STOP_RUN` consecutive `n`.
const STOP_TOL: f64 = 1e-12;
const STOP_RUN: usize = 5;
const MAX_TERMS: usize = 1_000_000;
/// Below this value of `D₀π²s` the theta sums use their small-argument
/// (Poisson-resummed) forms; the dropped terms are `O(e^{-π²/0.2})`.
const THETA_SWITCH: f64 = 0.2;
const SINGULAR_SQ: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    /// Reaction coefficient λ.
    pub lambda: f64,
    /// Reference delay D₀.
    pub d0: f64,
    /// Number of explicit Fourier coefficients N.
    pub n_terms: usize,
    /// Trapezoid nodes used for the coefficients.
    pub quad_points: usize,
}

pub fn default_quad_points(n_terms: usize) -> usize {
    (10 * n_terms).max(2001)
}

impl KernelConfig {
    pub fn new(lambda: f64, d0: f64) -> Self {
        Self {
            lambda,
            d0,
            n_terms: DEFAULT_TERMS,
            quad_points: default_quad_points(DEFAULT_TERMS),
        }
    }

    /// Changes `N` and resets the quadrature size to its default for that `N`.
    pub fn with_terms(mut self, n_terms: usize) -> Self {
        self.n_terms = n_terms;
        self.quad_points = default_quad_points(n_terms);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::KernelConfig(m));
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.d0 > 0.0) || !self.d0.is_finite() {
            return bad(format!("d0 must be positive, got {}", self.d0));
        }
        if self.n_terms < 1 {
            return bad("n_terms must be at least 1".into());
        }
        if self.quad_points < 2 * self.n_terms {
            return bad(format!(
                "quad_points = {} is below 2·n_terms = {}",
                self.quad_points,
                2 * self.n_terms
            ));
        }
        Ok(())
    }
}

fn check_triangle(x: f64, y: f64) -> Result<()> {
    const EPS: f64 = 1e-14;
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::NonFinite("kernel coordinate"));
    }
    let unit = -EPS..=1.0 + EPS;
    if !unit.contains(&x) || !unit.contains(&y) {
        return Err(Error::KernelDomain(format!("({x}, {y}) outside the unit square")));
    }
    if y > x + EPS {
        return Err(Error::KernelDomain(format!("y = {y} exceeds x = {x}")));
    }
    Ok(())
}

fn bessel_kernel(x: f64, y: f64, lambda: f64, ratio: fn(f64) -> f64) -> f64 {
    let z2 = (lambda * (x * x - y * y)).max(0.0);
    let r = if z2 < SINGULAR_SQ { 0.5 } else { ratio(z2) };
    -lambda * y * r
}

/// `p(x,y) = −λy I₁(z)/z`, `z = √(λ(x²−y²))`, for `0 ≤ y ≤ x ≤ 1`.
pub fn eval_p(x: f64, y: f64, cfg: &KernelConfig) -> Result<f64> {
    check_triangle(x, y)?;
    Ok(bessel_kernel(x, y, cfg.lambda, i1_over_z))
}

/// `q(x,y) = −λy J₁(z)/z`, the inverse-transform kernel.
pub fn eval_q(x: f64, y: f64, cfg: &KernelConfig) -> Result<f64> {
    check_triangle(x, y)?;
    Ok(bessel_kernel(x, y, cfg.lambda, j1_over_z))
}

/// `p(1,1) = q(1,1) = −λ/2`.
pub fn edge_value(lambda: f64) -> f64 {
    -0.5 * lambda
}

/// `∂²_y p(1,y)` at `y = 1`, from the Maclaurin expansion of `I₁(z)/z` in
/// `z² = λ(1−y²)`: only the first three terms survive two derivatives at
/// `y = 1`.
pub fn edge_curvature(lambda: f64) -> f64 {
    3.0 * lambda * lambda / 8.0 - lambda.powi(3) / 48.0
}

/// `∂²_y q(1,y)` at `y = 1`; the `z²` term of `J₁(z)/z` flips sign.
pub fn inverse_edge_curvature(lambda: f64) -> f64 {
    -3.0 * lambda * lambda / 8.0 - lambda.powi(3) / 48.0
}

fn sign(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn cubic_part(y: f64, f1: f64, f2: f64) -> f64 {
    f1 * y + f2 * (y * y * y - y) / 6.0
}

/// Sine coefficient of `f₁y + f₂(y³−y)/6`.
fn cubic_coefficient(n: usize, f1: f64, f2: f64) -> f64 {
    let w = n as f64 * PI;
    sign(n) * (-2.0 * f1 / w + 2.0 * f2 / (w * w * w))
}

/// Sine coefficients `p₁ₙ = 2∫₀¹ sin(nπξ) p(1,ξ) dξ`, `n = 1..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoeffs {
    pub p1n: Vec<f64>,
    remainder: Vec<f64>,
    edge_value: f64,
    edge_curvature: f64,
}

impl FourierCoeffs {
    pub fn len(&self) -> usize {
        self.p1n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p1n.is_empty()
    }

    /// `p₁ₙ` for any `n ≥ 1`; past `N` only the cubic part is kept.
    pub fn coefficient(&self, n: usize) -> f64 {
        debug_assert!(n >= 1);
        match self.p1n.get(n - 1) {
            Some(&c) => c,
            None => cubic_coefficient(n, self.edge_value, self.edge_curvature),
        }
    }

    /// Coefficients of the smooth remainder `r`.
    pub fn remainder(&self) -> &[f64] {
        &self.remainder
    }

    /// `Σ_{n≤N} p₁ₙ²`.
    pub fn partial_energy(&self) -> f64 {
        self.p1n.iter().map(|c| c * c).sum()
    }

    /// `Σ_{n≥1} p₁ₙ²` including the closed-form tail of the cubic part;
    /// equals `2‖p(1,·)‖²` by Parseval.
    pub fn energy(&self) -> f64 {
        let n = self.len();
        let a = 2.0 * self.edge_value / PI;
        let b = 2.0 * self.edge_curvature / PI.powi(3);
        let zeta_tail = |k: i32, zeta: f64| {
            let head: f64 = (1..=n).rev().map(|m| (m as f64).powi(-k)).sum();
            zeta - head
        };
        let t2 = zeta_tail(2, PI * PI / 6.0);
        let t4 = zeta_tail(4, PI.powi(4) / 90.0);
        let t6 = zeta_tail(6, PI.powi(6) / 945.0);
        self.partial_energy() + a * a * t2 - 2.0 * a * b * t4 + b * b * t6
    }

    /// Plain `N`-term sine sum `Σ_{n≤N} p₁ₙ sin(nπy)`.
    pub fn partial_sum(&self, y: f64) -> f64 {
        self.p1n
            .iter()
            .enumerate()
            .map(|(i, c)| c * ((i + 1) as f64 * PI * y).sin())
            .sum()
    }

    /// The full sine series of `p(1,·)` at `y ∈ [0,1]`. At `y = 1` this is
    /// the left limit `p(1,1)` rather than the series' midpoint value 0.
    pub fn reconstruct(&self, y: f64) -> f64 {
        let r: f64 = self
            .remainder
            .iter()
            .enumerate()
            .map(|(i, c)| c * ((i + 1) as f64 * PI * y).sin())
            .sum();
        cubic_part(y, self.edge_value, self.edge_curvature) + r
    }

    /// Finite part of `−Σ(−1)ⁿ nπ p₁ₙ`, i.e. of `κ` and `l` at `s = 0`.
    /// Analytically `−∂_y p(1,1)`.
    pub fn diagonal_finite_part(&self) -> f64 {
        let r: f64 = self
            .remainder
            .iter()
            .enumerate()
            .map(|(i, c)| sign(i + 1) * (i + 1) as f64 * PI * c)
            .sum();
        -self.edge_value - self.edge_curvature / 3.0 - r
    }
}

/// Computes `p₁ₙ` for `n = 1..N`. The cubic part is integrated exactly and
/// the remainder by the composite trapezoid rule on `quad_points` nodes.
pub fn compute_p1n(cfg: &KernelConfig) -> Result<FourierCoeffs> {
    sine_coefficients(cfg, i1_over_z, edge_curvature(cfg.lambda))
}

/// Sine coefficients `q₁ₙ` of `q(1,·)`, which generate the inverse-transform
/// kernels `η` and `l`.
pub fn compute_q1n(cfg: &KernelConfig) -> Result<FourierCoeffs> {
    sine_coefficients(cfg, j1_over_z, inverse_edge_curvature(cfg.lambda))
}

fn sine_coefficients(cfg: &KernelConfig, ratio: fn(f64) -> f64, f2: f64) -> Result<FourierCoeffs> {
    cfg.validate()?;
    let f1 = edge_value(cfg.lambda);
    let nodes = cfg.quad_points;
    let h = 1.0 / (nodes - 1) as f64;
    let interior: Vec<(f64, f64)> = (1..nodes - 1)
        .map(|i| {
            let xi = i as f64 / (nodes - 1) as f64;
            let r = bessel_kernel(1.0, xi, cfg.lambda, ratio) - cubic_part(xi, f1, f2);
            (xi, r)
        })
        .collect();
    let remainder: Vec<f64> = (1..=cfg.n_terms)
        .map(|n| {
            let w = n as f64 * PI;
            2.0 * h * interior.iter().map(|&(xi, r)| (w * xi).sin() * r).sum::<f64>()
        })
        .collect();
    let p1n = remainder
        .iter()
        .enumerate()
        .map(|(i, r)| cubic_coefficient(i + 1, f1, f2) + r)
        .collect();
    Ok(FourierCoeffs {
        p1n,
        remainder,
        edge_value: f1,
        edge_curvature: f2,
    })
}

/// `Σ_{n≥1} e^{−a n²}`.
fn theta_sum(a: f64) -> f64 {
    if a < THETA_SWITCH {
        0.5 * ((PI / a).sqrt() - 1.0)
    } else {
        let mut s = 0.0;
        for n in 1.. {
            let t = (-a * (n * n) as f64).exp();
            s += t;
            if t < 1e-18 * s {
                break;
            }
        }
        s
    }
}

/// `Σ_{n≥1} e^{−a n²}/n²`.
fn theta_sum_inv_sq(a: f64) -> f64 {
    if a < THETA_SWITCH {
        PI * PI / 6.0 - (PI * a).sqrt() + 0.5 * a
    } else {
        let mut s = 0.0;
        for n in 1.. {
            let nf = n as f64;
            let t = (-a * nf * nf).exp() / (nf * nf);
            s += t;
            if t < 1e-18 * s {
                break;
            }
        }
        s
    }
}

/// `e^{growth·x} Σ e^{−D₀n²π²x} sin(nπy) p₁ₙ` (γ for `growth = D₀λ`, η for 0).
fn sine_series(x: f64, y: f64, growth: f64, coeffs: &FourierCoeffs, d0: f64) -> f64 {
    let a = d0 * PI * PI * x.max(0.0);
    if a < 1e-12 {
        return coeffs.reconstruct(y);
    }
    let mut sum = 0.0;
    let mut run = 0;
    for n in 1..=MAX_TERMS {
        let nf = n as f64;
        let c = coeffs.coefficient(n);
        let decay = (-a * nf * nf).exp();
        sum += decay * (nf * PI * y).sin() * c;
        if (nf * PI * c).abs() * (growth * x - a * nf * nf).exp() < STOP_TOL {
            run += 1;
            if run >= STOP_RUN {
                break;
            }
        } else {
            run = 0;
        }
    }
    (growth * x).exp() * sum
}

/// `−e^{growth·s} Σ (−1)ⁿ nπ e^{−D₀n²π²s} p₁ₙ` (κ for `growth = D₀λ`, l for 0).
fn cosine_series(s: f64, growth: f64, coeffs: &FourierCoeffs, d0: f64) -> f64 {
    if s < -1e-14 {
        return f64::NAN;
    }
    if s <= 0.0 {
        return coeffs.diagonal_finite_part();
    }
    let a = d0 * PI * PI * s;
    let f1 = coeffs.edge_value;
    let f2 = coeffs.edge_curvature;
    let mut r = 0.0;
    let mut run = 0;
    for (i, c) in coeffs.remainder.iter().enumerate() {
        let n = (i + 1) as f64;
        let t = sign(i + 1) * n * PI * (-a * n * n).exp() * c;
        r += t;
        if t.abs() * (growth * s).exp() < STOP_TOL {
            run += 1;
            if run >= STOP_RUN {
                break;
            }
        } else {
            run = 0;
        }
    }
    let singular = 2.0 * f1 * theta_sum(a) - 2.0 * f2 / (PI * PI) * theta_sum_inv_sq(a);
    (growth * s).exp() * (singular - r)
}

/// `γ(x,y)`.
pub fn eval_gamma(x: f64, y: f64, coeffs: &FourierCoeffs, cfg: &KernelConfig) -> f64 {
    sine_series(x, y, cfg.d0 * cfg.lambda, coeffs, cfg.d0)
}

/// `η(x,y)`; `coeffs` are the inverse coefficients from [`compute_q1n`].
pub fn eval_eta(x: f64, y: f64, coeffs: &FourierCoeffs, cfg: &KernelConfig) -> f64 {
    sine_series(x, y, 0.0, coeffs, cfg.d0)
}

/// `∂_x η(x,y)` by term-wise differentiation; requires `x > 0`.
pub fn eval_eta_x(x: f64, y: f64, coeffs: &FourierCoeffs, cfg: &KernelConfig) -> f64 {
    if x <= 0.0 {
        return f64::NAN;
    }
    let a = cfg.d0 * PI * PI * x;
    let mut sum = 0.0;
    let mut run = 0;
    for n in 1..=MAX_TERMS {
        let nf = n as f64;
        let rate = cfg.d0 * PI * PI * nf * nf;
        let t = -rate * (-a * nf * nf).exp() * (nf * PI * y).sin() * coeffs.coefficient(n);
        sum += t;
        if t.abs() < STOP_TOL {
            run += 1;
            if run >= STOP_RUN {
                break;
            }
        } else {
            run = 0;
        }
    }
    sum
}

/// `κ(s) = k(x, x−s)`. Singular like `s^{-1/2}` at `s = 0`, where the finite
/// part is returned.
pub fn eval_kappa(s: f64, coeffs: &FourierCoeffs, cfg: &KernelConfig) -> f64 {
    cosine_series(s, cfg.d0 * cfg.lambda, coeffs, cfg.d0)
}

/// `k(x,y) = κ(x−y)` for `y ≤ x`.
pub fn eval_k(x: f64, y: f64, coeffs: &FourierCoeffs, cfg: &KernelConfig) -> f64 {
    eval_kappa(x - y, coeffs, cfg)
}

/// `l(x,y)` for `y ≤ x`; depends on `x − y` only. `coeffs` come from
/// [`compute_q1n`].
pub fn eval_l(x: f64, y: f64, coeffs: &FourierCoeffs, cfg: &KernelConfig) -> f64 {
    cosine_series(x - y, 0.0, coeffs, cfg.d0)
}

/// Kernel samples on the uniform grid `x_i = i/M`, precomputed once so
/// that time loops never evaluate a series.
#[derive(Debug, Clone)]
pub struct KernelTables {
    pub config: KernelConfig,
    /// `p₁ₙ`, generating `γ` and `κ`.
    pub coeffs: FourierCoeffs,
    /// `q₁ₙ`, generating `η` and `l`.
    pub inverse_coeffs: FourierCoeffs,
    pub dx: f64,
    pub grid: Vec<f64>,
    /// `p(1, x_i)`
    pub p_1: Vec<f64>,
    /// `γ(1, x_i)`
    pub gamma_1: Vec<f64>,
    /// `κ(x_i)`; entry 0 is `k_diag`.
    pub kappa: Vec<f64>,
    /// `η(1, x_i)`
    pub eta_row: Vec<f64>,
    /// `l(s_i)`, `l(x_i, x_j) = l_band[i − j]`; entry 0 is `l_diag`.
    pub l_band: Vec<f64>,
    /// Finite part of `k(x,x)`.
    pub k_diag: f64,
    /// Finite part of `l(x,x)`.
    pub l_diag: f64,
    /// `p(x_i, x_j)` for `j ≤ i`.
    pub p_tri: Vec<Vec<f64>>,
    /// `q(x_i, x_j)` for `j ≤ i`.
    pub q_tri: Vec<Vec<f64>>,
    /// `γ(x_i, x_j)`
    pub gamma_grid: Vec<Vec<f64>>,
    /// `η(x_i, x_j)`
    pub eta_grid: Vec<Vec<f64>>,
    /// Product weights of `κ` on spacing `dx`.
    pub kappa_weights: ProductWeights,
    /// Product weights of `l` on spacing `dx`.
    pub l_weights: ProductWeights,
}

impl KernelTables {
    pub fn m(&self) -> usize {
        self.grid.len() - 1
    }

    /// `k(x_i, x_j)` for `j ≤ i`.
    pub fn k_at(&self, i: usize, j: usize) -> f64 {
        self.kappa[i - j]
    }
}

pub fn build_tables(cfg: &KernelConfig, m: usize) -> Result<KernelTables> {
    cfg.validate()?;
    if m < 10 {
        return Err(Error::KernelConfig(format!("grid size {m} below 10")));
    }
    let coeffs = compute_p1n(cfg)?;
    let inv = compute_q1n(cfg)?;
    let grid: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
    let dx = 1.0 / m as f64;

    let p_1 = grid.iter().map(|&x| eval_p(1.0, x, cfg)).collect::<Result<Vec<_>>>()?;
    let gamma_1 = grid.iter().map(|&x| eval_gamma(1.0, x, &coeffs, cfg)).collect();
    let kappa: Vec<f64> = grid.iter().map(|&s| eval_kappa(s, &coeffs, cfg)).collect();
    let eta_row = grid.iter().map(|&x| eval_eta(1.0, x, &inv, cfg)).collect();
    let l_band = grid.iter().map(|&s| eval_l(s, 0.0, &inv, cfg)).collect();
    let k_diag = coeffs.diagonal_finite_part();
    let l_diag = inv.diagonal_finite_part();

    let tri = |f: fn(f64, f64, &KernelConfig) -> Result<f64>| -> Result<Vec<Vec<f64>>> {
        grid.iter()
            .map(|&x| grid.iter().take_while(|&&y| y <= x).map(|&y| f(x, y, cfg)).collect())
            .collect()
    };
    let p_tri = tri(eval_p)?;
    let q_tri = tri(eval_q)?;
    let gamma_grid = grid
        .iter()
        .map(|&x| grid.iter().map(|&y| eval_gamma(x, y, &coeffs, cfg)).collect())
        .collect();
    let eta_grid = grid
        .iter()
        .map(|&x| grid.iter().map(|&y| eval_eta(x, y, &inv, cfg)).collect())
        .collect();
    let kappa_weights = ProductWeights::new(dx, m, None, |s| eval_kappa(s, &coeffs, cfg));
    let l_weights = ProductWeights::new(dx, m, None, |s| eval_l(s, 0.0, &inv, cfg));

    Ok(KernelTables {
        config: *cfg,
        coeffs,
        inverse_coeffs: inv,
        dx,
        grid,
        p_1,
        gamma_1,
        kappa,
        eta_row,
        l_band,
        k_diag,
        l_diag,
        p_tri,
        q_tri,
        gamma_grid,
        eta_grid,
        kappa_weights,
        l_weights,
    })
}
