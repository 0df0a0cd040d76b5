//! Composite trapezoid sums and product-integration weights for
//! weakly singular convolution kernels.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

const GL_NODES: usize = 16;

/// Composite trapezoid over uniformly spaced samples.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Trapezoid weights for `n` uniformly spaced nodes.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 0 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    if n == 1 {
        w[0] = 0.0;
    }
    w
}

/// Gregory weights with third-order end corrections, exact for cubics;
/// below 8 nodes this falls back to the trapezoid rule.
pub fn gregory_weights(n: usize, h: f64) -> Vec<f64> {
    if n < 8 {
        return trapezoid_weights(n, h);
    }
    const END: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
    let mut w = vec![h; n];
    for (k, e) in END.iter().enumerate() {
        w[k] = e * h;
        w[n - 1 - k] = e * h;
    }
    w
}

/// Integral of uniformly spaced samples with [`gregory_weights`].
pub fn gregory(values: &[f64], h: f64) -> f64 {
    gregory_weights(values.len(), h).iter().zip(values).map(|(w, v)| w * v).sum()
}

fn gauss_legendre() -> GaussLegendre {
    GaussLegendre::new(NonZeroUsize::new(GL_NODES).unwrap())
}

/// Moments of a convolution kernel `K(s)` against the two halves of the
/// piecewise-linear hat basis on the grid `s_m = m·h`:
///
/// ```text
/// left[m]  = ∫_{s_m}^{s_{m+1}} K(s) (s_{m+1} − s)/h ds
/// right[m] = ∫_{s_m}^{s_{m+1}} K(s) (s − s_m)/h ds
/// ```
///
/// `K` may carry an integrable `s^{-1/2}` singularity at `s = 0`; the first
/// cell is integrated after the substitution `s = h σ²`. An optional
/// trailing cell of width `< h` ends at `s_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductWeights {
    pub h: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    /// Right end of each cell (the last one may be shorter than `h`).
    pub ends: Vec<f64>,
    /// Moments against the quadratic Lagrange basis on nodes `m, m+1, m+2`
    /// (uniform cells only).
    pub quad_ahead: Vec<[f64; 3]>,
    /// Same on nodes `m−1, m, m+1`.
    pub quad_behind: Vec<[f64; 3]>,
}

/// Quadratic Lagrange basis on nodes `offset, offset+1, offset+2` at `τ`.
fn lagrange3(offset: f64, tau: f64) -> [f64; 3] {
    let n = [offset, offset + 1.0, offset + 2.0];
    let mut out = [0.0; 3];
    for a in 0..3 {
        let mut w = 1.0;
        for b in 0..3 {
            if a != b {
                w *= (tau - n[b]) / (n[a] - n[b]);
            }
        }
        out[a] = w;
    }
    out
}

impl ProductWeights {
    /// Weights for `cells` cells of width `h`, plus a short cell up to `s_end`
    /// when `s_end > cells·h`.
    pub fn new<K: Fn(f64) -> f64>(h: f64, cells: usize, s_end: Option<f64>, kernel: K) -> Self {
        let gl = gauss_legendre();
        let mut ends: Vec<f64> = (1..=cells).map(|m| m as f64 * h).collect();
        if let Some(end) = s_end {
            let last = cells as f64 * h;
            if end > last * (1.0 + 1e-12) {
                ends.push(end);
            }
        }
        let mut left = Vec::with_capacity(ends.len());
        let mut right = Vec::with_capacity(ends.len());
        let mut quad_ahead = Vec::with_capacity(cells);
        let mut quad_behind = Vec::with_capacity(cells);
        let mut a = 0.0;
        for (m, &b) in ends.iter().enumerate() {
            let w = b - a;
            if m < cells {
                // τ = (s − s_m)/h ∈ [0,1]; first cell via τ = σ²
                let moments = |offset: f64| {
                    let mut acc = [0.0; 3];
                    for c in 0..3 {
                        acc[c] = if m == 0 {
                            gl.integrate(0.0, 1.0, |sig| {
                                let tau = sig * sig;
                                kernel(h * tau) * lagrange3(offset, tau)[c] * 2.0 * h * sig
                            })
                        } else {
                            gl.integrate(0.0, 1.0, |tau| kernel(a + h * tau) * lagrange3(offset, tau)[c] * h)
                        };
                    }
                    acc
                };
                quad_ahead.push(moments(0.0));
                quad_behind.push(moments(-1.0));
            }
            let (l, r) = if m == 0 {
                // s = w σ², ds = 2 w σ dσ
                let l = gl.integrate(0.0, 1.0, |sig| {
                    let s = w * sig * sig;
                    kernel(s) * 2.0 * w * sig * (1.0 - sig * sig)
                });
                let r = gl.integrate(0.0, 1.0, |sig| {
                    let s = w * sig * sig;
                    kernel(s) * 2.0 * w * sig * sig * sig
                });
                (l, r)
            } else {
                let l = gl.integrate(a, b, |s| kernel(s) * (b - s) / w);
                let r = gl.integrate(a, b, |s| kernel(s) * (s - a) / w);
                (l, r)
            };
            left.push(l);
            right.push(r);
            a = b;
        }
        Self { h, left, right, ends, quad_ahead, quad_behind }
    }

    pub fn cells(&self) -> usize {
        self.left.len()
    }

    /// Nodal weights `W_m` for samples at `s_0, …, s_cells`: the integral of
    /// `K` against the piecewise-linear interpolant of those samples.
    pub fn nodal(&self) -> Vec<f64> {
        let n = self.cells();
        let mut w = vec![0.0; n + 1];
        for m in 0..n {
            w[m] += self.left[m];
            w[m + 1] += self.right[m];
        }
        w
    }

    /// Volterra convolution `∫_0^{x_i} K(x_i − y) f(y) dy` on the uniform
    /// grid `f[j] = f(j·h)`, `f` piecewise linear between nodes.
    pub fn convolve_at(&self, f: &[f64], i: usize) -> f64 {
        let mut acc = 0.0;
        for m in 0..i {
            acc += self.left[m] * f[i - m] + self.right[m] * f[i - m - 1];
        }
        acc
    }

    /// Like [`ProductWeights::convolve_at`] with `f` piecewise quadratic:
    /// third-order for smooth `f`.
    pub fn convolve_quadratic_at(&self, f: &[f64], i: usize) -> f64 {
        if i == 0 || f.len() < 3 {
            return self.convolve_at(f, i);
        }
        let mut acc = 0.0;
        for m in 0..i {
            let j = i - m;
            if m + 2 <= i {
                let w = &self.quad_ahead[m];
                acc += w[0] * f[j] + w[1] * f[j - 1] + w[2] * f[j - 2];
            } else {
                let w = &self.quad_behind[m];
                acc += w[0] * f[j + 1] + w[1] * f[j] + w[2] * f[j - 1];
            }
        }
        acc
    }

    pub fn convolve_quadratic(&self, f: &[f64]) -> Vec<f64> {
        (0..f.len()).map(|i| self.convolve_quadratic_at(f, i)).collect()
    }

    /// `convolve_at` for every node.
    pub fn convolve(&self, f: &[f64]) -> Vec<f64> {
        (0..f.len()).map(|i| self.convolve_at(f, i)).collect()
    }
}
