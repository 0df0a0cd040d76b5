//! Crank–Nicolson stepping of `u_t = u_xx + λu` on `[0,1]` with `u(0) = 0`
//! and time-varying Dirichlet data at `x = 1`.

use crate::error::{Error, Result};

/// Plant state on the uniform grid `x_i = i·dx`, `i = 0..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantProfile {
    pub values: Vec<f64>,
    pub dx: f64,
    pub t: f64,
}

impl PlantProfile {
    pub fn new(values: Vec<f64>, t: f64) -> Self {
        let dx = 1.0 / (values.len() - 1) as f64;
        Self { values, dx, t }
    }

    /// Samples `f` on `M + 1` nodes.
    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Self {
        Self::new((0..=m).map(|i| f(i as f64 / m as f64)).collect(), 0.0)
    }

    pub fn m(&self) -> usize {
        self.values.len() - 1
    }
}

/// Factorised Crank–Nicolson operator for fixed `(M, dt, λ)`.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    m: usize,
    dt: f64,
    lambda: f64,
    rho: f64,
    explicit_diag: f64,
    /// Thomas sweep: modified super-diagonal and reciprocal pivots.
    c_prime: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl CrankNicolson {
    pub fn new(m: usize, dt: f64, lambda: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::GridMismatch(format!("need at least 3 nodes, got {}", m + 1)));
        }
        if !(dt > 0.0) || !dt.is_finite() || !lambda.is_finite() {
            return Err(Error::NonFinite("plant step parameters"));
        }
        let dx = 1.0 / m as f64;
        let rho = dt / (2.0 * dx * dx);
        let diag = 1.0 + 2.0 * rho - 0.5 * dt * lambda;
        let off = -rho;
        let n = m - 1;
        let mut c_prime = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev = 0.0;
        for i in 0..n {
            let pivot = diag - off * prev;
            inv_pivot[i] = 1.0 / pivot;
            prev = off * inv_pivot[i];
            c_prime[i] = prev;
        }
        Ok(Self {
            m,
            dt,
            lambda,
            rho,
            explicit_diag: 1.0 - 2.0 * rho + 0.5 * dt * lambda,
            c_prime,
            inv_pivot,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Advances `profile` by one step in place.
    pub fn step(&self, profile: &mut PlantProfile, bc_now: f64, bc_next: f64) -> Result<()> {
        if profile.m() != self.m {
            return Err(Error::GridMismatch(format!(
                "profile has {} cells, stepper {}",
                profile.m(),
                self.m
            )));
        }
        if !bc_now.is_finite() || !bc_next.is_finite() {
            return Err(Error::NonFinite("plant boundary data"));
        }
        let u = &mut profile.values;
        let n = self.m - 1;
        let off = -self.rho;
        let mut rhs = vec![0.0; n];
        for i in 1..self.m {
            let right = if i + 1 == self.m { bc_now } else { u[i + 1] };
            rhs[i - 1] = self.rho * (u[i - 1] + right) + self.explicit_diag * u[i];
        }
        rhs[n - 1] += self.rho * bc_next;
        // forward sweep
        let mut prev = 0.0;
        for i in 0..n {
            let d = (rhs[i] - off * prev) * self.inv_pivot[i];
            rhs[i] = d;
            prev = d;
        }
        // back substitution
        for i in (0..n - 1).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
        u[0] = 0.0;
        u[1..self.m].copy_from_slice(&rhs);
        u[self.m] = bc_next;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("plant state"));
        }
        profile.t += self.dt;
        Ok(())
    }
}

/// One Crank–Nicolson step. Builds a fresh factorisation; time loops should
/// keep a [`CrankNicolson`] instead.
pub fn step_cn(
    profile: &PlantProfile,
    bc_now: f64,
    bc_next: f64,
    lambda: f64,
    dt: f64,
) -> Result<PlantProfile> {
    if profile.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("plant state"));
    }
    let mut next = profile.clone();
    CrankNicolson::new(profile.m(), dt, lambda)?.step(&mut next, bc_now, bc_next)?;
    Ok(next)
}
