//! Finite-state Markov delay process: generator validation, transition
//! probabilities, exact path sampling and path files.

use std::fmt;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::distributions::WeightedIndex;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorIssue {
    NotSquare { rows: usize, cols: usize },
    NonFinite { row: usize, col: usize },
    NegativeRate { row: usize, col: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
}

impl fmt::Display for GeneratorIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::NotSquare { rows, cols } => write!(f, "matrix is {rows}x{cols}, not square"),
            Self::NonFinite { row, col } => write!(f, "entry ({row}, {col}) is not finite"),
            Self::NegativeRate { row, col, value } => {
                write!(f, "off-diagonal entry ({row}, {col}) = {value} is negative")
            }
            Self::RowSum { row, sum } => write!(f, "row {row} sums to {sum:e}, not 0"),
        }
    }
}

/// Every problem found in a candidate generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorDiagnostics {
    pub issues: Vec<GeneratorIssue>,
}

impl fmt::Display for GeneratorDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for GeneratorDiagnostics {}

/// Checks that `q` is a conservative generator: nonnegative off-diagonal
/// rates and rows summing to zero.
pub fn validate_generator(q: &DMatrix<f64>) -> std::result::Result<(), GeneratorDiagnostics> {
    let mut issues = Vec::new();
    if q.nrows() != q.ncols() {
        issues.push(GeneratorIssue::NotSquare { rows: q.nrows(), cols: q.ncols() });
        return Err(GeneratorDiagnostics { issues });
    }
    for i in 0..q.nrows() {
        let mut finite = true;
        for j in 0..q.ncols() {
            let v = q[(i, j)];
            if !v.is_finite() {
                issues.push(GeneratorIssue::NonFinite { row: i, col: j });
                finite = false;
            } else if i != j && v < 0.0 {
                issues.push(GeneratorIssue::NegativeRate { row: i, col: j, value: v });
            }
        }
        if finite {
            let sum: f64 = q.row(i).iter().sum();
            let scale = q[(i, i)].abs().max(1.0);
            if sum.abs() > ROW_SUM_TOL * scale {
                issues.push(GeneratorIssue::RowSum { row: i, sum });
            }
        }
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(GeneratorDiagnostics { issues })
    }
}

/// Delay states `D₁ < … < D_r`, their generator and the reference delay `D₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayModel {
    states: Vec<f64>,
    q: DMatrix<f64>,
    d0: f64,
}

impl DelayModel {
    pub fn new(states: Vec<f64>, q: DMatrix<f64>, d0: f64) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::DelayModel("no delay states".into()));
        }
        if states.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return Err(Error::DelayModel("delay states must be positive and finite".into()));
        }
        if let Some(w) = states.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::DelayModel(format!(
                "delay states must increase strictly ({} then {})",
                w[0], w[1]
            )));
        }
        if q.nrows() != states.len() || q.ncols() != states.len() {
            return Err(Error::DelayModel(format!(
                "generator is {}x{} but there are {} states",
                q.nrows(),
                q.ncols(),
                states.len()
            )));
        }
        validate_generator(&q)?;
        let (lo, hi) = (states[0], states[states.len() - 1]);
        if !(d0 >= lo && d0 <= hi) {
            return Err(Error::DelayModel(format!("d0 = {d0} outside [{lo}, {hi}]")));
        }
        Ok(Self { states, q, d0 })
    }

    /// Builds the model from a row-major list of generator entries.
    pub fn from_row_major(states: Vec<f64>, q: &[f64], d0: f64) -> Result<Self> {
        let r = states.len();
        if q.len() != r * r {
            return Err(Error::DelayModel(format!(
                "generator has {} entries, expected {}",
                q.len(),
                r * r
            )));
        }
        Self::new(states, DMatrix::from_row_slice(r, r, q), d0)
    }

    /// Deterministic delay `D₁ = D₀`.
    pub fn constant(d0: f64) -> Result<Self> {
        Self::new(vec![d0], DMatrix::zeros(1, 1), d0)
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn q_matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn d0(&self) -> f64 {
        self.d0
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn d_min(&self) -> f64 {
        self.states[0]
    }

    pub fn d_max(&self) -> f64 {
        self.states[self.states.len() - 1]
    }

    /// Diagonal of `Λ_D`.
    pub fn lambda_d(&self) -> &[f64] {
        &self.states
    }

    /// `Σ_D = ((D_j − D₀)/D₀)_j`.
    pub fn sigma_d(&self) -> Vec<f64> {
        self.states.iter().map(|d| (d - self.d0) / self.d0).collect()
    }

    /// `max_j |D_j − D₀|`.
    pub fn max_mismatch(&self) -> f64 {
        self.states.iter().map(|d| (d - self.d0).abs()).fold(0.0, f64::max)
    }

    /// Same states and generator with a different reference delay.
    pub fn with_d0(&self, d0: f64) -> Result<Self> {
        Self::new(self.states.clone(), self.q.clone(), d0)
    }
}

/// `P(t) = exp(Qt)`, by scaling and squaring a truncated Taylor series.
pub fn transition_matrix(model: &DelayModel, t: f64) -> Result<DMatrix<f64>> {
    if !t.is_finite() {
        return Err(Error::NonFinite("transition time"));
    }
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let a = model.q_matrix() * t;
    let r = a.nrows();
    let norm = (0..r).map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale >= 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = a * scale;
    let mut term = DMatrix::identity(r, r);
    let mut p = DMatrix::identity(r, r);
    for k in 1..=30 {
        term = &term * &a / k as f64;
        p += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        p = &p * &p;
    }
    p.apply(|v| *v = v.clamp(0.0, 1.0));
    Ok(p)
}

/// A piecewise-constant, right-continuous realization of the delay index.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayPath {
    pub jump_times: Vec<f64>,
    pub state_indices: Vec<usize>,
    pub horizon: f64,
}

impl DelayPath {
    pub fn new(jump_times: Vec<f64>, state_indices: Vec<usize>, horizon: f64) -> Result<Self> {
        let bad = |m: &str| Err(Error::DelayModel(format!("invalid delay path: {m}")));
        if jump_times.is_empty() || jump_times.len() != state_indices.len() {
            return bad("jump times and states must be nonempty and of equal length");
        }
        if jump_times[0] != 0.0 {
            return bad("first segment must start at 0");
        }
        if jump_times.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("jump times must increase strictly");
        }
        if !(horizon > 0.0) || jump_times[jump_times.len() - 1] > horizon {
            return bad("last jump lies beyond the horizon");
        }
        Ok(Self { jump_times, state_indices, horizon })
    }

    /// A single segment holding `index` on `[0, horizon]`.
    pub fn constant(index: usize, horizon: f64) -> Self {
        Self { jump_times: vec![0.0], state_indices: vec![index], horizon }
    }

    /// State index held at `t`; at a jump time this is the post-jump state.
    pub fn index_at(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange { t, horizon: self.horizon });
        }
        let k = self.jump_times.partition_point(|&s| s <= t);
        Ok(self.state_indices[k - 1])
    }

    pub fn jumps(&self) -> usize {
        self.jump_times.len() - 1
    }

    /// Checks that every index refers to a state of `model`.
    pub fn check_states(&self, model: &DelayModel) -> Result<()> {
        match self.state_indices.iter().find(|&&j| j >= model.len()) {
            Some(j) => Err(Error::DelayModel(format!(
                "path visits state {j} but the model has {} states",
                model.len()
            ))),
            None => Ok(()),
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# horizon={}", self.horizon)?;
        writeln!(w, "jump_time,state_index")?;
        for (t, j) in self.jump_times.iter().zip(&self.state_indices) {
            writeln!(w, "{t},{j}")?;
        }
        Ok(())
    }

    /// Parses the format written by [`DelayPath::write_to`]. Other `#` lines
    /// are ignored.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut horizon = None;
        let mut header = false;
        let mut times = Vec::new();
        let mut states = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let err = |msg: String| Error::PathFile { line: n + 1, msg };
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if let Some(h) = c.trim().strip_prefix("horizon=") {
                    horizon = Some(h.parse::<f64>().map_err(|e| err(format!("horizon: {e}")))?);
                }
                continue;
            }
            if !header {
                if line != "jump_time,state_index" {
                    return Err(err(format!("expected header, found `{line}`")));
                }
                header = true;
                continue;
            }
            let (t, j) = line.split_once(',').ok_or_else(|| err("expected two columns".into()))?;
            times.push(t.trim().parse::<f64>().map_err(|e| err(format!("jump_time: {e}")))?);
            states.push(j.trim().parse::<usize>().map_err(|e| err(format!("state_index: {e}")))?);
        }
        let horizon = horizon.ok_or(Error::PathFile { line: 0, msg: "missing horizon".into() })?;
        Self::new(times, states, horizon)
    }
}

/// `(j, D_j)` held at time `t`.
pub fn delta_at(path: &DelayPath, model: &DelayModel, t: f64) -> Result<(usize, f64)> {
    let j = path.index_at(t)?;
    let d = *model
        .states()
        .get(j)
        .ok_or_else(|| Error::DelayModel(format!("state index {j} out of range")))?;
    Ok((j, d))
}

/// Independent random stream for realization `index` of an ensemble seeded
/// with `master`.
pub fn realization_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Exact event-driven sample of the delay index on `[0, horizon]`.
pub fn sample_path_with<R: Rng + ?Sized>(
    model: &DelayModel,
    initial_index: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<DelayPath> {
    if initial_index >= model.len() {
        return Err(Error::DelayModel(format!(
            "initial index {initial_index} out of range for {} states",
            model.len()
        )));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::DelayModel(format!("horizon must be positive, got {horizon}")));
    }
    let q = model.q_matrix();
    let r = model.len();
    let mut times = vec![0.0];
    let mut states = vec![initial_index];
    let mut t = 0.0;
    let mut j = initial_index;
    loop {
        let rate = -q[(j, j)];
        if rate <= 0.0 {
            break;
        }
        t += Exp::new(rate).expect("positive rate").sample(rng);
        if t > horizon {
            break;
        }
        let weights = (0..r).map(|k| if k == j { 0.0 } else { q[(j, k)] });
        j = WeightedIndex::new(weights).expect("positive exit rate").sample(rng);
        times.push(t);
        states.push(j);
    }
    Ok(DelayPath { jump_times: times, state_indices: states, horizon })
}

/// [`sample_path_with`] on realization stream 0 of `seed`.
pub fn sample_path(model: &DelayModel, initial_index: usize, horizon: f64, seed: u64) -> Result<DelayPath> {
    sample_path_with(model, initial_index, horizon, &mut realization_rng(seed, 0))
}
