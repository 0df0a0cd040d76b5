//! One closed-loop realization: plant, actuator and controller advanced on a
//! common grid under a sampled or replayed delay path.

use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::actuator::{
    step_transport_pde, vhat_exact, vtilde_exact, ActuatorMode, ActuatorProfiles, ControlHistory, InitialHistory,
};
use crate::controller::ControllerContext;
use crate::delay::{realization_rng, sample_path_with, DelayModel, DelayPath};
use crate::diagnostics::{l2_sq, NormSnapshot};
use crate::error::{Error, Result};
use crate::kernels::{build_tables, default_quad_points, KernelConfig, KernelTables, DEFAULT_TERMS};
use crate::plant::{CrankNicolson, PlantProfile};

/// Runs stop once `‖u‖_{L²}` exceeds this.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Initial profiles sampled on the simulation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub u: Vec<f64>,
    pub vhat: Vec<f64>,
    pub vtilde: Vec<Vec<f64>>,
}

impl InitialData {
    pub fn from_fns(
        m: usize,
        u: impl Fn(f64) -> f64,
        vhat: impl Fn(f64) -> f64,
        vtilde: &[&dyn Fn(f64) -> f64],
    ) -> Self {
        let sample = |f: &dyn Fn(f64) -> f64| (0..=m).map(|i| f(i as f64 / m as f64)).collect::<Vec<_>>();
        Self {
            u: sample(&u),
            vhat: sample(&vhat),
            vtilde: vtilde.iter().map(|f| sample(*f)).collect(),
        }
    }

    /// `u₀ = sin πx`, `v̂₀ = cos πx` and `ṽ₀,j = c_j sin πx` for the given
    /// amplitudes.
    pub fn trigonometric(m: usize, amplitudes: &[f64]) -> Self {
        use std::f64::consts::PI;
        let sample = |f: &dyn Fn(f64) -> f64| (0..=m).map(|i| f(i as f64 / m as f64)).collect::<Vec<_>>();
        Self {
            u: sample(&|x| (PI * x).sin()),
            vhat: sample(&|x| (PI * x).cos()),
            vtilde: amplitudes.iter().map(|&c| sample(&|x| c * (PI * x).sin())).collect(),
        }
    }

    /// All-zero profiles.
    pub fn zero(m: usize, r: usize) -> Self {
        Self { u: vec![0.0; m + 1], vhat: vec![0.0; m + 1], vtilde: vec![vec![0.0; m + 1]; r] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub lambda: f64,
    pub model: DelayModel,
    pub initial_index: usize,
    pub dx: f64,
    pub dt: f64,
    pub horizon: f64,
    pub initial: InitialData,
    /// Control before `t = 0` in exact-history mode.
    pub initial_history: InitialHistory,
    pub mode: ActuatorMode,
    pub controller: bool,
    pub stride: usize,
    pub seed: u64,
    pub n_terms: usize,
    pub quad_points: usize,
    /// Keep `u` profiles at every recorded snapshot.
    pub record_fields: bool,
}

impl SimConfig {
    /// Defaults on a grid of `1/dx` cells: pde actuator, controller on,
    /// stride 1, zero initial history.
    pub fn new(lambda: f64, model: DelayModel, initial_index: usize, dx: f64, dt: f64, horizon: f64, initial: InitialData) -> Self {
        Self {
            lambda,
            model,
            initial_index,
            dx,
            dt,
            horizon,
            initial,
            initial_history: InitialHistory::Zero,
            mode: ActuatorMode::Pde,
            controller: true,
            stride: 1,
            seed: 0,
            n_terms: DEFAULT_TERMS,
            quad_points: default_quad_points(DEFAULT_TERMS),
            record_fields: false,
        }
    }

    /// Number of grid cells `M = 1/dx`.
    pub fn cells(&self) -> Result<usize> {
        let m = 1.0 / self.dx;
        if !(self.dx > 0.0) || (m - m.round()).abs() > 1e-9 * m {
            return Err(Error::GridMismatch(format!("1/dx = {m} is not an integer")));
        }
        Ok(m.round() as usize)
    }

    pub fn steps(&self) -> Result<usize> {
        let n = self.horizon / self.dt;
        if !(self.dt > 0.0) || !(self.horizon > 0.0) || !n.is_finite() {
            return Err(Error::GridMismatch("horizon and dt must be positive".into()));
        }
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::GridMismatch(format!("horizon/dt = {n} is not an integer")));
        }
        Ok(n.round() as usize)
    }

    pub fn kernel_config(&self) -> KernelConfig {
        KernelConfig {
            lambda: self.lambda,
            d0: self.model.d0(),
            n_terms: self.n_terms,
            quad_points: self.quad_points,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.cells()?;
        self.steps()?;
        if !(self.lambda.is_finite()) {
            return Err(Error::NonFinite("lambda"));
        }
        if self.stride == 0 {
            return Err(Error::GridMismatch("snapshot stride must be at least 1".into()));
        }
        if self.initial_index >= self.model.len() {
            return Err(Error::DelayModel(format!(
                "initial index {} out of range for {} states",
                self.initial_index,
                self.model.len()
            )));
        }
        if self.model.d_min() < self.dt {
            return Err(Error::GridMismatch(format!(
                "smallest delay {} is below the time step {}",
                self.model.d_min(),
                self.dt
            )));
        }
        let init = &self.initial;
        let profiles_ok = init.u.len() == m + 1
            && init.vhat.len() == m + 1
            && init.vtilde.len() == self.model.len()
            && init.vtilde.iter().all(|v| v.len() == m + 1);
        if !profiles_ok {
            return Err(Error::GridMismatch(format!(
                "initial profiles must have {} nodes and {} transport components",
                m + 1,
                self.model.len()
            )));
        }
        let all = init.u.iter().chain(&init.vhat).chain(init.vtilde.iter().flatten());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial profile"));
        }
        Ok(())
    }

    /// SHA-256 of the full configuration, hex encoded.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(format!("{self:?}").as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub snapshots: Vec<NormSnapshot>,
    pub delay_path: DelayPath,
    pub diverged: bool,
    /// `u` at each snapshot when fields are recorded.
    pub fields: Vec<Vec<f64>>,
    pub config_hash: String,
}

impl TrajectoryRecord {
    pub fn final_v(&self) -> f64 {
        if self.diverged {
            f64::INFINITY
        } else {
            self.snapshots.last().map_or(f64::NAN, |s| s.v_total)
        }
    }

    pub fn initial_v(&self) -> f64 {
        self.snapshots[0].v_total
    }
}

/// Where the delay path of a run comes from.
#[derive(Debug, Clone)]
pub enum PathSource {
    /// Sample with realization stream `index` of `seed`.
    Seed { seed: u64, index: u64 },
    Replay(DelayPath),
}

/// Shared, precomputed state for running many realizations of one config.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: SimConfig,
    m: usize,
    steps: usize,
    tables: Arc<KernelTables>,
    controller: Option<ControllerContext>,
    plant: CrankNicolson,
    hash: String,
}

impl Simulator {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.cells()?;
        let tables = Arc::new(build_tables(&cfg.kernel_config(), m)?);
        Self::with_tables(cfg, tables)
    }

    /// Reuses kernel tables built for the same `λ`, `D₀` and grid.
    pub fn with_tables(cfg: SimConfig, tables: Arc<KernelTables>) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.cells()?;
        if tables.m() != m || tables.config != cfg.kernel_config() {
            return Err(Error::GridMismatch("kernel tables do not match the configuration".into()));
        }
        let controller = if cfg.controller { Some(ControllerContext::new(&tables, cfg.dt)?) } else { None };
        let plant = CrankNicolson::new(m, cfg.dt, cfg.lambda)?;
        let steps = cfg.steps()?;
        let hash = cfg.fingerprint();
        Ok(Self { cfg, m, steps, tables, controller, plant, hash })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn tables(&self) -> &Arc<KernelTables> {
        &self.tables
    }

    pub fn sample_path(&self, seed: u64, index: u64) -> Result<DelayPath> {
        let mut rng = realization_rng(seed, index);
        sample_path_with(&self.cfg.model, self.cfg.initial_index, self.cfg.horizon, &mut rng)
    }

    pub fn run_source(&self, source: &PathSource) -> Result<TrajectoryRecord> {
        match source {
            PathSource::Seed { seed, index } => self.run(&self.sample_path(*seed, *index)?),
            PathSource::Replay(path) => self.run(path),
        }
    }

    /// Advances the closed loop over `[0, T]` along `path`.
    pub fn run(&self, path: &DelayPath) -> Result<TrajectoryRecord> {
        let cfg = &self.cfg;
        let model = &cfg.model;
        if path.horizon < cfg.horizon * (1.0 - 1e-12) {
            return Err(Error::TimeOutOfRange { t: cfg.horizon, horizon: path.horizon });
        }
        path.check_states(model)?;
        let dt = cfg.dt;
        let dx = 1.0 / self.m as f64;
        let grid = &self.tables.grid;
        let pde = cfg.mode == ActuatorMode::Pde;

        let initial = if pde {
            InitialHistory::Sampled { span: model.d0(), values: cfg.initial.vhat.clone() }
        } else {
            cfg.initial_history.clone()
        };
        let mut history = ControlHistory::new(dt, model.d_max() + 2.0 * dt, initial);
        let mut u = PlantProfile::new(cfg.initial.u.clone(), 0.0);
        let mut profiles = ActuatorProfiles {
            vhat: cfg.initial.vhat.clone(),
            vtilde: cfg.initial.vtilde.clone(),
            mode: cfg.mode,
        };

        let u0 = if pde {
            cfg.initial.vhat[self.m]
        } else if let Some(ctrl) = &self.controller {
            ctrl.compute_control(&u, &history, 0.0)?
        } else {
            0.0
        };
        history.push_control(0.0, u0)?;

        let j0 = path.index_at(0.0)?;
        let mut snapshots = Vec::with_capacity(self.steps / cfg.stride + 2);
        let mut fields = Vec::new();
        let snapshot = |t: f64, u: &PlantProfile, profiles: &ActuatorProfiles, history: &ControlHistory, j: usize| {
            let (vhat, vtilde) = if pde {
                (profiles.vhat.clone(), profiles.vtilde.clone())
            } else {
                (vhat_exact(history, t, grid, model.d0())?, vtilde_exact(history, t, grid, model)?)
            };
            let ctrl = history.latest().unwrap_or(0.0);
            Ok::<_, Error>(NormSnapshot::new(t, &u.values, &vhat, &vtilde, dx, ctrl, j))
        };
        snapshots.push(snapshot(0.0, &u, &profiles, &history, j0)?);
        if cfg.record_fields {
            fields.push(u.values.clone());
        }

        let mut diverged = false;
        for n in 0..self.steps {
            let t = n as f64 * dt;
            let t_next = (n + 1) as f64 * dt;
            let j = path.index_at(t)?;
            let bc_now = u.values[self.m];
            let bc_next = if pde {
                let u_hold = history.latest().unwrap_or(0.0);
                step_transport_pde(&profiles, u_hold, dt, model)?.delivered(j)
            } else {
                history.sample_control(t_next - model.states()[j])?
            };
            self.plant.step(&mut u, bc_now, bc_next)?;
            u.t = t_next;

            let u_next = match &self.controller {
                Some(ctrl) => ctrl.compute_control(&u, &history, t_next)?,
                None => 0.0,
            };
            history.push_control(t_next, u_next)?;
            if pde {
                profiles = step_transport_pde(&profiles, u_next, dt, model)?;
            }

            let norm = l2_sq(&u.values, dx).sqrt();
            let blown = !(norm <= DIVERGENCE_LIMIT);
            if (n + 1) % cfg.stride == 0 || n + 1 == self.steps || blown {
                snapshots.push(snapshot(t_next, &u, &profiles, &history, path.index_at(t_next)?)?);
                if cfg.record_fields {
                    fields.push(u.values.clone());
                }
            }
            if blown {
                diverged = true;
                break;
            }
        }
        Ok(TrajectoryRecord {
            snapshots,
            delay_path: path.clone(),
            diverged,
            fields,
            config_hash: self.hash.clone(),
        })
    }
}

/// Builds a [`Simulator`] and runs one realization.
pub fn run_realization(cfg: &SimConfig, source: &PathSource) -> Result<TrajectoryRecord> {
    Simulator::new(cfg.clone())?.run_source(source)
}

/// Reruns a recorded path.
pub fn replay(cfg: &SimConfig, path: &DelayPath) -> Result<TrajectoryRecord> {
    Simulator::new(cfg.clone())?.run(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(mode: ActuatorMode) -> SimConfig {
        let model = DelayModel::constant(0.5).unwrap();
        let mut cfg = SimConfig::new(11.0, model, 0, 0.02, 0.01, 1.0, InitialData::trigonometric(50, &[0.0]));
        cfg.mode = mode;
        cfg.n_terms = 60;
        cfg.quad_points = default_quad_points(60);
        cfg
    }

    #[test]
    fn validation() {
        let mut cfg = base(ActuatorMode::Pde);
        assert!(cfg.validate().is_ok());
        cfg.dx = 0.03;
        assert!(cfg.validate().is_err());
        let mut cfg = base(ActuatorMode::Pde);
        cfg.initial.vtilde.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = base(ActuatorMode::Pde);
        cfg.stride = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = base(ActuatorMode::Pde);
        cfg.horizon = 1.005;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn first_snapshot_is_initial_data() {
        let cfg = base(ActuatorMode::Pde);
        let rec = run_realization(&cfg, &PathSource::Seed { seed: 1, index: 0 }).unwrap();
        let s0 = rec.snapshots[0];
        let expect = NormSnapshot::new(0.0, &cfg.initial.u, &cfg.initial.vhat, &cfg.initial.vtilde, 0.02, -1.0, 0);
        assert_eq!(s0, expect);
        assert_eq!(rec.snapshots.len(), 101);
        assert!(rec.snapshots.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn stride_thins_snapshots() {
        let mut cfg = base(ActuatorMode::ExactHistory);
        cfg.stride = 7;
        cfg.record_fields = true;
        let rec = run_realization(&cfg, &PathSource::Seed { seed: 1, index: 0 }).unwrap();
        // t = 0, every 7th step, and the final step
        assert_eq!(rec.snapshots.len(), 1 + 14 + 1);
        assert_eq!(rec.fields.len(), rec.snapshots.len());
        assert!((rec.snapshots.last().unwrap().t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn short_replay_path_is_rejected() {
        let cfg = base(ActuatorMode::Pde);
        let path = DelayPath::constant(0, 0.5);
        assert!(replay(&cfg, &path).is_err());
        let path = DelayPath::constant(3, 2.0);
        assert!(replay(&cfg, &path).is_err());
    }

    #[test]
    fn fingerprint_tracks_config() {
        let a = base(ActuatorMode::Pde);
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seed = 9;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }
}
