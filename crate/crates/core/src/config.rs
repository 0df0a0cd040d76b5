//! Run configuration files.
//!
//! A configuration is a TOML document written with flat dotted keys:
//!
//! ```toml
//! plant.lambda = 11.0
//! delay.states = [0.4, 0.5, 0.6]
//! delay.q_matrix = [-1.0, 0.5, 0.5,  0.5, -1.0, 0.5,  0.5, 0.5, -1.0]
//! delay.d0 = 0.5
//! init.u = "sin(PI*x)"
//! init.vhat = "cos(PI*x)"
//! ```
//!
//! Profiles are expressions in `x` or tables of samples on a uniform grid
//! of `[0, 1]`; `init.history` is an expression in `t` on `[−max D_j, 0]`.
//! Every key outside the schema is an error.

use std::collections::BTreeMap;
use std::path::Path;

use exmex::prelude::*;
use toml::Value;

use crate::actuator::{ActuatorMode, InitialHistory};
use crate::delay::DelayModel;
use crate::error::{Error, Result};
use crate::kernels::{default_quad_points, DEFAULT_TERMS};
use crate::simulator::{InitialData, SimConfig};

const PAPER_STABLE: &str = include_str!("../../../presets/paper_stable.toml");
const PAPER_UNSTABLE: &str = include_str!("../../../presets/paper_unstable.toml");

/// Every key the parser understands.
pub const KEYS: &[&str] = &[
    "plant.lambda",
    "delay.states",
    "delay.q_matrix",
    "delay.d0",
    "delay.initial_index",
    "grid.dx",
    "grid.dt",
    "sim.horizon",
    "sim.seed",
    "init.u",
    "init.vhat",
    "init.vtilde",
    "init.history",
    "actuator.mode",
    "controller.enabled",
    "output.stride",
    "output.fields",
    "kernel.n_terms",
    "kernel.quad_points",
];

/// Embedded preset text for `paper_stable` / `paper_unstable`, accepting
/// `examples/` or `presets/` prefixes and a `.toml` suffix.
pub fn preset(name: &str) -> Option<&'static str> {
    let base = name.trim_end_matches(".toml");
    let base = base.rsplit(['/', '\\']).next().unwrap_or(base);
    let prefixed = name.starts_with("examples/") || name.starts_with("presets/") || !name.contains('/');
    match (base, prefixed) {
        ("paper_stable", true) => Some(PAPER_STABLE),
        ("paper_unstable", true) => Some(PAPER_UNSTABLE),
        _ => None,
    }
}

/// A parsed configuration with where it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub origin: String,
    pub text: String,
    pub sim: SimConfig,
}

/// Reads a preset name or a file path and parses it.
pub fn load_config(name: &str) -> Result<LoadedConfig> {
    let text = match preset(name) {
        Some(t) if !Path::new(name).is_file() => t.to_string(),
        _ => std::fs::read_to_string(name)?,
    };
    let sim = parse_config(&text)?;
    Ok(LoadedConfig { origin: name.to_string(), text, sim })
}

fn config_err(key: &str, msg: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), msg: msg.into() }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

struct Keys(BTreeMap<String, Value>);

impl Keys {
    fn get(&self, key: &str) -> Option<&Value> {
        self.0.get(key)
    }

    fn require(&self, key: &str) -> Result<&Value> {
        self.get(key).ok_or_else(|| config_err(key, "missing"))
    }

    fn number(v: &Value, key: &str) -> Result<f64> {
        match v {
            Value::Float(f) => Ok(*f),
            Value::Integer(i) => Ok(*i as f64),
            other => Err(config_err(key, format!("expected a number, found {}", other.type_str()))),
        }
    }

    fn f64_or(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match (self.get(key), default) {
            (Some(v), _) => {
                let x = Self::number(v, key)?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(config_err(key, "must be finite"))
                }
            }
            (None, Some(d)) => Ok(d),
            (None, None) => Err(config_err(key, "missing")),
        }
    }

    fn uint_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(Value::Integer(_)) => Err(config_err(key, "must be non-negative")),
            Some(other) => Err(config_err(key, format!("expected an integer, found {}", other.type_str()))),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(other) => Err(config_err(key, format!("expected a boolean, found {}", other.type_str()))),
        }
    }

    fn numbers(&self, key: &str) -> Result<Vec<f64>> {
        match self.require(key)? {
            Value::Array(items) => items
                .iter()
                .enumerate()
                .map(|(i, v)| Self::number(v, &format!("{key}[{i}]")))
                .collect(),
            other => Err(config_err(key, format!("expected a list, found {}", other.type_str()))),
        }
    }
}

/// Samples `f(x)` on `m + 1` nodes from an expression or a table.
fn profile(v: &Value, key: &str, m: usize) -> Result<Vec<f64>> {
    let out = match v {
        Value::String(s) => sample_expr(s, key, "x", m, |i| i as f64 / m as f64)?,
        Value::Array(items) => {
            let table: Vec<f64> =
                items.iter().enumerate().map(|(i, v)| Keys::number(v, &format!("{key}[{i}]"))).collect::<Result<_>>()?;
            resample(&table, m).ok_or_else(|| config_err(key, "a table needs at least two samples"))?
        }
        Value::Integer(_) | Value::Float(_) => vec![Keys::number(v, key)?; m + 1],
        other => return Err(config_err(key, format!("expected an expression or a table, found {}", other.type_str()))),
    };
    if out.iter().any(|v| !v.is_finite()) {
        return Err(config_err(key, "profile is not finite on the grid"));
    }
    Ok(out)
}

fn sample_expr(src: &str, key: &str, var: &str, m: usize, at: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
    let expr = exmex::parse::<f64>(src).map_err(|e| config_err(key, format!("cannot parse `{src}`: {e}")))?;
    let names = expr.var_names();
    if names.iter().any(|n| n != var) {
        return Err(config_err(key, format!("expression may only use the variable `{var}`, found {names:?}")));
    }
    (0..=m)
        .map(|i| {
            let args: Vec<f64> = if names.is_empty() { vec![] } else { vec![at(i)] };
            expr.eval(&args).map_err(|e| config_err(key, format!("cannot evaluate `{src}`: {e}")))
        })
        .collect()
}

/// Linear interpolation of a uniform table onto `m + 1` nodes.
fn resample(table: &[f64], m: usize) -> Option<Vec<f64>> {
    let n = table.len().checked_sub(1).filter(|&n| n >= 1)?;
    if n == m {
        return Some(table.to_vec());
    }
    Some(
        (0..=m)
            .map(|i| {
                let s = i as f64 / m as f64 * n as f64;
                let k = (s.floor() as usize).min(n - 1);
                let w = s - k as f64;
                (1.0 - w) * table[k] + w * table[k + 1]
            })
            .collect(),
    )
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| config_err("<document>", e.message()))?;
    let mut flat = BTreeMap::new();
    flatten("", &table, &mut flat);
    if let Some(key) = flat.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(config_err(key, "unknown key"));
    }
    let keys = Keys(flat);

    let lambda = keys.f64_or("plant.lambda", None)?;
    let states = keys.numbers("delay.states")?;
    let q = keys.numbers("delay.q_matrix")?;
    let d0 = keys.f64_or("delay.d0", None)?;
    let model = DelayModel::from_row_major(states, &q, d0)?;
    let initial_index = keys.uint_or("delay.initial_index", 0)? as usize;
    if initial_index >= model.len() {
        return Err(config_err("delay.initial_index", format!("out of range for {} states", model.len())));
    }

    let dx = keys.f64_or("grid.dx", Some(0.01))?;
    let dt = keys.f64_or("grid.dt", Some(0.01))?;
    let horizon = keys.f64_or("sim.horizon", Some(15.0))?;
    if !(dx > 0.0 && dx <= 0.5) {
        return Err(config_err("grid.dx", "must lie in (0, 0.5]"));
    }
    let cells = 1.0 / dx;
    if (cells - cells.round()).abs() > 1e-9 * cells {
        return Err(config_err("grid.dx", format!("1/dx = {cells} is not an integer")));
    }
    let m = cells.round() as usize;

    let u = profile(keys.require("init.u")?, "init.u", m)?;
    let vhat = profile(keys.require("init.vhat")?, "init.vhat", m)?;
    let vtilde = match keys.get("init.vtilde") {
        None => vec![vec![0.0; m + 1]; model.len()],
        Some(Value::Array(items)) => {
            if items.len() != model.len() {
                return Err(config_err(
                    "init.vtilde",
                    format!("expected {} profiles, found {}", model.len(), items.len()),
                ));
            }
            items
                .iter()
                .enumerate()
                .map(|(j, v)| profile(v, &format!("init.vtilde[{j}]"), m))
                .collect::<Result<_>>()?
        }
        Some(other) => {
            return Err(config_err("init.vtilde", format!("expected a list of profiles, found {}", other.type_str())))
        }
    };

    let mut cfg = SimConfig::new(lambda, model, initial_index, dx, dt, horizon, InitialData { u, vhat, vtilde });
    cfg.initial_history = match keys.get("init.history") {
        None => InitialHistory::Zero,
        Some(Value::String(s)) => {
            let span = cfg.model.d_max();
            let values = sample_expr(s, "init.history", "t", m, |i| -span + span * i as f64 / m as f64)?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(config_err("init.history", "history is not finite"));
            }
            InitialHistory::Sampled { span, values }
        }
        Some(other) => {
            return Err(config_err("init.history", format!("expected an expression in t, found {}", other.type_str())))
        }
    };
    cfg.mode = match keys.get("actuator.mode") {
        None => ActuatorMode::Pde,
        Some(Value::String(s)) => match s.as_str() {
            "pde" => ActuatorMode::Pde,
            "exact-history" => ActuatorMode::ExactHistory,
            _ => return Err(config_err("actuator.mode", format!("expected `pde` or `exact-history`, found `{s}`"))),
        },
        Some(other) => return Err(config_err("actuator.mode", format!("expected a string, found {}", other.type_str()))),
    };
    cfg.controller = keys.bool_or("controller.enabled", true)?;
    cfg.seed = keys.uint_or("sim.seed", 0)?;
    cfg.stride = keys.uint_or("output.stride", 1)? as usize;
    if cfg.stride == 0 {
        return Err(config_err("output.stride", "must be at least 1"));
    }
    cfg.record_fields = keys.bool_or("output.fields", false)?;
    cfg.n_terms = keys.uint_or("kernel.n_terms", DEFAULT_TERMS as u64)? as usize;
    cfg.quad_points = keys.uint_or("kernel.quad_points", default_quad_points(cfg.n_terms) as u64)? as usize;
    cfg.kernel_config().validate()?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
plant.lambda = 2.0
delay.states = [0.5]
delay.q_matrix = [0.0]
delay.d0 = 0.5
grid.dx = 0.1
grid.dt = 0.05
sim.horizon = 1.0
init.u = "sin(PI*x)"
init.vhat = [0.0, 1.0]
"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.initial.u.len(), 11);
        assert!((cfg.initial.u[5] - 1.0).abs() < 1e-15);
        assert!((cfg.initial.vhat[3] - 0.3).abs() < 1e-15);
        assert_eq!(cfg.initial.vtilde, vec![vec![0.0; 11]]);
        assert_eq!(cfg.mode, ActuatorMode::Pde);
        assert!(cfg.controller);
        assert_eq!(cfg.n_terms, DEFAULT_TERMS);
        assert_eq!(cfg.initial_history, InitialHistory::Zero);
    }

    #[test]
    fn presets_resolve_under_several_names() {
        for name in ["paper_stable", "examples/paper_stable", "presets/paper_stable.toml"] {
            assert!(preset(name).is_some(), "{name}");
        }
        assert!(preset("elsewhere/paper_stable").is_none());
        assert!(preset("paper_other").is_none());
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            (MINIMAL.replace("plant.lambda = 2.0", ""), "plant.lambda"),
            (MINIMAL.replace("plant.lambda = 2.0", "plant.lambda = \"big\""), "plant.lambda"),
            (MINIMAL.replace("grid.dx = 0.1", "grid.dx = 0.3"), "grid.dx"),
            (MINIMAL.replace("init.u = \"sin(PI*x)\"", "init.u = \"sin(y)\""), "init.u"),
            (format!("{MINIMAL}\nplant.mu = 1.0\n"), "plant.mu"),
            (format!("{MINIMAL}\nactuator.mode = \"fast\"\n"), "actuator.mode"),
            (MINIMAL.replace("delay.q_matrix = [0.0]", "delay.q_matrix = [0.0]\ndelay.initial_index = 3"), "delay.initial_index"),
        ];
        for (text, key) in cases {
            match parse_config(&text) {
                Err(Error::Config { key: k, .. }) => assert_eq!(k, key),
                other => panic!("{key}: {other:?}"),
            }
        }
    }

    #[test]
    fn history_expression_in_t() {
        let text = format!("{MINIMAL}\ninit.history = \"1 + t\"\nactuator.mode = \"exact-history\"\n");
        let cfg = parse_config(&text).unwrap();
        assert!((cfg.initial_history.value(-0.5) - 0.5).abs() < 1e-12);
        assert!((cfg.initial_history.value(0.0) - 1.0).abs() < 1e-12);
    }
}
