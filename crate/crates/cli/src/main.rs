//! `rdctl`: kernels, single realizations and ensembles from a config file.
//!
//! Exit status is 0 on success, 1 on a numerical or validation failure and
//! 2 on a usage error.

mod checks;
mod output;

/// `println!` that tolerates a closed stdout.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rdctl_core::config::{load_config, LoadedConfig};
use rdctl_core::delay::DelayPath;
use rdctl_core::kernels::{build_tables, eval_eta};
use rdctl_core::montecarlo::{default_window, run_ensemble_with};
use rdctl_core::simulator::{PathSource, Simulator};

use output::{create, resolve_out_dir, RunManifest};

#[derive(Parser)]
#[command(name = "rdctl", version, about = "Delay-compensated boundary control of a reaction-diffusion plant")]
struct Cli {
    /// Output directory (overrides $RDCTL_OUT_DIR; default ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the invariant suite against a configuration.
    Validate {
        #[arg(default_value = "examples/paper_stable")]
        config: String,
    },
    /// Dump x, p(1,x), gamma(1,x), kappa(x), eta(1,x) on the simulation grid.
    Kernels { config: String },
    /// Run one realization.
    Simulate {
        config: String,
        /// Master seed; defaults to `sim.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Stream of the master seed to draw the delay path from.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Run an ensemble and fit the decay of the mean Lyapunov functional.
    Montecarlo {
        config: String,
        #[arg(short = 'n', long = "realizations", default_value_t = 50)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Fit window as `start,end` (default: `T/3,T`).
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
    /// Rerun a recorded delay path.
    Replay {
        config: String,
        path: PathBuf,
        /// Switch the controller off.
        #[arg(long)]
        open_loop: bool,
    },
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected start,end")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a < b {
        Ok((a, b))
    } else {
        Err("window start must precede its end".into())
    }
}

type Failure = Box<dyn std::error::Error>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let out = resolve_out_dir(cli.out);
    match dispatch(cli.command, &out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("rdctl: {e}");
            ExitCode::from(1)
        }
    }
}

fn load(config: &str) -> Result<LoadedConfig, Failure> {
    load_config(config).map_err(|e| format!("{config}: {e}").into())
}

fn manifest(cmd: &str, cfg: &LoadedConfig, out: &Path) -> RunManifest {
    RunManifest::new(cmd, &cfg.origin, &cfg.text, &cfg.sim.fingerprint(), out)
}

fn dispatch(command: Command, out: &Path) -> Result<ExitCode, Failure> {
    match command {
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let started = Instant::now();
            let results = checks::run_all(&cfg.sim);
            for c in &results {
                say!("{} {:<28} {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            let failed = results.iter().filter(|c| !c.passed).count();
            say!("{} checks, {failed} failed, {:.2}s", results.len(), started.elapsed().as_secs_f64());
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Kernels { config } => {
            let cfg = load(&config)?;
            let mut man = manifest("kernels", &cfg, out);
            let started = Instant::now();
            let kcfg = cfg.sim.kernel_config();
            let tables = build_tables(&kcfg, cfg.sim.cells()?)?;
            man.timings.push(("build_tables".into(), started.elapsed()));
            let mut w = create(out, "kernels.csv", &man.hash())?;
            writeln!(w, "x,p_1x,gamma_1x,kappa_x,eta_1x")?;
            for (i, x) in tables.grid.iter().enumerate() {
                let eta = eval_eta(1.0, *x, &tables.inverse_coeffs, &kcfg);
                writeln!(w, "{x},{:e},{:e},{:e},{:e}", tables.p_1[i], tables.gamma_1[i], tables.kappa[i], eta)?;
            }
            w.flush()?;
            man.files.push("kernels.csv".into());
            finish(man)
        }
        Command::Simulate { config, seed, index } => {
            let cfg = load(&config)?;
            let seed = seed.unwrap_or(cfg.sim.seed);
            let mut man = manifest("simulate", &cfg, out);
            man.arg("seed", seed);
            man.arg("index", index);
            let started = Instant::now();
            let sim = Simulator::new(cfg.sim.clone())?;
            man.timings.push(("build_tables".into(), started.elapsed()));
            let started = Instant::now();
            let rec = sim.run_source(&PathSource::Seed { seed, index })?;
            man.timings.push(("simulate".into(), started.elapsed()));
            write_record(&mut man, &rec)?;
            report_record(&rec);
            finish(man)
        }
        Command::Montecarlo { config, n, seed, jobs, window } => {
            if n == 0 {
                return Err("-n must be at least 1".into());
            }
            let cfg = load(&config)?;
            let seed = seed.unwrap_or(cfg.sim.seed);
            let window = window.unwrap_or_else(|| default_window(cfg.sim.horizon));
            let mut man = manifest("montecarlo", &cfg, out);
            man.arg("n", n);
            man.arg("seed", seed);
            man.arg("window", format!("{},{}", window.0, window.1));
            let started = Instant::now();
            let sim = Simulator::new(cfg.sim.clone())?;
            man.timings.push(("build_tables".into(), started.elapsed()));
            let started = Instant::now();
            let res = run_ensemble_with(&sim, n, seed, jobs, window)?;
            man.timings.push(("ensemble".into(), started.elapsed()));
            let hash = man.hash();
            let mut w = create(out, "ensemble.csv", &hash)?;
            output::write_ensemble(&mut w, &res)?;
            w.flush()?;
            let mut w = create(out, "realizations.csv", &hash)?;
            output::write_realizations(&mut w, &res)?;
            w.flush()?;
            man.files.extend(["ensemble.csv".into(), "realizations.csv".into()]);
            let ratio = res.mean_v.last().copied().unwrap_or(f64::NAN) / res.mean_v[0];
            say!(
                "n = {n}, mean V(T)/V(0) = {ratio:.3e}, beta = {}, diverged = {}",
                res.fitted_beta.map_or("n/a".into(), |b| format!("{b:.4}")),
                res.diverged_count
            );
            finish(man)
        }
        Command::Replay { config, path, open_loop } => {
            let cfg = load(&config)?;
            let file = std::fs::File::open(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            let delay = DelayPath::read_from(std::io::BufReader::new(file))?;
            let mut sim_cfg = cfg.sim.clone();
            sim_cfg.controller &= !open_loop;
            let mut man = RunManifest::new("replay", &cfg.origin, &cfg.text, &sim_cfg.fingerprint(), out);
            man.arg("path", path.display());
            man.arg("open_loop", open_loop);
            let started = Instant::now();
            let sim = Simulator::new(sim_cfg)?;
            let rec = sim.run(&delay)?;
            man.timings.push(("replay".into(), started.elapsed()));
            write_record(&mut man, &rec)?;
            report_record(&rec);
            finish(man)
        }
    }
}

fn write_record(man: &mut RunManifest, rec: &rdctl_core::simulator::TrajectoryRecord) -> Result<(), Failure> {
    let hash = man.hash();
    let out = man.out_dir.clone();
    let mut w = create(&out, "trajectory.csv", &hash)?;
    output::write_trajectory(&mut w, rec)?;
    w.flush()?;
    let mut w = create(&out, "delay_path.csv", &hash)?;
    rec.delay_path.write_to(&mut w)?;
    w.flush()?;
    man.files.extend(["trajectory.csv".into(), "delay_path.csv".into()]);
    if !rec.fields.is_empty() {
        let mut w = create(&out, "fields.csv", &hash)?;
        output::write_fields(&mut w, rec)?;
        w.flush()?;
        man.files.push("fields.csv".into());
    }
    Ok(())
}

fn report_record(rec: &rdctl_core::simulator::TrajectoryRecord) {
    say!(
        "V(0) = {:.6e}, V(T) = {:.6e}, jumps = {}{}",
        rec.initial_v(),
        rec.final_v(),
        rec.delay_path.jumps(),
        if rec.diverged { ", diverged" } else { "" }
    );
}

fn finish(man: RunManifest) -> Result<ExitCode, Failure> {
    let path = man.write()?;
    say!("wrote {} (manifest {})", path.display(), &man.hash()[..16]);
    Ok(ExitCode::SUCCESS)
}
