use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rdctl_core::montecarlo::EnsembleResult;
use rdctl_core::simulator::TrajectoryRecord;
use sha2::{Digest, Sha256};

pub const OUT_ENV: &str = "RDCTL_OUT_DIR";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `--out`, then `$RDCTL_OUT_DIR`, then `./out`.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Everything needed to rerun a command, plus how long it took.
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub config_text: String,
    pub config_fingerprint: String,
    pub args: Vec<(String, String)>,
    pub out_dir: PathBuf,
    pub timings: Vec<(String, Duration)>,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config_path: &str, config_text: &str, config_fingerprint: &str, out_dir: &Path) -> Self {
        Self {
            command: command.into(),
            config_path: config_path.into(),
            config_text: config_text.into(),
            config_fingerprint: config_fingerprint.into(),
            args: Vec::new(),
            out_dir: out_dir.to_path_buf(),
            timings: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn arg(&mut self, key: &str, value: impl ToString) {
        self.args.push((key.into(), value.to_string()));
    }

    /// Hash of the inputs only, so reruns carry the same tag.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("rdctl {VERSION}\n{}\n", self.command));
        for (k, v) in &self.args {
            h.update(format!("{k}={v}\n"));
        }
        h.update(self.config_fingerprint.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn write(&self) -> std::io::Result<PathBuf> {
        let path = self.out_dir.join("manifest.toml");
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "hash = \"{}\"", self.hash())?;
        writeln!(w, "tool = \"rdctl {VERSION}\"")?;
        writeln!(w, "command = \"{}\"", self.command)?;
        writeln!(w, "config_path = {:?}", self.config_path)?;
        writeln!(w, "config_fingerprint = \"{}\"", self.config_fingerprint)?;
        writeln!(w, "output_dir = {:?}", self.out_dir.display().to_string())?;
        writeln!(w, "files = {:?}", self.files)?;
        writeln!(w, "\n[args]")?;
        for (k, v) in &self.args {
            writeln!(w, "{k} = {v:?}")?;
        }
        writeln!(w, "\n[timings_s]")?;
        for (k, d) in &self.timings {
            writeln!(w, "{k} = {:.6}", d.as_secs_f64())?;
        }
        writeln!(w, "\n[config]\ntext = '''\n{}'''", self.config_text.trim_end().to_string() + "\n")?;
        w.flush()?;
        Ok(path)
    }
}

pub fn create(dir: &Path, name: &str, hash: &str) -> std::io::Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    writeln!(w, "# manifest {hash}")?;
    Ok(w)
}

pub fn write_trajectory(w: &mut impl Write, rec: &TrajectoryRecord) -> std::io::Result<()> {
    writeln!(w, "t,u_l2,vhat_h1,vtilde_h1,V,U,delay_index")?;
    for s in &rec.snapshots {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e},{}",
            s.t,
            s.u_l2sq.sqrt(),
            s.vhat_h1sq.sqrt(),
            s.vtilde_h1sq.sqrt(),
            s.v_total,
            s.u_ctrl,
            s.delay_index
        )?;
    }
    if rec.diverged {
        writeln!(w, "# diverged")?;
    }
    Ok(())
}

pub fn write_fields(w: &mut impl Write, rec: &TrajectoryRecord) -> std::io::Result<()> {
    let m = rec.fields.first().map_or(0, |f| f.len());
    let header: Vec<String> = (0..m).map(|i| format!("u_{i}")).collect();
    writeln!(w, "t,{}", header.join(","))?;
    for (s, f) in rec.snapshots.iter().zip(&rec.fields) {
        let row: Vec<String> = f.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{},{}", s.t, row.join(","))?;
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), |x| format!("{x:e}"))
}

pub fn write_ensemble(w: &mut impl Write, res: &EnsembleResult) -> std::io::Result<()> {
    writeln!(w, "t,mean_V,ci_halfwidth")?;
    for ((t, m), c) in res.times.iter().zip(&res.mean_v).zip(&res.ci_halfwidth) {
        writeln!(w, "{t},{m:e},{c:e}")?;
    }
    writeln!(w, "# summary")?;
    writeln!(w, "# n = {}", res.n_realizations)?;
    writeln!(w, "# beta = {}", opt(res.fitted_beta))?;
    writeln!(w, "# alpha = {}", opt(res.fitted_alpha))?;
    writeln!(w, "# window = {},{}", res.window.0, res.window.1)?;
    writeln!(w, "# diverged_count = {}", res.diverged_count)?;
    Ok(())
}

pub fn write_realizations(w: &mut impl Write, res: &EnsembleResult) -> std::io::Result<()> {
    writeln!(w, "index,V0,V_final,diverged,jumps")?;
    for r in &res.realizations {
        writeln!(w, "{},{:e},{:e},{},{}", r.index, r.v0, r.v_final, r.diverged as u8, r.jumps)?;
    }
    Ok(())
}
