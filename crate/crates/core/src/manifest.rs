//! Run manifests and the output directory bookkeeping behind them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};

pub const RUN_MANIFEST_FILE: &str = "run_manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Success,
    Failed(String),
}

/// Record of one CLI invocation, written next to its outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Vec<(String, String)>,
    pub seed: u64,
    pub wall_time_s: f64,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
    pub version: String,
    pub status: RunStatus,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "subcommand={}", self.subcommand);
        let _ = writeln!(out, "version={}", self.version);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "wall_time_s={:.3}", self.wall_time_s);
        match &self.status {
            RunStatus::Success => out.push_str("status=success\n"),
            RunStatus::Failed(msg) => {
                let _ = writeln!(out, "status=failed\nerror={}", msg.replace('\n', " "));
            }
        }
        for (k, v) in &self.config {
            let _ = writeln!(out, "config.{k}={v}");
        }
        for o in &self.outputs {
            let _ = writeln!(out, "output={o}");
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(RUN_MANIFEST_FILE), self.to_text())?;
        Ok(())
    }
}

/// Tracks files written into an output directory so a failed run can
/// remove them again.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    /// Writes a CSV after checking every numeric-looking field is finite.
    pub fn write_csv(&mut self, name: &str, contents: &str) -> Result<()> {
        check_finite_csv(name, contents)?;
        let path = self.root.join(name);
        self.record(name, || fs::write(path, contents).map_err(Error::from))
    }

    /// Records a subdirectory produced by `f`.
    pub fn write_dir(&mut self, name: &str, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        let dir = self.root.join(name);
        self.record(name, || f(&dir))
    }

    fn record(&mut self, name: &str, f: impl FnOnce() -> Result<()>) -> Result<()> {
        self.written.push(name.to_string());
        f()
    }

    /// Deletes everything recorded so far.
    pub fn discard(&mut self) {
        for name in self.written.drain(..) {
            let path = self.root.join(&name);
            if path.is_dir() {
                let _ = fs::remove_dir_all(&path);
            } else {
                let _ = fs::remove_file(&path);
            }
        }
    }
}

fn check_finite_csv(name: &str, contents: &str) -> Result<()> {
    for (i, line) in contents.lines().enumerate().skip(1) {
        for field in line.split(',') {
            if let Ok(v) = field.trim().parse::<f64>() {
                if !v.is_finite() {
                    return Err(Error::InvalidState(format!(
                        "{name} line {}: non-finite value {field:?}",
                        i + 1
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Runs `body` against a fresh [`OutputDir`]. On success the manifest lists
/// the outputs; on failure the outputs are removed and the manifest records
/// the error, which is then returned.
pub fn execute(
    subcommand: &str,
    config: Vec<(&'static str, String)>,
    seed: u64,
    out_dir: &Path,
    body: impl FnOnce(&mut OutputDir) -> Result<()>,
) -> Result<RunManifest> {
    let start = Instant::now();
    let mut out = OutputDir::create(out_dir)?;
    let result = body(&mut out);
    let status = match &result {
        Ok(()) => RunStatus::Success,
        Err(e) => {
            out.discard();
            RunStatus::Failed(e.to_string())
        }
    };
    let manifest = RunManifest {
        subcommand: subcommand.to_string(),
        config: config.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        seed,
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs: out.written().to_vec(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        status,
    };
    manifest.write(out_dir)?;
    result.map(|()| manifest)
}
