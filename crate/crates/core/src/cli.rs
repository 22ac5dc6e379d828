//! The experiment subcommands behind the `stablenet` binary. Each writes
//! its CSVs plus a run manifest into `out_dir`.

use std::fmt::Write as _;
use std::path::Path;

use crate::blocks::{load_checkpoint, save_checkpoint};
use crate::config::Configurable;
use crate::error::{invalid, Error, Result};
use crate::experiments::inverse::{self, InverseConfig};
use crate::experiments::lyapunov::{self, LyapunovConfig};
use crate::experiments::oscillator::{self, OscillatorConfig};
use crate::experiments::robust::{self, RobustConfig};
use crate::experiments::swissroll::{self, SwissRollConfig};
use crate::experiments::verify::{self, VerifyConfig};
use crate::invprob::log_grid;
use crate::manifest::{execute, RunManifest};
use crate::numkit::Vector;
use crate::stability::certificates_to_csv;

/// File-name form of a panel label such as `invnet_L*/3`.
pub fn file_stem(label: &str) -> String {
    label.replace("*/", "star_over").replace('*', "star")
}

/// `h`, `steps` → `euler.csv`, `symplectic.csv`, `energy.csv`.
pub fn cmd_oscillator(cfg: &OscillatorConfig, out_dir: &Path) -> Result<RunManifest> {
    execute("oscillator", cfg.entries(), 0, out_dir, |out| {
        let run = oscillator::run(cfg)?;
        out.write_csv("euler.csv", &oscillator::trajectory_csv(&run.euler))?;
        out.write_csv("symplectic.csv", &oscillator::trajectory_csv(&run.symplectic))?;
        out.write_csv("energy.csv", &oscillator::energy_csv(&run))
    })
}

/// One architecture → `decision_grid.csv`, `train_steps.csv`,
/// `epoch_accuracy.csv`, `jacobian_norms.csv`, `summary.csv`.
pub fn cmd_swissroll(cfg: &SwissRollConfig, out_dir: &Path) -> Result<RunManifest> {
    execute("swissroll", cfg.entries(), cfg.seed, out_dir, |out| {
        let run = swissroll::run(cfg)?;
        out.write_csv("decision_grid.csv", &swissroll::decision_grid_csv(&run.net, cfg.grid)?)?;
        out.write_csv("train_steps.csv", &run.log.steps_csv())?;
        out.write_csv("epoch_accuracy.csv", &run.log.epochs_csv())?;
        out.write_csv("jacobian_norms.csv", &run.log.probes_csv())?;
        let min_jac = run.log.jacobian_norms.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        out.write_csv(
            "summary.csv",
            &format!(
                "arch,layers,test_accuracy,min_jacobian_norm\n{},{},{:?},{min_jac:?}\n",
                cfg.arch.name(),
                cfg.layers,
                run.test_accuracy
            ),
        )
    })
}

/// Tikhonov tuning and the six reconstruction panels → `tuning.csv`,
/// `lipschitz_curve.csv`, `panel_<label>.csv`, `loss_<label>.csv`,
/// `summary.csv` and a checkpoint directory per InvNet.
pub fn cmd_inverse(cfg: &InverseConfig, out_dir: &Path) -> Result<RunManifest> {
    execute("inverse", cfg.entries(), cfg.seed, out_dir, |out| {
        let run = inverse::run(cfg)?;
        out.write_csv("tuning.csv", &inverse::tuning_csv(&run))?;
        let grid = log_grid(cfg.tau_min, cfg.tau_max, cfg.grid_points);
        out.write_csv("lipschitz_curve.csv", &inverse::lipschitz_curve_csv(&run.model, &grid))?;
        for p in &run.tikhonov {
            out.write_csv(&format!("panel_{}.csv", file_stem(&p.label)), &inverse::panel_csv(&run.test, p))?;
        }
        for r in &run.invnets {
            let stem = file_stem(&r.panel.label);
            out.write_csv(&format!("panel_{stem}.csv"), &inverse::panel_csv(&run.test, &r.panel))?;
            out.write_csv(&format!("loss_{stem}.csv"), &r.log.steps_csv())?;
            out.write_dir(&format!("checkpoint_{stem}"), |dir| save_checkpoint(&r.net, dir))?;
        }
        out.write_csv("summary.csv", &inverse::summary_csv(&run))
    })
}

/// Both classifiers and the PGD grid → `robust_accuracy.csv`,
/// `consistency.csv`, `loss_<arch>.csv`, `summary.csv`.
pub fn cmd_robust(cfg: &RobustConfig, out_dir: &Path) -> Result<RunManifest> {
    execute("robust", cfg.entries(), cfg.seed, out_dir, |out| {
        let run = robust::run(cfg)?;
        out.write_csv("robust_accuracy.csv", &robust::comparison_csv(&run.runs))?;
        out.write_csv("consistency.csv", &robust::consistency_csv(&cfg.epsilons, &run.consistency))?;
        let mut summary = String::from("arch,clean_accuracy,lipschitz_bound\n");
        for r in &run.runs {
            out.write_csv(&format!("loss_{}.csv", r.arch.name()), &r.log.steps_csv())?;
            let _ = writeln!(summary, "{},{:?},{:?}", r.arch.name(), r.clean_accuracy, r.lipschitz_bound);
        }
        out.write_csv("summary.csv", &summary)
    })
}

/// Fit and decrease check → `loss.csv`, `potential_series.csv`,
/// `summary.csv`.
pub fn cmd_lyapunov(cfg: &LyapunovConfig, out_dir: &Path) -> Result<RunManifest> {
    execute("lyapunov", cfg.entries(), cfg.seed, out_dir, |out| {
        let run = lyapunov::run(cfg)?;
        out.write_csv("loss.csv", &lyapunov::loss_csv(&run.losses))?;
        out.write_csv("potential_series.csv", &lyapunov::potential_series_csv(&run.system, &run.report))?;
        let r = &run.report;
        out.write_csv(
            "summary.csv",
            &format!(
                "max_increase,min_off_equilibrium,at_equilibrium,final_loss\n{:?},{:?},{:?},{:?}\n",
                r.max_increase,
                r.min_off_equilibrium,
                r.at_equilibrium,
                run.losses.last().copied().unwrap_or(f64::NAN)
            ),
        )
    })
}

/// Reads inputs for certification: one comma-separated vector per line, an
/// optional non-numeric header line first.
pub fn read_inputs_csv(path: &Path) -> Result<Vec<Vector>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse()).collect();
        match parsed {
            Ok(v) => rows.push(Vector::from(v)),
            Err(_) if i == 0 => {}
            Err(_) => return Err(Error::Parse(format!("{}: line {} is not numeric", path.display(), i + 1))),
        }
    }
    if rows.is_empty() {
        return invalid(format!("{} contains no input rows", path.display()));
    }
    Ok(rows)
}

/// Post-hoc checks of a checkpoint → `blocks.csv`, `summary.csv`,
/// `certificates.csv`.
pub fn cmd_verify(
    checkpoint: &Path,
    inputs: Option<&Path>,
    cfg: &VerifyConfig,
    out_dir: &Path,
) -> Result<RunManifest> {
    let mut echo = cfg.entries();
    echo.push(("checkpoint", checkpoint.display().to_string()));
    if let Some(p) = inputs {
        echo.push(("inputs", p.display().to_string()));
    }
    execute("verify", echo, cfg.seed, out_dir, |out| {
        let net = load_checkpoint(checkpoint)?;
        let points = inputs.map(read_inputs_csv).transpose()?;
        let report = verify::run(&net, points.as_deref(), cfg)?;
        out.write_csv("blocks.csv", &verify::blocks_csv(&report))?;
        out.write_csv("summary.csv", &verify::summary_csv(&report))?;
        out.write_csv("certificates.csv", &certificates_to_csv(&report.certificates))
    })
}
