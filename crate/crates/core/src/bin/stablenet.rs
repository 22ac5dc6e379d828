use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stablenet::cli;
use stablenet::config::{read_key_values, Configurable};
use stablenet::experiments::inverse::InverseConfig;
use stablenet::experiments::lyapunov::LyapunovConfig;
use stablenet::experiments::oscillator::OscillatorConfig;
use stablenet::experiments::robust::RobustConfig;
use stablenet::experiments::swissroll::SwissRollConfig;
use stablenet::experiments::verify::VerifyConfig;
use stablenet::manifest::{RunManifest, RunStatus};
use stablenet::{Error, Result};

#[derive(Parser)]
#[command(name = "stablenet", version, about = "Stable neural network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Directory receiving the CSVs and run_manifest.txt
    #[arg(long)]
    out_dir: PathBuf,
    /// Flat key=value file applied over the defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single override, applied after --config (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Explicit vs symplectic Euler on the harmonic oscillator from (1, 0).
    #[command(after_help = "\
Outputs:
  euler.csv, symplectic.csv   step,t,x,p,energy
  energy.csv                  step,euler_energy,symplectic_energy")]
    Oscillator {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Swiss-roll classification with a deep HNN, ResNet or MLP.
    #[command(after_help = "\
Outputs:
  decision_grid.csv    x1,x2,class
  train_steps.csv      step,loss,lr
  epoch_accuracy.csv   epoch,accuracy
  jacobian_norms.csv   step,jacobian_norm
  summary.csv          arch,layers,test_accuracy,min_jacobian_norm")]
    Swissroll {
        #[command(flatten)]
        common: Common,
        /// hnn, resnet or mlp
        #[arg(long)]
        arch: Option<String>,
        #[arg(long)]
        layers: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// 2D inverse problem: Tikhonov tuning against InvNets at three budgets.
    #[command(after_help = "\
Outputs:
  tuning.csv             tau,train_mse,test_mse
  lipschitz_curve.csv    tau,lipschitz
  panel_<label>.csv      index,truth1,truth2,y1,y2,x1,x2
  loss_<label>.csv       step,loss,lr,n_steps_1,...
  summary.csv            method,lipschitz,test_mse
  checkpoint_<label>/    saved InvNet, usable with `verify`")]
    Inverse {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Non-expansive network vs ResNet under l2-PGD attacks.
    #[command(after_help = "\
Without IDX paths a synthetic 14x14 ten-class image set is used.

Outputs:
  robust_accuracy.csv   epsilon,nonexpansive_accuracy,resnet_accuracy,n_samples
  consistency.csv       epsilon,certified,violations
  loss_<arch>.csv       step,loss,lr,...
  summary.csv           arch,clean_accuracy,lipschitz_bound")]
    Robust {
        #[command(flatten)]
        common: Common,
        #[arg(long, requires_all = ["train_labels", "test_images", "test_labels"])]
        train_images: Option<PathBuf>,
        #[arg(long)]
        train_labels: Option<PathBuf>,
        #[arg(long)]
        test_images: Option<PathBuf>,
        #[arg(long)]
        test_labels: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Fit a Lyapunov-projected field to a stable linear system.
    #[command(after_help = "\
Outputs:
  loss.csv               iteration,loss
  potential_series.csv   trajectory,step,t,x1,x2,V
  summary.csv            max_increase,min_off_equilibrium,at_equilibrium,final_loss")]
    Lyapunov {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Re-check spectral norms, Lipschitz ratios and certificates of a checkpoint.
    #[command(after_help = "\
Outputs:
  blocks.csv         index,kind,lipschitz_bound,spectral_norm,step_size,n_steps,step_constraint
  summary.csv        composed_bound,budget,empirical_ratio
  certificates.csv   index,class,margin,lipschitz_bound,radius")]
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// CSV of input vectors to certify (one per line)
        #[arg(long)]
        inputs: Option<PathBuf>,
        #[arg(long)]
        pairs: Option<usize>,
    },
}

fn configure<C: Configurable>(cfg: &mut C, common: &Common) -> Result<()> {
    if let Some(path) = &common.config {
        cfg.apply(&read_key_values(path)?)?;
    }
    for o in &common.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("--set expects KEY=VALUE, got {o:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(())
}

fn set<C: Configurable, T: ToString>(cfg: &mut C, key: &str, value: &Option<T>) -> Result<()> {
    match value {
        Some(v) => cfg.set(key, &v.to_string()),
        None => Ok(()),
    }
}

/// Defaults, then `--config`, `--set`, the subcommand flags and `--seed`.
/// A failure here still leaves a manifest behind.
fn prepare<C: Configurable + Default>(
    subcommand: &str,
    common: &Common,
    flags: impl FnOnce(&mut C) -> Result<()>,
) -> Result<C> {
    let mut cfg = C::default();
    let result = configure(&mut cfg, common).and_then(|()| flags(&mut cfg)).and_then(|()| {
        if cfg.entries().iter().any(|(k, _)| *k == "seed") {
            set(&mut cfg, "seed", &common.seed)?;
        }
        Ok(())
    });
    if let Err(e) = result {
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            config: Vec::new(),
            seed: common.seed.unwrap_or(0),
            wall_time_s: 0.0,
            outputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            status: RunStatus::Failed(e.to_string()),
        };
        manifest.write(&common.out_dir)?;
        return Err(e);
    }
    Ok(cfg)
}

fn dispatch(command: Command) -> Result<RunManifest> {
    match command {
        Command::Oscillator { common, h, steps } => {
            let cfg: OscillatorConfig = prepare("oscillator", &common, |c| {
                set(c, "h", &h)?;
                set(c, "steps", &steps)
            })?;
            cli::cmd_oscillator(&cfg, &common.out_dir)
        }
        Command::Swissroll { common, arch, layers, epochs } => {
            let cfg: SwissRollConfig = prepare("swissroll", &common, |c| {
                set(c, "arch", &arch)?;
                set(c, "layers", &layers)?;
                set(c, "epochs", &epochs)
            })?;
            cli::cmd_swissroll(&cfg, &common.out_dir)
        }
        Command::Inverse { common, iterations } => {
            let cfg: InverseConfig =
                prepare("inverse", &common, |c| set(c, "iterations", &iterations))?;
            cli::cmd_inverse(&cfg, &common.out_dir)
        }
        Command::Robust { common, train_images, train_labels, test_images, test_labels, epochs } => {
            let display = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
            let cfg: RobustConfig = prepare("robust", &common, |c| {
                set(c, "train_images", &display(&train_images))?;
                set(c, "train_labels", &display(&train_labels))?;
                set(c, "test_images", &display(&test_images))?;
                set(c, "test_labels", &display(&test_labels))?;
                set(c, "epochs", &epochs)
            })?;
            cli::cmd_robust(&cfg, &common.out_dir)
        }
        Command::Lyapunov { common, iterations } => {
            let cfg: LyapunovConfig =
                prepare("lyapunov", &common, |c| set(c, "iterations", &iterations))?;
            cli::cmd_lyapunov(&cfg, &common.out_dir)
        }
        Command::Verify { common, checkpoint, inputs, pairs } => {
            let cfg: VerifyConfig = prepare("verify", &common, |c| set(c, "pairs", &pairs))?;
            cli::cmd_verify(&checkpoint, inputs.as_deref(), &cfg, &common.out_dir)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(m) => {
            println!("{}: wrote {} outputs in {:.1}s", m.subcommand, m.outputs.len(), m.wall_time_s);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
