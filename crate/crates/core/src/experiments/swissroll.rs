//! Swiss-roll classification with Hamiltonian, residual and plain MLP stacks.

use std::fmt::Write as _;

use crate::blocks::{
    Activation, Block, HamiltonianBlock, LinearLayer, MlpLayer, Network, ResidualBlock,
};
use crate::data::{subset_split, swiss_roll, LabeledDataset};
use crate::error::{invalid, Result};
use crate::numkit::Vector;
use crate::rng::substream;
use crate::train::{accuracy, train, Budget, Optimiser, ProbeConfig, Schedule, TrainConfig, TrainLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Hnn,
    Resnet,
    Mlp,
}

impl Architecture {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "hnn" => Ok(Architecture::Hnn),
            "resnet" => Ok(Architecture::Resnet),
            "mlp" => Ok(Architecture::Mlp),
            other => invalid(format!("unknown architecture {other:?}")),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Hnn => "hnn",
            Architecture::Resnet => "resnet",
            Architecture::Mlp => "mlp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwissRollConfig {
    pub arch: Architecture,
    pub layers: usize,
    pub epochs: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub noise: f64,
    /// Hidden width of residual and MLP layers.
    pub width: usize,
    /// Total integration time; `h = T / layers`.
    pub total_time: f64,
    /// Peak rate of the one-cycle schedule; it starts and ends at `lr / 20`.
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Side of the decision-boundary evaluation grid.
    pub grid: usize,
    pub probe_every: usize,
}

impl Default for SwissRollConfig {
    fn default() -> Self {
        SwissRollConfig {
            arch: Architecture::Hnn,
            layers: 12,
            epochs: 150,
            n_train: 1000,
            n_test: 500,
            noise: 0.05,
            width: 16,
            total_time: 3.0,
            lr: 2e-2,
            batch_size: 32,
            seed: 0,
            grid: 50,
            probe_every: 10,
        }
    }
}

pub const EMBED_DIM: usize = 4;

/// `layers` hidden blocks on ℝ⁴ followed by a linear read-out to two logits.
pub fn build_classifier(cfg: &SwissRollConfig) -> Result<Network> {
    if cfg.layers == 0 {
        return invalid("at least one hidden layer is required");
    }
    let mut rng = substream(cfg.seed, 1);
    let h = cfg.total_time / cfg.layers as f64;
    let act = Activation::Tanh;
    let mut blocks: Vec<Block> = Vec::with_capacity(cfg.layers + 1);
    for _ in 0..cfg.layers {
        blocks.push(match cfg.arch {
            Architecture::Hnn => HamiltonianBlock::new(&mut rng, EMBED_DIM / 2, h, act).into(),
            Architecture::Resnet => ResidualBlock::new(&mut rng, EMBED_DIM, cfg.width, h, act).into(),
            Architecture::Mlp => MlpLayer::new(&mut rng, EMBED_DIM, cfg.width, EMBED_DIM, act).into(),
        });
    }
    blocks.push(LinearLayer::new(&mut rng, EMBED_DIM, 2).into());
    Network::new(blocks)
}

pub fn dataset(cfg: &SwissRollConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    let all = swiss_roll(cfg.n_train + cfg.n_test, cfg.noise, cfg.seed);
    subset_split(&all, cfg.n_train, cfg.n_test, cfg.seed.wrapping_add(1))
}

#[derive(Debug, Clone)]
pub struct SwissRollRun {
    pub net: Network,
    pub log: TrainLog,
    pub test_accuracy: f64,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

/// Trains one classifier; the Jacobian probe follows the first test point
/// through all hidden layers.
pub fn run(cfg: &SwissRollConfig) -> Result<SwissRollRun> {
    let (train_set, test_set) = dataset(cfg)?;
    let mut net = build_classifier(cfg)?;
    let tc = TrainConfig {
        budget: Budget::Epochs(cfg.epochs),
        batch_size: Some(cfg.batch_size),
        optimiser: Optimiser::Adam,
        schedule: Schedule::OneCycle,
        lr_min: cfg.lr / 20.0,
        lr_peak: cfg.lr,
        weight_decay: 0.0,
        margin_offset: 0.0,
        seed: cfg.seed.wrapping_add(2),
        probe: Some(ProbeConfig {
            input: test_set.inputs[0].clone(),
            from: 0,
            to: cfg.layers,
            every: cfg.probe_every.max(1),
        }),
    };
    let test_data = test_set.to_train_data();
    let log = train(&mut net, &train_set.to_train_data(), &tc, Some(&test_data))?;
    let test_accuracy = accuracy(&net, &test_set.inputs, &test_set.labels)?;
    Ok(SwissRollRun { net, log, test_accuracy, train: train_set, test: test_set })
}

/// Predicted class on a `grid × grid` lattice over `[-1.1, 1.1]²`:
/// `x1,x2,class`.
pub fn decision_grid_csv(net: &Network, grid: usize) -> Result<String> {
    let mut out = String::from("x1,x2,class\n");
    let n = grid.max(2);
    for i in 0..n {
        for j in 0..n {
            let x1 = -1.1 + 2.2 * i as f64 / (n - 1) as f64;
            let x2 = -1.1 + 2.2 * j as f64 / (n - 1) as f64;
            let logits = net.forward(&Vector::from([x1, 0.0, x2, 0.0]))?;
            let class = crate::stability::margin(&logits)?.0;
            let _ = writeln!(out, "{x1:?},{x2:?},{class}");
        }
    }
    Ok(out)
}
