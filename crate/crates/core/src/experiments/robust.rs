//! Clean training of a non-expansive classifier and a ResNet on images,
//! followed by ℓ²-PGD robust-accuracy grids and certificate checks.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::attacks::{
    certificate_consistency, robust_accuracy, AttackConfig, ConsistencyRow, RobustRow,
};
use crate::blocks::{Activation, Block, LinearLayer, Network, NonExpansiveBlock, ResidualBlock};
use crate::data::{load_image_dataset, subset_split, synthetic_images, LabeledDataset};
use crate::error::{invalid, Result};
use crate::rng::substream;
use crate::stability::composed_lipschitz_bound;
use crate::train::{accuracy, train, Budget, Optimiser, Schedule, TrainConfig, TrainLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobustArch {
    NonExpansive,
    Resnet,
}

impl RobustArch {
    pub fn name(self) -> &'static str {
        match self {
            RobustArch::NonExpansive => "nonexpansive",
            RobustArch::Resnet => "resnet",
        }
    }
}

/// Where the images come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageSource {
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        /// Average-pooling factor applied to each image.
        pool: usize,
    },
    /// The smooth-prototype generator in [`synthetic_images`].
    Synthetic { side: usize, n_classes: usize, noise: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustConfig {
    pub source: ImageSource,
    pub n_train: usize,
    pub n_test: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_min: f64,
    pub lr_peak: f64,
    pub weight_decay: f64,
    pub margin_offset: f64,
    pub n_blocks: usize,
    pub hidden: usize,
    /// Integration time of each non-expansive block.
    pub total_time: f64,
    /// Step of each residual block.
    pub resnet_h: f64,
    pub attack_iters: usize,
    /// Attack radii, excluding the clean row at 0.
    pub epsilons: Vec<f64>,
    pub seed: u64,
}

impl Default for RobustConfig {
    fn default() -> Self {
        RobustConfig {
            source: ImageSource::Synthetic { side: 14, n_classes: 10, noise: 0.3 },
            n_train: 6000,
            n_test: 500,
            epochs: 15,
            batch_size: 128,
            lr_min: 1e-4,
            lr_peak: 1e-2,
            weight_decay: 1e-3,
            margin_offset: 0.5,
            n_blocks: 3,
            hidden: 64,
            total_time: 1.0,
            resnet_h: 1.0,
            attack_iters: 100,
            epsilons: (1..=8).map(|k| k as f64 / 10.0).collect(),
            seed: 0,
        }
    }
}

impl RobustConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 || self.epochs == 0 || self.batch_size == 0 {
            return invalid("n_train, n_test, epochs and batch_size must be at least 1");
        }
        if self.n_blocks == 0 || self.hidden == 0 || self.attack_iters == 0 {
            return invalid("n_blocks, hidden and attack_iters must be at least 1");
        }
        if !(self.total_time > 0.0) || !(self.resnet_h > 0.0) {
            return invalid("block step sizes must be positive");
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0)) {
            return invalid("attack radii must be positive");
        }
        if let ImageSource::Idx { pool, .. } = &self.source {
            if *pool == 0 {
                return invalid("pooling factor must be at least 1");
            }
        }
        Ok(())
    }

    /// Clean radius first, then the configured radii.
    pub fn epsilon_grid(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.epsilons.iter().copied()).collect()
    }
}

pub fn datasets(cfg: &RobustConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    match &cfg.source {
        ImageSource::Idx { train_images, train_labels, test_images, test_labels, pool } => {
            let train = load_image_dataset(train_images, train_labels, *pool)?;
            let test = load_image_dataset(test_images, test_labels, *pool)?;
            let (train, _) = subset_split(&train, cfg.n_train, 0, cfg.seed)?;
            let (test, _) = subset_split(&test, cfg.n_test, 0, cfg.seed.wrapping_add(1))?;
            Ok((train, test))
        }
        ImageSource::Synthetic { side, n_classes, noise } => {
            let all = synthetic_images(cfg.n_train + cfg.n_test, *side, *n_classes, *noise, cfg.seed);
            subset_split(&all, cfg.n_train, cfg.n_test, cfg.seed.wrapping_add(1))
        }
    }
}

pub fn build_classifier(cfg: &RobustConfig, arch: RobustArch, dim: usize, n_classes: usize) -> Result<Network> {
    let label = match arch {
        RobustArch::NonExpansive => 1,
        RobustArch::Resnet => 2,
    };
    let mut rng = substream(cfg.seed, label);
    let mut blocks: Vec<Block> = Vec::with_capacity(cfg.n_blocks + 1);
    for _ in 0..cfg.n_blocks {
        blocks.push(match arch {
            RobustArch::NonExpansive => {
                NonExpansiveBlock::new(&mut rng, dim, cfg.hidden, cfg.total_time)?.into()
            }
            RobustArch::Resnet => {
                ResidualBlock::new(&mut rng, dim, cfg.hidden, cfg.resnet_h, Activation::Relu).into()
            }
        });
    }
    blocks.push(LinearLayer::new(&mut rng, dim, n_classes).into());
    Network::new(blocks)
}

#[derive(Debug, Clone)]
pub struct ClassifierRun {
    pub arch: RobustArch,
    pub net: Network,
    pub log: TrainLog,
    pub clean_accuracy: f64,
    pub lipschitz_bound: f64,
    pub table: Vec<RobustRow>,
}

pub fn train_classifier(
    cfg: &RobustConfig,
    arch: RobustArch,
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
) -> Result<ClassifierRun> {
    let mut net = build_classifier(cfg, arch, train_set.dimension(), train_set.n_classes)?;
    let tc = TrainConfig {
        budget: Budget::Epochs(cfg.epochs),
        batch_size: Some(cfg.batch_size),
        optimiser: Optimiser::Adam,
        schedule: Schedule::OneCycle,
        lr_min: cfg.lr_min,
        lr_peak: cfg.lr_peak,
        weight_decay: cfg.weight_decay,
        margin_offset: cfg.margin_offset,
        seed: cfg.seed,
        probe: None,
    };
    let log = train(&mut net, &train_set.to_train_data(), &tc, None)?;
    let clean_accuracy = accuracy(&net, &test_set.inputs, &test_set.labels)?;
    Ok(ClassifierRun {
        arch,
        lipschitz_bound: composed_lipschitz_bound(&net)?,
        net,
        log,
        clean_accuracy,
        table: Vec::new(),
    })
}

/// Attack template shared by every radius: offset 0, as in training
/// without the margin.
pub fn attack_template(cfg: &RobustConfig) -> AttackConfig {
    AttackConfig::new(1.0, cfg.attack_iters)
}

pub fn attack(cfg: &RobustConfig, run: &mut ClassifierRun, test_set: &LabeledDataset) -> Result<()> {
    run.table = robust_accuracy(
        &run.net,
        &test_set.inputs,
        &test_set.labels,
        &cfg.epsilon_grid(),
        &attack_template(cfg),
    )?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RobustRun {
    pub runs: Vec<ClassifierRun>,
    /// Certificate checks for the non-expansive network at every radius.
    pub consistency: Vec<ConsistencyRow>,
}

pub fn run(cfg: &RobustConfig) -> Result<RobustRun> {
    cfg.validate()?;
    let (train_set, test_set) = datasets(cfg)?;
    let mut runs = Vec::with_capacity(2);
    for arch in [RobustArch::NonExpansive, RobustArch::Resnet] {
        let mut r = train_classifier(cfg, arch, &train_set, &test_set)?;
        attack(cfg, &mut r, &test_set)?;
        runs.push(r);
    }
    let ne = &runs[0];
    let consistency = certificate_consistency(
        &ne.net,
        &test_set.inputs,
        ne.lipschitz_bound,
        &cfg.epsilons,
        &attack_template(cfg),
    )?;
    Ok(RobustRun { runs, consistency })
}

/// `epsilon,<arch>_accuracy...,n_samples`
pub fn comparison_csv(runs: &[ClassifierRun]) -> String {
    let mut out = String::from("epsilon");
    for r in runs {
        let _ = write!(out, ",{}_accuracy", r.arch.name());
    }
    out.push_str(",n_samples\n");
    let rows = runs.first().map_or(0, |r| r.table.len());
    for i in 0..rows {
        let _ = write!(out, "{:?}", runs[0].table[i].epsilon);
        for r in runs {
            let _ = write!(out, ",{:?}", r.table[i].accuracy);
        }
        let _ = writeln!(out, ",{}", runs[0].table[i].n_samples);
    }
    out
}

/// `epsilon,certified,violations`
pub fn consistency_csv(epsilons: &[f64], rows: &[ConsistencyRow]) -> String {
    let mut out = String::from("epsilon,certified,violations\n");
    for (e, r) in epsilons.iter().zip(rows) {
        let _ = writeln!(out, "{e:?},{},{}", r.certified, r.violations);
    }
    out
}
