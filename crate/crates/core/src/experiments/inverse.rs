//! The 2D inverse problem: Tikhonov tuning against InvNet reconstructions
//! at three Lipschitz budgets.

use std::fmt::Write as _;

use crate::blocks::{Layer, Network};
use crate::error::Result;
use crate::invprob::{
    build_invnet, generate_dataset, grid_search_tau, invert_tau_for_lipschitz, log_grid,
    mean_squared_error, tikhonov_lipschitz, ForwardModel, InverseSample, TauSearch,
    TikhonovReconstructor,
};
use crate::numkit::Vector;
use crate::rng::substream;
use crate::train::{train_with, Budget, Optimiser, Schedule, TrainConfig, TrainData, TrainLog};

#[derive(Debug, Clone, PartialEq)]
pub struct InverseConfig {
    pub epsilon: f64,
    pub noise_sigma: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub iterations: usize,
    pub lr: f64,
    pub n_blocks: usize,
    pub lift_dim: usize,
    pub grid_points: usize,
    pub tau_min: f64,
    pub tau_max: f64,
    pub seed: u64,
}

impl Default for InverseConfig {
    fn default() -> Self {
        InverseConfig {
            epsilon: 0.25,
            noise_sigma: 0.1,
            n_train: 200,
            n_test: 200,
            iterations: 10_000,
            lr: 1e-3,
            n_blocks: 5,
            lift_dim: 10,
            grid_points: 50,
            tau_min: 1e-4,
            tau_max: 1e2,
            seed: 0,
        }
    }
}

/// One reconstruction panel: a method at a Lipschitz level.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub label: String,
    pub lipschitz: f64,
    pub test_mse: f64,
    pub reconstructions: Vec<Vector>,
}

#[derive(Debug, Clone)]
pub struct InvNetRun {
    pub panel: Panel,
    pub net: Network,
    pub log: TrainLog,
}

#[derive(Debug, Clone)]
pub struct InverseRun {
    pub model: ForwardModel,
    pub train: Vec<InverseSample>,
    pub test: Vec<InverseSample>,
    pub search: TauSearch,
    /// Test error of Tikhonov at every grid point.
    pub test_curve: Vec<(f64, f64)>,
    pub tikhonov: Vec<Panel>,
    pub invnets: Vec<InvNetRun>,
}

impl InverseRun {
    /// Lowest test error Tikhonov attains anywhere on the grid.
    pub fn best_tikhonov_test_mse(&self) -> f64 {
        self.test_curve.iter().map(|c| c.1).fold(f64::INFINITY, f64::min)
    }
}

pub fn datasets(cfg: &InverseConfig) -> Result<(ForwardModel, Vec<InverseSample>, Vec<InverseSample>)> {
    let model = ForwardModel::new(cfg.epsilon, cfg.noise_sigma)?;
    let train = generate_dataset(&model, cfg.n_train, cfg.seed);
    let test = generate_dataset(&model, cfg.n_test, cfg.seed.wrapping_add(0x5eed));
    Ok((model, train, test))
}

fn tikhonov_panel(model: &ForwardModel, test: &[InverseSample], label: &str, tau: f64) -> Result<Panel> {
    let rec = TikhonovReconstructor::new(model, tau)?;
    let reconstructions: Vec<Vector> = test.iter().map(|s| rec.reconstruct(&s.observed)).collect();
    Ok(Panel {
        label: label.to_string(),
        lipschitz: tikhonov_lipschitz(model, tau),
        test_mse: mean_squared_error(test, |y| Ok(rec.reconstruct(y)))?,
        reconstructions,
    })
}

/// Trains one InvNet with budget `lipschitz`; `after_step` sees every step.
pub fn train_invnet(
    cfg: &InverseConfig,
    train: &[InverseSample],
    test: &[InverseSample],
    lipschitz: f64,
    label: &str,
    after_step: impl FnMut(usize, &Network) -> Result<()>,
) -> Result<InvNetRun> {
    let mut rng = substream(cfg.seed, lipschitz.to_bits());
    let mut net = build_invnet(&mut rng, lipschitz, cfg.n_blocks, cfg.lift_dim)?;
    let data = TrainData::regression(
        train.iter().map(|s| s.observed.clone()).collect(),
        train.iter().map(|s| s.truth.clone()).collect(),
    )?;
    let tc = TrainConfig {
        budget: Budget::Iterations(cfg.iterations),
        batch_size: None,
        optimiser: Optimiser::Adam,
        schedule: Schedule::Constant,
        lr_min: cfg.lr,
        lr_peak: cfg.lr,
        weight_decay: 0.0,
        margin_offset: 0.0,
        seed: cfg.seed,
        probe: None,
    };
    let log = train_with(&mut net, &data, &tc, None, after_step)?;
    let reconstructions = test.iter().map(|s| net.forward(&s.observed)).collect::<Result<Vec<_>>>()?;
    let test_mse = mean_squared_error(test, |y| net.forward(y))?;
    Ok(InvNetRun {
        panel: Panel { label: label.to_string(), lipschitz, test_mse, reconstructions },
        net,
        log,
    })
}

/// Full pipeline: grid search, three Tikhonov panels (τ*, and the τ whose
/// Lipschitz constants are L*/3 and 3L* when attainable) and InvNets with
/// budgets L*/3, L*, 3L*.
pub fn run(cfg: &InverseConfig) -> Result<InverseRun> {
    let (model, train, test) = datasets(cfg)?;
    let grid = log_grid(cfg.tau_min, cfg.tau_max, cfg.grid_points);
    let search = grid_search_tau(&model, &train, &grid)?;
    let mut test_curve = Vec::with_capacity(grid.len());
    for &tau in &grid {
        let rec = TikhonovReconstructor::new(&model, tau)?;
        test_curve.push((tau, mean_squared_error(&test, |y| Ok(rec.reconstruct(y)))?));
    }
    let l_star = search.lipschitz;
    let levels = [("L*/3", l_star / 3.0), ("L*", l_star), ("3L*", 3.0 * l_star)];
    let mut tikhonov = Vec::with_capacity(3);
    for (name, l) in levels {
        let tau = if name == "L*" {
            search.tau
        } else {
            invert_tau_for_lipschitz(&model, l).unwrap_or(0.0)
        };
        tikhonov.push(tikhonov_panel(&model, &test, &format!("tikhonov_{name}"), tau)?);
    }
    let mut invnets = Vec::with_capacity(3);
    for (name, l) in levels {
        invnets.push(train_invnet(cfg, &train, &test, l, &format!("invnet_{name}"), |_, _| Ok(()))?);
    }
    Ok(InverseRun { model, train, test, search, test_curve, tikhonov, invnets })
}

/// `tau,train_mse,test_mse`
pub fn tuning_csv(run: &InverseRun) -> String {
    let mut out = String::from("tau,train_mse,test_mse\n");
    for ((tau, tr), (_, te)) in run.search.curve.iter().zip(&run.test_curve) {
        let _ = writeln!(out, "{tau:?},{tr:?},{te:?}");
    }
    out
}

/// `tau,lipschitz`
pub fn lipschitz_curve_csv(model: &ForwardModel, grid: &[f64]) -> String {
    let mut out = String::from("tau,lipschitz\n");
    for &tau in grid {
        let _ = writeln!(out, "{tau:?},{:?}", tikhonov_lipschitz(model, tau));
    }
    out
}

/// `index,truth1,truth2,y1,y2,x1,x2`
pub fn panel_csv(test: &[InverseSample], panel: &Panel) -> String {
    let mut out = String::from("index,truth1,truth2,y1,y2,x1,x2\n");
    for (i, (s, r)) in test.iter().zip(&panel.reconstructions).enumerate() {
        let _ = writeln!(
            out,
            "{i},{:?},{:?},{:?},{:?},{:?},{:?}",
            s.truth[0], s.truth[1], s.observed[0], s.observed[1], r[0], r[1]
        );
    }
    out
}

/// `method,lipschitz,test_mse`
pub fn summary_csv(run: &InverseRun) -> String {
    let mut out = String::from("method,lipschitz,test_mse\n");
    for p in run.tikhonov.iter().chain(run.invnets.iter().map(|r| &r.panel)) {
        let _ = writeln!(out, "{},{:?},{:?}", p.label, p.lipschitz, p.test_mse);
    }
    out
}

/// Scale parameter of the trained InvNet, after clamping.
pub fn invnet_scale(net: &Network) -> Option<f64> {
    net.blocks().iter().rev().find_map(|b| match b {
        crate::blocks::Block::Scale(s) => Some(s.effective()),
        _ => None,
    })
    .filter(|_| net.blocks().last().is_some_and(|b| b.output_dim() == 2))
}
