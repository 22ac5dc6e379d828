use std::fmt::Write as _;

use crate::blocks::{Gradients, Network};
use crate::error::{invalid, Error, Result};
use crate::numkit::Vector;
use crate::rng::{seeded, shuffle};
use crate::stability::margin;

use super::{margin_cross_entropy, mse_loss, sgd_step, Adam, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimiser {
    Sgd,
    Adam,
}

impl Optimiser {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimiser::Sgd),
            "adam" => Ok(Optimiser::Adam),
            other => invalid(format!("unknown optimiser {other:?}")),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Optimiser::Sgd => "sgd",
            Optimiser::Adam => "adam",
        }
    }
}

/// Length of a run, in passes over the data or in optimiser steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Epochs(usize),
    Iterations(usize),
}

/// Periodic Jacobian-norm probe at a fixed input.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub input: Vector,
    pub from: usize,
    pub to: usize,
    /// Probe before training and after every `every`-th step.
    pub every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub budget: Budget,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub optimiser: Optimiser,
    pub schedule: Schedule,
    pub lr_min: f64,
    pub lr_peak: f64,
    pub weight_decay: f64,
    /// Offset of the margin cross-entropy; ignored for regression.
    pub margin_offset: f64,
    pub seed: u64,
    pub probe: Option<ProbeConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            budget: Budget::Epochs(1),
            batch_size: Some(128),
            optimiser: Optimiser::Adam,
            schedule: Schedule::Constant,
            lr_min: 1e-3,
            lr_peak: 1e-3,
            weight_decay: 0.0,
            margin_offset: 0.0,
            seed: 0,
            probe: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_min > 0.0 && self.lr_peak > 0.0) {
            return invalid("learning rates must be positive");
        }
        if self.lr_min > self.lr_peak {
            return invalid("lr_min must not exceed lr_peak");
        }
        if !(self.weight_decay >= 0.0) {
            return invalid("weight decay must be nonnegative");
        }
        if !(self.margin_offset >= 0.0) {
            return invalid("margin offset must be nonnegative");
        }
        if self.batch_size == Some(0) {
            return invalid("batch size must be positive");
        }
        if matches!(self.probe, Some(ProbeConfig { every: 0, .. })) {
            return invalid("probe interval must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Regression(Vec<Vector>),
    Classes(Vec<usize>),
}

/// Inputs paired with regression targets or class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainData {
    pub inputs: Vec<Vector>,
    pub targets: Targets,
}

impl TrainData {
    pub fn regression(inputs: Vec<Vector>, targets: Vec<Vector>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return invalid("inputs and targets differ in length");
        }
        Ok(TrainData { inputs, targets: Targets::Regression(targets) })
    }

    pub fn classification(inputs: Vec<Vector>, labels: Vec<usize>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return invalid("inputs and labels differ in length");
        }
        Ok(TrainData { inputs, targets: Targets::Classes(labels) })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn loss(&self, i: usize, output: &Vector, margin_offset: f64) -> Result<(f64, Vector)> {
        match &self.targets {
            Targets::Regression(t) => mse_loss(output, &t[i]),
            Targets::Classes(l) => margin_cross_entropy(output, l[i], margin_offset),
        }
    }
}

/// Everything recorded during a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    /// Mean minibatch loss of every optimiser step.
    pub losses: Vec<f64>,
    pub learning_rates: Vec<f64>,
    /// Accuracy on the evaluation set after each epoch (classification only).
    pub epoch_accuracy: Vec<f64>,
    /// `(step, ‖J‖₂)`; step 0 is the untrained network.
    pub jacobian_norms: Vec<(usize, f64)>,
    /// Sub-step counts of every non-expansive block after each step.
    pub step_counts: Vec<Vec<usize>>,
}

impl TrainLog {
    /// `step,loss,lr,n_steps_1,...`
    pub fn steps_csv(&self) -> String {
        let width = self.step_counts.first().map_or(0, Vec::len);
        let mut out = String::from("step,loss,lr");
        for i in 1..=width {
            let _ = write!(out, ",n_steps_{i}");
        }
        out.push('\n');
        for (s, (loss, lr)) in self.losses.iter().zip(&self.learning_rates).enumerate() {
            let _ = write!(out, "{},{loss:?},{lr:?}", s + 1);
            for n in self.step_counts.get(s).into_iter().flatten() {
                let _ = write!(out, ",{n}");
            }
            out.push('\n');
        }
        out
    }

    /// `epoch,accuracy`
    pub fn epochs_csv(&self) -> String {
        let mut out = String::from("epoch,accuracy\n");
        for (e, a) in self.epoch_accuracy.iter().enumerate() {
            let _ = writeln!(out, "{},{a:?}", e + 1);
        }
        out
    }

    /// `step,jacobian_norm`
    pub fn probes_csv(&self) -> String {
        let mut out = String::from("step,jacobian_norm\n");
        for (s, v) in &self.jacobian_norms {
            let _ = writeln!(out, "{s},{v:?}");
        }
        out
    }
}

/// Fraction of `inputs` whose argmax output equals the label.
pub fn accuracy(net: &Network, inputs: &[Vector], labels: &[usize]) -> Result<f64> {
    if inputs.is_empty() || inputs.len() != labels.len() {
        return invalid("accuracy needs a nonempty set with one label per input");
    }
    let mut correct = 0usize;
    for (x, &y) in inputs.iter().zip(labels) {
        if margin(&net.forward(x)?)?.0 == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / inputs.len() as f64)
}

/// Mean per-sample loss of `net` over `data`.
pub fn mean_loss(net: &Network, data: &TrainData, margin_offset: f64) -> Result<f64> {
    let mut total = 0.0;
    for (i, x) in data.inputs.iter().enumerate() {
        total += data.loss(i, &net.forward(x)?, margin_offset)?.0;
    }
    Ok(total / data.len() as f64)
}

/// Trains without a step callback; see [`train_with`].
pub fn train(
    net: &mut Network,
    data: &TrainData,
    cfg: &TrainConfig,
    eval: Option<&TrainData>,
) -> Result<TrainLog> {
    train_with(net, data, cfg, eval, |_, _| Ok(()))
}

/// Minibatch training. Each step runs forward, loss, backward, the
/// optimiser update, parameter constraints, one warm-started power
/// iteration per non-expansive weight and the step-count update, then calls
/// `after_step(step, net)` with the 1-based step index.
pub fn train_with(
    net: &mut Network,
    data: &TrainData,
    cfg: &TrainConfig,
    eval: Option<&TrainData>,
    mut after_step: impl FnMut(usize, &Network) -> Result<()>,
) -> Result<TrainLog> {
    cfg.validate()?;
    if data.is_empty() {
        return invalid("training data is empty");
    }
    let n = data.len();
    let batch = cfg.batch_size.unwrap_or(n).min(n);
    let per_epoch = n.div_ceil(batch);
    let total = match cfg.budget {
        Budget::Epochs(e) => e * per_epoch,
        Budget::Iterations(i) => i,
    };
    let eval = eval.unwrap_or(data);
    let mut rng = seeded(cfg.seed);
    let mut adam = Adam::new();
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..n).collect();

    if let Some(p) = &cfg.probe {
        log.jacobian_norms.push((0, crate::blocks::jacobian_norm_probe(net, &p.input, p.from, p.to)?));
    }

    let mut step = 0;
    while step < total {
        if batch < n {
            shuffle(&mut rng, &mut order);
        }
        for chunk in order.chunks(batch) {
            if step == total {
                break;
            }
            let mut grads: Gradients = net.zero_gradients();
            let scale = 1.0 / chunk.len() as f64;
            let mut loss = 0.0;
            for &i in chunk {
                let cache = net.forward_cached(&data.inputs[i])?;
                let (value, g) = data.loss(i, cache.output(), cfg.margin_offset)?;
                loss += value;
                net.backward_into(&cache, &g.scaled(scale), &mut grads)?;
            }
            loss *= scale;
            if !loss.is_finite() {
                return Err(Error::Diverged { step, loss });
            }
            let lr = cfg.schedule.rate(step, total, cfg.lr_min, cfg.lr_peak);
            {
                let mut params = net.parameters_mut();
                match cfg.optimiser {
                    Optimiser::Sgd => {
                        if cfg.weight_decay > 0.0 {
                            for (g, p) in grads.tensors.iter_mut().zip(params.iter()) {
                                for (gi, pi) in g.iter_mut().zip(p.iter()) {
                                    *gi += cfg.weight_decay * pi;
                                }
                            }
                        }
                        sgd_step(&mut params, &grads.tensors, lr)?;
                    }
                    Optimiser::Adam => adam.update(&mut params, &grads.tensors, lr, cfg.weight_decay)?,
                }
            }
            net.apply_constraints();
            net.refresh_spectral(1)?;
            step += 1;
            log.losses.push(loss);
            log.learning_rates.push(lr);
            log.step_counts.push(net.step_counts());
            if let Some(p) = &cfg.probe {
                if step % p.every == 0 {
                    let norm = crate::blocks::jacobian_norm_probe(net, &p.input, p.from, p.to)?;
                    log.jacobian_norms.push((step, norm));
                }
            }
            after_step(step, net)?;
        }
        if let Targets::Classes(labels) = &eval.targets {
            log.epoch_accuracy.push(accuracy(net, &eval.inputs, labels)?);
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{LinearLayer, NonExpansiveBlock, VERIFY_POWER_ITERATIONS};
    use crate::numkit::power_method;
    use crate::rng::{normal_vector, seeded, Rng};
    use crate::blocks::Block;

    fn linear_problem(rng: &mut Rng) -> (Network, TrainData) {
        let net = Network::new(vec![LinearLayer::new(rng, 3, 2).into()]).unwrap();
        let inputs: Vec<Vector> = (0..10).map(|_| normal_vector(rng, 3)).collect();
        let targets = inputs.iter().map(|x| Vector::from([x[0] - x[2], 0.5 * x[1]])).collect();
        (net, TrainData::regression(inputs, targets).unwrap())
    }

    #[test]
    fn sgd_on_linear_model_is_monotone() {
        let mut rng = seeded(0);
        let (mut net, data) = linear_problem(&mut rng);
        let cfg = TrainConfig {
            budget: Budget::Iterations(100),
            batch_size: None,
            optimiser: Optimiser::Sgd,
            lr_min: 0.01,
            lr_peak: 0.01,
            ..TrainConfig::default()
        };
        let log = train(&mut net, &data, &cfg, None).unwrap();
        assert_eq!(log.losses.len(), 100);
        for w in log.losses.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let run = || {
            let mut rng = seeded(3);
            let mut net = Network::new(vec![
                NonExpansiveBlock::new(&mut rng, 3, 4, 1.0).unwrap().into(),
                LinearLayer::new(&mut rng, 3, 2).into(),
            ])
            .unwrap();
            let inputs: Vec<Vector> = (0..20).map(|_| normal_vector(&mut rng, 3)).collect();
            let labels = (0..20).map(|i| i % 2).collect();
            let data = TrainData::classification(inputs, labels).unwrap();
            let cfg = TrainConfig {
                budget: Budget::Epochs(3),
                batch_size: Some(6),
                schedule: Schedule::OneCycle,
                lr_min: 1e-3,
                lr_peak: 1e-2,
                margin_offset: 0.5,
                seed: 11,
                ..TrainConfig::default()
            };
            train(&mut net, &data, &cfg, None).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        assert_eq!(a.steps_csv(), b.steps_csv());
        assert_eq!(a.epoch_accuracy.len(), 3);
    }

    #[test]
    fn step_constraint_holds_after_every_step() {
        let mut rng = seeded(5);
        let mut net = Network::new(vec![
            NonExpansiveBlock::new(&mut rng, 3, 6, 1.0).unwrap().into(),
            NonExpansiveBlock::new(&mut rng, 3, 6, 1.0).unwrap().into(),
        ])
        .unwrap();
        let inputs: Vec<Vector> = (0..16).map(|_| normal_vector(&mut rng, 3)).collect();
        let targets = inputs.iter().map(|x| x.scaled(-2.0)).collect();
        let data = TrainData::regression(inputs, targets).unwrap();
        let cfg = TrainConfig {
            budget: Budget::Iterations(200),
            batch_size: None,
            lr_min: 0.05,
            lr_peak: 0.05,
            ..TrainConfig::default()
        };
        let mut checked = 0;
        train_with(&mut net, &data, &cfg, None, |step, net| {
            if step % 20 == 0 {
                for b in net.blocks() {
                    if let Block::NonExpansive(ne) = b {
                        let fresh = power_method(&ne.weight, &ne.spectral.vector, VERIFY_POWER_ITERATIONS)?;
                        assert!(ne.satisfies_step_constraint(fresh.norm), "step {step}");
                    }
                }
                checked += 1;
            }
            Ok(())
        })
        .unwrap();
        assert_eq!(checked, 10);
    }

    #[test]
    fn nan_loss_reports_the_step() {
        let mut rng = seeded(1);
        let (mut net, mut data) = linear_problem(&mut rng);
        data.inputs[0][0] = f64::NAN;
        let cfg = TrainConfig { budget: Budget::Iterations(5), batch_size: None, ..TrainConfig::default() };
        assert!(matches!(train(&mut net, &data, &cfg, None), Err(Error::Diverged { step: 0, .. })));
    }

    #[test]
    fn rejects_inverted_learning_rates() {
        let cfg = TrainConfig { lr_min: 1.0, lr_peak: 0.1, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
