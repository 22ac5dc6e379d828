//! ℓ²-projected gradient attacks and robust-accuracy grids.

use std::fmt::Write as _;

use crate::blocks::Network;
use crate::error::{invalid, Error, Result};
use crate::numkit::Vector;
use crate::stability::{certified_radius, margin};
use crate::train::margin_cross_entropy;

/// Multiplier `κ` of the default step size `κ ε / n_iter`.
pub const DEFAULT_STEP_FACTOR: f64 = 2.5;

const PROJECTION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub epsilon: f64,
    pub n_iter: usize,
    pub step_size: f64,
    /// Offset of the margin cross-entropy being ascended.
    pub margin_offset: f64,
}

impl AttackConfig {
    /// Step size `2.5 ε / n_iter`, loss offset 0.
    pub fn new(epsilon: f64, n_iter: usize) -> Self {
        AttackConfig {
            epsilon,
            n_iter,
            step_size: DEFAULT_STEP_FACTOR * epsilon / n_iter.max(1) as f64,
            margin_offset: 0.0,
        }
    }

    /// Same iteration count and loss at another radius, with the default
    /// step size for that radius.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        AttackConfig { margin_offset: self.margin_offset, ..Self::new(epsilon, self.n_iter) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return invalid("attack radius must be finite and nonnegative");
        }
        if self.n_iter == 0 {
            return invalid("attack needs at least one iteration");
        }
        if !(self.step_size >= 0.0) || (self.epsilon > 0.0 && self.step_size == 0.0) {
            return invalid("attack step size must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdOutcome {
    pub point: Vector,
    /// Iterations whose input gradient was exactly zero (no move made).
    pub zero_gradient_steps: usize,
}

/// ℓ²-PGD from the clean point: `n_iter` normalised ascent steps on the loss,
/// each followed by projection of the perturbation onto the `ε`-ball.
pub fn pgd_l2(net: &Network, x: &Vector, label: usize, cfg: &AttackConfig) -> Result<PgdOutcome> {
    cfg.validate()?;
    let mut delta = Vector::zeros(x.len());
    let mut zero_gradient_steps = 0;
    if cfg.epsilon == 0.0 {
        return Ok(PgdOutcome { point: x.clone(), zero_gradient_steps });
    }
    for _ in 0..cfg.n_iter {
        let cache = net.forward_cached(&x.add(&delta))?;
        let (_, g_out) = margin_cross_entropy(cache.output(), label, cfg.margin_offset)?;
        let g = net.input_gradient(&cache, &g_out)?;
        match g.normalized() {
            Some(dir) => delta.axpy(cfg.step_size, &dir),
            None => zero_gradient_steps += 1,
        }
        let norm = delta.norm();
        if norm > cfg.epsilon {
            delta.scale_in_place(cfg.epsilon / norm);
        }
        if delta.norm() > cfg.epsilon + PROJECTION_SLACK {
            return Err(Error::InvalidState("perturbation left the attack ball".into()));
        }
    }
    Ok(PgdOutcome { point: x.add(&delta), zero_gradient_steps })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustRow {
    pub epsilon: f64,
    pub accuracy: f64,
    pub n_samples: usize,
}

/// Fraction of samples still classified correctly after the attack, per
/// radius in `epsilons`.
pub fn robust_accuracy(
    net: &Network,
    inputs: &[Vector],
    labels: &[usize],
    epsilons: &[f64],
    template: &AttackConfig,
) -> Result<Vec<RobustRow>> {
    if inputs.is_empty() || inputs.len() != labels.len() {
        return invalid("robust accuracy needs a nonempty set with one label per input");
    }
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let cfg = template.with_epsilon(eps);
        let mut correct = 0;
        for (x, &y) in inputs.iter().zip(labels) {
            let adv = pgd_l2(net, x, y, &cfg)?.point;
            if margin(&net.forward(&adv)?)?.0 == y {
                correct += 1;
            }
        }
        rows.push(RobustRow {
            epsilon: eps,
            accuracy: correct as f64 / inputs.len() as f64,
            n_samples: inputs.len(),
        });
    }
    Ok(rows)
}

pub fn robust_table_csv(rows: &[RobustRow]) -> String {
    let mut out = String::from("epsilon,accuracy,n_samples\n");
    for r in rows {
        let _ = writeln!(out, "{:?},{:?},{}", r.epsilon, r.accuracy, r.n_samples);
    }
    out
}

/// Result of checking attacks against certificates at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConsistencyRow {
    pub certified: usize,
    /// Certified inputs whose prediction the attack changed.
    pub violations: usize,
}

/// For each radius, attacks every input whose certified radius exceeds it
/// and counts prediction changes.
pub fn certificate_consistency(
    net: &Network,
    inputs: &[Vector],
    lipschitz: f64,
    epsilons: &[f64],
    template: &AttackConfig,
) -> Result<Vec<ConsistencyRow>> {
    let certs = inputs
        .iter()
        .map(|x| certified_radius(net, x, lipschitz))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let cfg = template.with_epsilon(eps);
        let mut row = ConsistencyRow { certified: 0, violations: 0 };
        for c in certs.iter().filter(|c| c.radius > eps) {
            row.certified += 1;
            let adv = pgd_l2(net, &c.input, c.predicted_class, &cfg)?.point;
            if margin(&net.forward(&adv)?)?.0 != c.predicted_class {
                row.violations += 1;
            }
        }
        rows.push(row);
    }
    Ok(rows)
}
