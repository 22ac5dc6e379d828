//! Post-hoc checks of a saved network: long power iterations, sampled
//! Lipschitz ratios and certificates.

use std::fmt::Write as _;

use crate::blocks::{Block, Layer, Network, VERIFY_POWER_ITERATIONS};
use crate::error::Result;
use crate::numkit::{power_method, Vector};
use crate::rng::{substream, uniform_vector};
use crate::stability::{certified_radius, composed_lipschitz_bound, empirical_lipschitz_ratio, Certificate};

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub pairs: usize,
    /// Sampled inputs are uniform in `[-range, range]^d`.
    pub range: f64,
    /// Random inputs certified when no explicit inputs are given.
    pub n_certificates: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { pairs: 10_000, range: 1.0, n_certificates: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub index: usize,
    pub kind: &'static str,
    pub lipschitz_bound: f64,
    /// Non-expansive blocks only: 500-iteration `‖A‖₂`, `h`, `n_steps`, and
    /// whether `h‖A‖₂² ≤ 2`.
    pub step_check: Option<(f64, f64, usize, bool)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub blocks: Vec<BlockReport>,
    pub composed_bound: f64,
    pub budget: Option<f64>,
    pub empirical_ratio: f64,
    pub certificates: Vec<Certificate>,
}

pub fn run(net: &Network, inputs: Option<&[Vector]>, cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut blocks = Vec::with_capacity(net.len());
    for (index, b) in net.blocks().iter().enumerate() {
        let step_check = match b {
            Block::NonExpansive(ne) => {
                let est = power_method(&ne.weight, &ne.spectral.vector, VERIFY_POWER_ITERATIONS)?;
                Some((est.norm, ne.step_size(), ne.n_steps, ne.satisfies_step_constraint(est.norm)))
            }
            _ => None,
        };
        blocks.push(BlockReport { index, kind: b.kind(), lipschitz_bound: b.lipschitz_bound()?, step_check });
    }
    let composed_bound = composed_lipschitz_bound(net)?;
    let mut rng = substream(cfg.seed, 1);
    let empirical_ratio = empirical_lipschitz_ratio(net, &mut rng, cfg.pairs, cfg.range)?;
    let mut certificates = Vec::new();
    if net.output_dim() >= 2 {
        let lipschitz = net.lipschitz_budget.map_or(composed_bound, |b| b.min(composed_bound));
        let sampled: Vec<Vector>;
        let points = match inputs {
            Some(p) => p,
            None => {
                sampled = (0..cfg.n_certificates)
                    .map(|_| uniform_vector(&mut rng, net.input_dim(), -cfg.range, cfg.range))
                    .collect();
                &sampled
            }
        };
        for x in points {
            certificates.push(certified_radius(net, x, lipschitz)?);
        }
    }
    Ok(VerifyReport { blocks, composed_bound, budget: net.lipschitz_budget, empirical_ratio, certificates })
}

/// `index,kind,lipschitz_bound,spectral_norm,step_size,n_steps,step_constraint`
pub fn blocks_csv(report: &VerifyReport) -> String {
    let mut out = String::from("index,kind,lipschitz_bound,spectral_norm,step_size,n_steps,step_constraint\n");
    for b in &report.blocks {
        let _ = write!(out, "{},{},{:?}", b.index, b.kind, b.lipschitz_bound);
        match b.step_check {
            Some((norm, h, n, ok)) => {
                let _ = writeln!(out, ",{norm:?},{h:?},{n},{ok}");
            }
            None => out.push_str(",,,,\n"),
        }
    }
    out
}

/// `composed_bound,budget,empirical_ratio`
pub fn summary_csv(report: &VerifyReport) -> String {
    let budget = report.budget.map_or_else(String::new, |b| format!("{b:?}"));
    format!(
        "composed_bound,budget,empirical_ratio\n{:?},{budget},{:?}\n",
        report.composed_bound, report.empirical_ratio
    )
}
