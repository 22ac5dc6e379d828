use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Fraction of the run spent warming up in [`one_cycle_lr`].
pub const WARMUP_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// Always `lr_peak`.
    Constant,
    OneCycle,
}

impl Schedule {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Schedule::Constant),
            "one_cycle" => Ok(Schedule::OneCycle),
            other => invalid(format!("unknown schedule {other:?}")),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Schedule::Constant => "constant",
            Schedule::OneCycle => "one_cycle",
        }
    }

    pub fn rate(self, step: usize, total: usize, lr_min: f64, lr_peak: f64) -> f64 {
        match self {
            Schedule::Constant => lr_peak,
            Schedule::OneCycle => one_cycle_lr(step, total, lr_min, lr_peak),
        }
    }
}

/// Cosine warmup from `lr_min` to `lr_peak` over the first 30% of `total`
/// steps, then cosine annealing back to `lr_min` at `step = total`.
pub fn one_cycle_lr(step: usize, total: usize, lr_min: f64, lr_peak: f64) -> f64 {
    if total == 0 {
        return lr_min;
    }
    let s = step.min(total) as f64;
    let apex = WARMUP_FRACTION * total as f64;
    let span = lr_peak - lr_min;
    if s <= apex {
        let frac = if apex > 0.0 { s / apex } else { 1.0 };
        lr_min + span * 0.5 * (1.0 - (PI * frac).cos())
    } else {
        let frac = (s - apex) / (total as f64 - apex);
        lr_min + span * 0.5 * (1.0 + (PI * frac).cos())
    }
}
