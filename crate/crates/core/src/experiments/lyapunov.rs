//! Fitting a Lyapunov-projected vector field to trajectories of a known
//! stable linear system, then checking decrease of the learned potential.

use std::fmt::Write as _;

use crate::blocks::{Activation, LinearLayer, MlpLayer, Network};
use crate::error::{invalid, Result};
use crate::numkit::{Matrix, Vector};
use crate::ode::{exact_linear_flow, integrate, Method, Trajectory};
use crate::rng::{fan_in_matrix, substream, uniform_vector};
use crate::stability::{ConvexPotential, LyapunovSystem};
use crate::train::{mse_loss, Adam};

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovConfig {
    /// Row-major 2x2 matrix of the target system `ẋ = A x`.
    pub target: [f64; 4],
    pub mu: f64,
    pub epsilon: f64,
    pub hidden: usize,
    /// Number of `wᵢ` in the potential.
    pub potential_terms: usize,
    pub n_trajectories: usize,
    pub samples_per_trajectory: usize,
    pub horizon: f64,
    /// Starts are drawn uniformly from `[-box, box]²`.
    pub start_box: f64,
    pub iterations: usize,
    pub lr: f64,
    pub n_check: usize,
    pub check_steps: usize,
    pub check_h: f64,
    pub seed: u64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            target: [-0.5, 1.0, -1.0, -0.5],
            mu: 0.5,
            epsilon: 1e-3,
            hidden: 32,
            potential_terms: 8,
            n_trajectories: 20,
            samples_per_trajectory: 10,
            horizon: 4.0,
            start_box: 2.0,
            iterations: 1500,
            lr: 1e-2,
            n_check: 100,
            check_steps: 1000,
            check_h: 1e-3,
            seed: 0,
        }
    }
}

impl LyapunovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !(self.epsilon > 0.0) || !(self.lr > 0.0) || !(self.check_h > 0.0) {
            return invalid("mu, epsilon, lr and check_h must be positive");
        }
        if self.hidden == 0 || self.potential_terms == 0 || self.n_trajectories == 0 {
            return invalid("hidden, potential_terms and n_trajectories must be at least 1");
        }
        if self.samples_per_trajectory == 0 || !(self.horizon > 0.0) || !(self.start_box > 0.0) {
            return invalid("trajectory sampling needs positive counts, horizon and box");
        }
        Ok(())
    }

    pub fn target_matrix(&self) -> Matrix {
        Matrix::from_vec(2, 2, self.target.to_vec()).expect("2x2")
    }
}

/// Worst behaviour of `V` along the check trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct DecreaseReport {
    /// Largest `V(x_{n+1}) - V(x_n)` seen.
    pub max_increase: f64,
    /// Smallest `V` at a sampled point away from the equilibrium.
    pub min_off_equilibrium: f64,
    pub at_equilibrium: f64,
    pub trajectories: Vec<Trajectory>,
}

#[derive(Debug, Clone)]
pub struct LyapunovRun {
    pub system: LyapunovSystem,
    pub losses: Vec<f64>,
    pub report: DecreaseReport,
}

pub fn build_system(cfg: &LyapunovConfig) -> Result<LyapunovSystem> {
    let mut rng = substream(cfg.seed, 1);
    let base = Network::new(vec![
        MlpLayer::new(&mut rng, 2, cfg.hidden, 2, Activation::Tanh).into(),
        LinearLayer::new(&mut rng, 2, 2).into(),
    ])?;
    let w = fan_in_matrix(&mut rng, cfg.potential_terms, 2, 2);
    LyapunovSystem::new(base, Vector::zeros(2), cfg.mu, ConvexPotential::new(w, cfg.epsilon)?)
}

/// Points sampled along exact trajectories of the target, with velocities.
pub fn training_pairs(cfg: &LyapunovConfig) -> Result<Vec<(Vector, Vector)>> {
    let a = cfg.target_matrix();
    let mut rng = substream(cfg.seed, 2);
    let mut pairs = Vec::with_capacity(cfg.n_trajectories * cfg.samples_per_trajectory);
    for _ in 0..cfg.n_trajectories {
        let x0 = uniform_vector(&mut rng, 2, -cfg.start_box, cfg.start_box);
        for k in 0..cfg.samples_per_trajectory {
            let t = cfg.horizon * k as f64 / cfg.samples_per_trajectory as f64;
            let x = exact_linear_flow(&a, &x0, t)?;
            let v = a.matvec(x.as_slice());
            pairs.push((x, v));
        }
    }
    Ok(pairs)
}

/// Full-batch Adam on the mean squared velocity error; returns the losses.
pub fn fit(sys: &mut LyapunovSystem, pairs: &[(Vector, Vector)], cfg: &LyapunovConfig) -> Result<Vec<f64>> {
    let mut adam = Adam::new();
    let mut losses = Vec::with_capacity(cfg.iterations);
    let n = pairs.len() as f64;
    for step in 0..cfg.iterations {
        let mut total = 0.0;
        let mut grads: Option<Vec<Vec<f64>>> = None;
        for (x, v) in pairs {
            let (loss, g) = mse_loss(&sys.project(x)?, v)?;
            total += loss;
            let t = sys.backward(x, &g.scaled(1.0 / n))?.tensors();
            match &mut grads {
                None => grads = Some(t),
                Some(acc) => {
                    for (a, b) in acc.iter_mut().zip(&t) {
                        for (x, y) in a.iter_mut().zip(b) {
                            *x += y;
                        }
                    }
                }
            }
        }
        let loss = total / n;
        if !loss.is_finite() {
            return Err(crate::Error::Diverged { step, loss });
        }
        losses.push(loss);
        let grads = grads.unwrap_or_default();
        adam.update(&mut sys.parameters_mut(), &grads, cfg.lr, 0.0)?;
    }
    Ok(losses)
}

/// Euler-integrates the projected field from `n_check` random starts and
/// records the worst per-step change of `V`.
pub fn check_decrease(sys: &LyapunovSystem, cfg: &LyapunovConfig) -> Result<DecreaseReport> {
    let field = sys.to_vector_field();
    let mut rng = substream(cfg.seed, 3);
    let mut max_increase = f64::NEG_INFINITY;
    let mut min_off = f64::INFINITY;
    let mut trajectories = Vec::with_capacity(cfg.n_check);
    for _ in 0..cfg.n_check {
        let x0 = uniform_vector(&mut rng, 2, -cfg.start_box, cfg.start_box);
        let traj = integrate(&field, &x0, 0.0, cfg.check_h, cfg.check_steps, Method::Euler)?;
        let values: Vec<f64> = traj.states.iter().map(|x| sys.potential(x)).collect();
        for w in values.windows(2) {
            max_increase = max_increase.max(w[1] - w[0]);
        }
        for (x, &v) in traj.states.iter().zip(&values) {
            if x.sub(&sys.equilibrium).norm() > 1e-9 {
                min_off = min_off.min(v);
            }
        }
        trajectories.push(traj);
    }
    for _ in 0..cfg.n_check {
        let x = uniform_vector(&mut rng, 2, -cfg.start_box, cfg.start_box);
        min_off = min_off.min(sys.potential(&x));
    }
    Ok(DecreaseReport {
        max_increase,
        min_off_equilibrium: min_off,
        at_equilibrium: sys.potential(&sys.equilibrium),
        trajectories,
    })
}

pub fn run(cfg: &LyapunovConfig) -> Result<LyapunovRun> {
    cfg.validate()?;
    let mut system = build_system(cfg)?;
    let pairs = training_pairs(cfg)?;
    let losses = fit(&mut system, &pairs, cfg)?;
    let report = check_decrease(&system, cfg)?;
    Ok(LyapunovRun { system, losses, report })
}

/// `trajectory,step,t,x1,x2,V`
pub fn potential_series_csv(sys: &LyapunovSystem, report: &DecreaseReport) -> String {
    let mut out = String::from("trajectory,step,t,x1,x2,V\n");
    for (k, traj) in report.trajectories.iter().enumerate() {
        for (i, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
            let _ = writeln!(out, "{k},{i},{t:?},{:?},{:?},{:?}", x[0], x[1], sys.potential(x));
        }
    }
    out
}

/// `iteration,loss`
pub fn loss_csv(losses: &[f64]) -> String {
    let mut out = String::from("iteration,loss\n");
    for (i, l) in losses.iter().enumerate() {
        let _ = writeln!(out, "{i},{l:?}");
    }
    out
}
