//! Explicit Euler against symplectic Euler on the harmonic oscillator.

use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::numkit::Vector;
use crate::ode::{harmonic_oscillator, integrate, oscillator_energy, Method, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorConfig {
    pub h: f64,
    pub steps: usize,
    pub x0: f64,
    pub p0: f64,
}

impl Default for OscillatorConfig {
    fn default() -> Self {
        OscillatorConfig { h: 0.1, steps: 500, x0: 1.0, p0: 0.0 }
    }
}

impl OscillatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return invalid("step size must be positive");
        }
        if self.steps == 0 {
            return invalid("need at least one step");
        }
        Ok(())
    }
}

/// `q² + p² + h q p`, conserved exactly by symplectic Euler with step `h`.
pub fn modified_energy(h: f64, state: &Vector) -> f64 {
    let (q, p) = (state[0], state[1]);
    q * q + p * p + h * q * p
}

/// Interval that the energy `(q² + p²)/2` of every symplectic-Euler iterate
/// lies in, from the eigenvalues `1 ± h/2` of the modified-energy form.
/// Returns `None` for `h ≥ 2`, where the iteration is unstable.
pub fn symplectic_energy_bounds(h: f64, start: &Vector) -> Option<(f64, f64)> {
    if !(h > 0.0 && h < 2.0) {
        return None;
    }
    let c = modified_energy(h, start);
    Some((c / (2.0 + h), c / (2.0 - h)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorRun {
    pub euler: Trajectory,
    pub symplectic: Trajectory,
}

pub fn run(cfg: &OscillatorConfig) -> Result<OscillatorRun> {
    cfg.validate()?;
    let field = harmonic_oscillator();
    let start = Vector::from([cfg.x0, cfg.p0]);
    Ok(OscillatorRun {
        euler: integrate(&field, &start, 0.0, cfg.h, cfg.steps, Method::Euler)?,
        symplectic: integrate(&field, &start, 0.0, cfg.h, cfg.steps, Method::Symplectic)?,
    })
}

/// `step,t,x,p,energy`
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("step,t,x,p,energy\n");
    for (i, (t, s)) in traj.times.iter().zip(&traj.states).enumerate() {
        let _ = writeln!(out, "{i},{t:?},{:?},{:?},{:?}", s[0], s[1], oscillator_energy(s));
    }
    out
}

/// `step,euler_energy,symplectic_energy`
pub fn energy_csv(run: &OscillatorRun) -> String {
    let mut out = String::from("step,euler_energy,symplectic_energy\n");
    for (i, (e, s)) in run.euler.states.iter().zip(&run.symplectic.states).enumerate() {
        let _ = writeln!(out, "{i},{:?},{:?}", oscillator_energy(e), oscillator_energy(s));
    }
    out
}
