//! Certification and stability analysis: margins, certified radii,
//! composed Lipschitz bounds, one-sided Lipschitz estimates, and
//! Lyapunov-stable vector fields.

mod lyapunov;

use std::fmt::Write as _;

use crate::blocks::{Layer, Network};
use crate::error::{invalid, Result};
use crate::numkit::{symmetric_eigenvalues, Matrix, Vector};
use crate::ode::VectorField;
use crate::rng::{uniform_vector, Rng};

pub use lyapunov::{lyapunov_project, ConvexPotential, LyapunovGradients, LyapunovSystem};

/// Central-difference step used for Jacobians of vector fields.
pub const JACOBIAN_FD_STEP: f64 = 1e-5;

/// Top class (lowest index on ties) and its lead over the runner-up.
pub fn margin(logits: &Vector) -> Result<(usize, f64)> {
    if logits.len() < 2 {
        return invalid("margin needs at least two logits");
    }
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    let runner_up = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((best, logits[best] - runner_up))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub input: Vector,
    pub predicted_class: usize,
    pub margin: f64,
    pub lipschitz_bound: f64,
    /// Every `y` with `‖x - y‖₂ < radius` receives the same prediction.
    pub radius: f64,
}

/// Certificate `m(x) / (2L)` for `net` at `x`, given a Lipschitz bound `L`.
pub fn certified_radius(net: &Network, x: &Vector, lipschitz: f64) -> Result<Certificate> {
    if !(lipschitz > 0.0) || !lipschitz.is_finite() {
        return invalid(format!("Lipschitz bound must be positive, got {lipschitz}"));
    }
    let (predicted_class, m) = margin(&net.forward(x)?)?;
    Ok(Certificate {
        input: x.clone(),
        predicted_class,
        margin: m,
        lipschitz_bound: lipschitz,
        radius: m / (2.0 * lipschitz),
    })
}

pub fn certificates_to_csv(certs: &[Certificate]) -> String {
    let mut out = String::from("index,class,margin,lipschitz_bound,radius\n");
    for (i, c) in certs.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{:?},{:?},{:?}",
            c.predicted_class, c.margin, c.lipschitz_bound, c.radius
        );
    }
    out
}

/// Product of the per-block Lipschitz bounds.
pub fn composed_lipschitz_bound(net: &Network) -> Result<f64> {
    net.blocks().iter().try_fold(1.0, |acc, b| Ok(acc * b.lipschitz_bound()?))
}

/// Largest `‖Φ(x) - Φ(y)‖ / ‖x - y‖` over `pairs` random pairs with entries
/// uniform in `[-range, range]`.
pub fn empirical_lipschitz_ratio(
    net: &Network,
    rng: &mut Rng,
    pairs: usize,
    range: f64,
) -> Result<f64> {
    let d = net.input_dim();
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let x = uniform_vector(rng, d, -range, range);
        let y = uniform_vector(rng, d, -range, range);
        let dist = x.sub(&y).norm();
        if dist == 0.0 {
            continue;
        }
        let gap = net.forward(&x)?.sub(&net.forward(&y)?).norm();
        worst = worst.max(gap / dist);
    }
    Ok(worst)
}

/// Central-difference Jacobian of `field` at `x` (time 0).
pub fn field_jacobian(field: &VectorField, x: &Vector) -> Result<Matrix> {
    let d = field.dimension();
    let mut jac = Matrix::zeros(d, d);
    for j in 0..d {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[j] += JACOBIAN_FD_STEP;
        xm[j] -= JACOBIAN_FD_STEP;
        let col = field.eval(0.0, &xp)?.sub(&field.eval(0.0, &xm)?);
        for i in 0..d {
            jac[(i, j)] = col[i] / (2.0 * JACOBIAN_FD_STEP);
        }
    }
    Ok(jac)
}

/// Maximum over `samples` of `λ_max((J + Jᵀ)/2)`; a lower estimate of the
/// field's one-sided Lipschitz constant.
pub fn one_sided_lipschitz_estimate(field: &VectorField, samples: &[Vector]) -> Result<f64> {
    if samples.is_empty() {
        return invalid("one-sided Lipschitz estimate needs at least one sample");
    }
    let mut worst = f64::NEG_INFINITY;
    for x in samples {
        let j = field_jacobian(field, x)?;
        let sym = j.add(&j.transpose())?.scaled(0.5);
        let eig = symmetric_eigenvalues(&sym)?;
        worst = worst.max(*eig.last().expect("nonempty spectrum"));
    }
    Ok(worst)
}
