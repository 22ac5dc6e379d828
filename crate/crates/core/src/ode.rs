//! Explicit and symplectic Euler integrators on uniform time grids, exact
//! linear flows, and the harmonic oscillator used throughout the tests.

use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::numkit::{matrix_exponential, Matrix, Vector};

type FieldFn = dyn Fn(f64, &Vector) -> Vector + Send + Sync;
type GradFn = dyn Fn(&Vector) -> Vector + Send + Sync;

/// Gradients of a separable Hamiltonian `H(q, p) = K(p) + U(q)`.
///
/// The state is laid out as `(q, p)` with each half of dimension `d`.
pub struct SeparableParts {
    pub kinetic_grad: Box<GradFn>,
    pub potential_grad: Box<GradFn>,
}

/// Right-hand side `X(t, x)` of an ODE `ẋ = X(t, x)`.
pub struct VectorField {
    dimension: usize,
    eval: Box<FieldFn>,
    separable: Option<SeparableParts>,
}

impl VectorField {
    pub fn new(
        dimension: usize,
        eval: impl Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        VectorField { dimension, eval: Box::new(eval), separable: None }
    }

    /// Autonomous field `ẋ = X(x)`.
    pub fn autonomous(
        dimension: usize,
        eval: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self::new(dimension, move |_, x| eval(x))
    }

    /// Field of a separable Hamiltonian system on `(q, p)`; `dimension` is `2d`.
    pub fn separable_hamiltonian(
        dimension: usize,
        kinetic_grad: impl Fn(&Vector) -> Vector + Send + Sync + 'static + Clone,
        potential_grad: impl Fn(&Vector) -> Vector + Send + Sync + 'static + Clone,
    ) -> Self {
        let d = dimension / 2;
        let (kg, ug) = (kinetic_grad.clone(), potential_grad.clone());
        let eval = move |_: f64, x: &Vector| {
            let (q, p) = (x.slice(0, d), x.slice(d, 2 * d));
            kg(&p).concat(&ug(&q).scaled(-1.0))
        };
        VectorField {
            dimension,
            eval: Box::new(eval),
            separable: Some(SeparableParts {
                kinetic_grad: Box::new(kinetic_grad),
                potential_grad: Box::new(potential_grad),
            }),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn separable(&self) -> Option<&SeparableParts> {
        self.separable.as_ref()
    }

    pub fn eval(&self, t: f64, x: &Vector) -> Result<Vector> {
        if x.len() != self.dimension {
            return invalid(format!(
                "state has dimension {}, field expects {}",
                x.len(),
                self.dimension
            ));
        }
        let out = (self.eval)(t, x);
        if out.len() != self.dimension {
            return Err(Error::InvalidState(format!(
                "field returned dimension {}, declared {}",
                out.len(),
                self.dimension
            )));
        }
        Ok(out)
    }
}

/// The harmonic oscillator `ẋ = p, ṗ = -x` with `K = p²/2`, `U = x²/2`.
pub fn harmonic_oscillator() -> VectorField {
    VectorField::separable_hamiltonian(2, |p: &Vector| p.clone(), |q: &Vector| q.clone())
}

/// Total energy `(x² + p²)/2` of a harmonic-oscillator state.
pub fn oscillator_energy(state: &Vector) -> f64 {
    0.5 * state.norm_squared()
}

fn check_step(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return invalid(format!("step size must be positive, got {h}"));
    }
    Ok(())
}

fn finite_or_overflow(v: Vector, step: usize) -> Result<Vector> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NumericOverflow { step, context: "integrator state".into() })
    }
}

/// One explicit Euler step `x + h X(t, x)`.
pub fn euler_step(field: &VectorField, t: f64, x: &Vector, h: f64) -> Result<Vector> {
    euler_step_indexed(field, t, x, h, 0)
}

fn euler_step_indexed(
    field: &VectorField,
    t: f64,
    x: &Vector,
    h: f64,
    step: usize,
) -> Result<Vector> {
    check_step(h)?;
    let mut next = x.clone();
    next.axpy(h, &field.eval(t, x)?);
    finite_or_overflow(next, step)
}

/// One symplectic Euler step: `q̂ = q + h ∇K(p)`, `p' = p - h ∇U(q̂)`.
pub fn symplectic_euler_step(
    kinetic_grad: impl Fn(&Vector) -> Vector,
    potential_grad: impl Fn(&Vector) -> Vector,
    q: &Vector,
    p: &Vector,
    h: f64,
) -> Result<(Vector, Vector)> {
    symplectic_step_indexed(&kinetic_grad, &potential_grad, q, p, h, 0)
}

fn symplectic_step_indexed(
    kinetic_grad: &dyn Fn(&Vector) -> Vector,
    potential_grad: &dyn Fn(&Vector) -> Vector,
    q: &Vector,
    p: &Vector,
    h: f64,
    step: usize,
) -> Result<(Vector, Vector)> {
    check_step(h)?;
    if q.len() != p.len() {
        return invalid("position and momentum must share a dimension");
    }
    let mut q_hat = q.clone();
    q_hat.axpy(h, &kinetic_grad(p));
    let mut p_next = p.clone();
    p_next.axpy(-h, &potential_grad(&q_hat));
    Ok((finite_or_overflow(q_hat, step)?, finite_or_overflow(p_next, step)?))
}

/// `exp(A t) x₀`, the flow of `ẋ = A x`.
pub fn exact_linear_flow(a: &Matrix, x0: &Vector, t: f64) -> Result<Vector> {
    if !a.is_square() || a.rows() != x0.len() {
        return invalid(format!(
            "linear flow needs a square matrix matching the state, got {:?} and {}",
            a.shape(),
            x0.len()
        ));
    }
    if t == 0.0 {
        return Ok(x0.clone());
    }
    Ok(matrix_exponential(&a.scaled(t))?.matvec(x0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Euler,
    Symplectic,
}

/// Discrete trajectory on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    /// CSV with header `t,x1,...,xd`.
    pub fn to_csv(&self) -> String {
        let d = self.dimension();
        let mut out = String::from("t");
        for i in 1..=d {
            let _ = write!(out, ",x{i}");
        }
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            let _ = write!(out, "{t:?}");
            for x in s.iter() {
                let _ = write!(out, ",{x:?}");
            }
            out.push('\n');
        }
        out
    }
}

/// Integrates `n` steps of size `h` from `(t0, x0)`.
///
/// The symplectic method requires the field to carry a separable `(K, U)`
/// decomposition and the state to be laid out as `(q, p)`.
pub fn integrate(
    field: &VectorField,
    x0: &Vector,
    t0: f64,
    h: f64,
    n: usize,
    method: Method,
) -> Result<Trajectory> {
    check_step(h)?;
    if x0.len() != field.dimension() {
        return invalid(format!(
            "initial state has dimension {}, field expects {}",
            x0.len(),
            field.dimension()
        ));
    }
    let parts = match method {
        Method::Symplectic => match field.separable() {
            Some(parts) if field.dimension() % 2 == 0 => Some(parts),
            _ => return invalid("symplectic Euler requested on a non-separable field"),
        },
        Method::Euler => None,
    };
    let d = field.dimension() / 2;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(t0);
    states.push(x0.clone());
    let mut x = x0.clone();
    for step in 0..n {
        let t = t0 + step as f64 * h;
        x = match parts {
            None => euler_step_indexed(field, t, &x, h, step)?,
            Some(parts) => {
                let (q, p) = (x.slice(0, d), x.slice(d, 2 * d));
                let (q, p) = symplectic_step_indexed(
                    &parts.kinetic_grad,
                    &parts.potential_grad,
                    &q,
                    &p,
                    h,
                    step,
                )?;
                q.concat(&p)
            }
        };
        times.push(t0 + (step + 1) as f64 * h);
        states.push(x.clone());
    }
    Ok(Trajectory { times, states })
}
