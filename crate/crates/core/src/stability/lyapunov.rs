use crate::blocks::{Gradients, Network};
use crate::error::{invalid, Error, Result};
use crate::numkit::{Matrix, Vector};
use crate::ode::VectorField;

/// `‖∇V‖₂²` below which the projection is undefined.
pub const DEGENERATE_TOLERANCE: f64 = 1e-12;

/// Distance from the equilibrium inside which a degenerate gradient is
/// accepted.
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-9;

/// `V(z) = ε‖z‖² + Σᵢ ½ ReLU(wᵢᵀz)²` for `z = x - x̄`; convex, zero only
/// at `z = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPotential {
    /// Rows are the `wᵢ`.
    pub w: Matrix,
    pub epsilon: f64,
}

impl ConvexPotential {
    pub fn new(w: Matrix, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return invalid("potential needs a positive quadratic coefficient");
        }
        Ok(ConvexPotential { w, epsilon })
    }

    pub fn dimension(&self) -> usize {
        self.w.cols()
    }

    pub fn value(&self, z: &Vector) -> f64 {
        let s = self.w.matvec(z).map(|v| v.max(0.0));
        self.epsilon * z.norm_squared() + 0.5 * s.norm_squared()
    }

    pub fn gradient(&self, z: &Vector) -> Vector {
        let s = self.w.matvec(z).map(|v| v.max(0.0));
        let mut g = self.w.matvec_t(&s);
        g.axpy(2.0 * self.epsilon, z);
        g
    }
}

/// Vector field `X = X̂ - ∇V · ReLU(∇VᵀX̂ + μV) / ‖∇V‖²`, along which `V`
/// decreases at rate at least `μV`.
///
/// The base field is `X̂(x) = N(x) - N(x̄)` for a network `N`, so `x̄` is an
/// equilibrium of both `X̂` and `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSystem {
    pub base: Network,
    pub equilibrium: Vector,
    pub mu: f64,
    pub potential: ConvexPotential,
}

/// Parameter gradients of a [`LyapunovSystem`].
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovGradients {
    pub network: Gradients,
    /// Same layout as `potential.w`.
    pub w: Vec<f64>,
}

struct Projection {
    base: Vector,
    grad_v: Vector,
    /// `∇VᵀX̂ + μV`
    activation: f64,
    norm_sq: f64,
}

impl LyapunovSystem {
    pub fn new(
        base: Network,
        equilibrium: Vector,
        mu: f64,
        potential: ConvexPotential,
    ) -> Result<Self> {
        let d = equilibrium.len();
        if base.input_dim() != d || base.output_dim() != d || potential.dimension() != d {
            return invalid("base network, potential and equilibrium must share one dimension");
        }
        if !(mu > 0.0) {
            return invalid("decay rate mu must be positive");
        }
        Ok(LyapunovSystem { base, equilibrium, mu, potential })
    }

    pub fn dimension(&self) -> usize {
        self.equilibrium.len()
    }

    pub fn base_field(&self, x: &Vector) -> Result<Vector> {
        Ok(self.base.forward(x)?.sub(&self.base.forward(&self.equilibrium)?))
    }

    pub fn potential(&self, x: &Vector) -> f64 {
        self.potential.value(&x.sub(&self.equilibrium))
    }

    pub fn potential_gradient(&self, x: &Vector) -> Vector {
        self.potential.gradient(&x.sub(&self.equilibrium))
    }

    fn parts(&self, x: &Vector) -> Result<Projection> {
        let base = self.base_field(x)?;
        let grad_v = self.potential_gradient(x);
        let value = self.potential(x);
        let activation = grad_v.dot(&base) + self.mu * value;
        let norm_sq = grad_v.norm_squared();
        Ok(Projection { base, grad_v, activation, norm_sq })
    }

    fn check_degenerate(&self, x: &Vector, p: &Projection) -> Result<bool> {
        if p.norm_sq >= DEGENERATE_TOLERANCE {
            return Ok(false);
        }
        if x.sub(&self.equilibrium).norm() <= EQUILIBRIUM_TOLERANCE {
            return Ok(true);
        }
        Err(Error::DegenerateGradient(format!(
            "‖∇V‖² = {:e} at a point {:e} away from the equilibrium",
            p.norm_sq,
            x.sub(&self.equilibrium).norm()
        )))
    }

    /// The projected field at `x`.
    pub fn project(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.dimension() {
            return invalid(format!("state has dimension {}, system {}", x.len(), self.dimension()));
        }
        let p = self.parts(x)?;
        if self.check_degenerate(x, &p)? || p.activation <= 0.0 {
            return Ok(p.base);
        }
        let mut out = p.base;
        out.axpy(-p.activation / p.norm_sq, &p.grad_v);
        Ok(out)
    }

    /// Parameter gradients of `⟨u, X(x)⟩`.
    pub fn backward(&self, x: &Vector, u: &Vector) -> Result<LyapunovGradients> {
        let p = self.parts(x)?;
        let mut network = self.base.zero_gradients();
        let mut w = vec![0.0; self.potential.w.as_slice().len()];
        let degenerate = self.check_degenerate(x, &p)?;
        let active = !degenerate && p.activation > 0.0;

        let (g_base, g_grad, g_value) = if active {
            let n = p.norm_sq;
            let ug = u.dot(&p.grad_v);
            let r = p.activation;
            let mut g_base = u.clone();
            g_base.axpy(-ug / n, &p.grad_v);
            let mut g_grad = u.scaled(-r / n);
            g_grad.axpy(-ug / n, &p.base);
            g_grad.axpy(2.0 * r * ug / (n * n), &p.grad_v);
            (g_base, g_grad, -ug / n * self.mu)
        } else {
            (u.clone(), Vector::zeros(x.len()), 0.0)
        };

        let cache = self.base.forward_cached(x)?;
        self.base.backward_into(&cache, &g_base, &mut network)?;
        let cache = self.base.forward_cached(&self.equilibrium)?;
        self.base.backward_into(&cache, &g_base.scaled(-1.0), &mut network)?;

        if active {
            let z = x.sub(&self.equilibrium);
            let d = z.len();
            for (i, row) in w.chunks_mut(d).enumerate() {
                let wi = Vector::from(self.potential.w.row(i));
                let a = wi.dot(&z);
                if a <= 0.0 {
                    continue;
                }
                // ∇V ∋ s wᵢ with s = wᵢᵀz; V ∋ ½ s²
                let coef_z = g_grad.dot(&wi) + g_value * a;
                for k in 0..d {
                    row[k] += a * g_grad[k] + coef_z * z[k];
                }
            }
        }
        Ok(LyapunovGradients { network, w })
    }

    /// Parameter slices: network tensors followed by `w`.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut params = self.base.parameters_mut();
        params.push(self.potential.w.as_mut_slice());
        params
    }

    /// The projected field as an autonomous [`VectorField`]. Points where the
    /// projection is undefined evaluate to NaN, which the integrators report.
    pub fn to_vector_field(&self) -> VectorField {
        let sys = self.clone();
        VectorField::autonomous(self.dimension(), move |x| {
            sys.project(x).unwrap_or_else(|_| Vector::filled(x.len(), f64::NAN))
        })
    }
}

impl LyapunovGradients {
    /// Tensors in [`LyapunovSystem::parameters_mut`] order.
    pub fn tensors(self) -> Vec<Vec<f64>> {
        let mut t = self.network.tensors;
        t.push(self.w);
        t
    }
}

/// Free-function form of [`LyapunovSystem::project`].
pub fn lyapunov_project(sys: &LyapunovSystem, x: &Vector) -> Result<Vector> {
    sys.project(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{Activation, LinearLayer, MlpLayer};
    use crate::rng::{fan_in_matrix, normal_vector, seeded, Rng};

    fn system(rng: &mut Rng) -> LyapunovSystem {
        let base = Network::new(vec![
            MlpLayer::new(rng, 2, 8, 2, Activation::Tanh).into(),
            LinearLayer::new(rng, 2, 2).into(),
        ])
        .unwrap();
        let potential = ConvexPotential::new(fan_in_matrix(rng, 4, 2, 2), 1e-3).unwrap();
        LyapunovSystem::new(base, Vector::from([0.3, -0.2]), 0.5, potential).unwrap()
    }

    #[test]
    fn potential_vanishes_only_at_equilibrium() {
        let mut rng = seeded(1);
        let sys = system(&mut rng);
        assert_eq!(sys.potential(&sys.equilibrium), 0.0);
        for _ in 0..200 {
            let x = normal_vector(&mut rng, 2);
            assert!(sys.potential(&x) > 0.0);
        }
    }

    #[test]
    fn projection_enforces_decay_or_is_identity() {
        let mut rng = seeded(2);
        let sys = system(&mut rng);
        for _ in 0..500 {
            let x = normal_vector(&mut rng, 2).scaled(2.0);
            let base = sys.base_field(&x).unwrap();
            let out = sys.project(&x).unwrap();
            let g = sys.potential_gradient(&x);
            let v = sys.potential(&x);
            if g.dot(&base) + sys.mu * v <= 0.0 {
                assert_eq!(out, base);
            } else {
                assert!((g.dot(&out) + sys.mu * v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn equilibrium_is_fixed_and_degenerate_points_error() {
        let mut rng = seeded(3);
        let sys = system(&mut rng);
        assert_eq!(sys.project(&sys.equilibrium).unwrap(), Vector::zeros(2));
        let near = sys.equilibrium.add(&Vector::from([1e-8, 0.0]));
        assert!(matches!(sys.project(&near), Err(Error::DegenerateGradient(_))));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = seeded(4);
        for _ in 0..10 {
            let sys = system(&mut rng);
            let x = normal_vector(&mut rng, 2);
            let u = normal_vector(&mut rng, 2);
            let grads = sys.backward(&x, &u).unwrap().tensors();
            let n_tensors = grads.len();
            for t in 0..n_tensors {
                for j in 0..grads[t].len() {
                    let eval = |delta: f64| {
                        let mut s = sys.clone();
                        s.parameters_mut()[t][j] += delta;
                        s.project(&x).unwrap().dot(&u)
                    };
                    let fd = (eval(1e-6) - eval(-1e-6)) / 2e-6;
                    let err = (fd - grads[t][j]).abs() / fd.abs().max(grads[t][j].abs()).max(1e-3);
                    assert!(err < 1e-5, "tensor {t} entry {j}: fd {fd} vs {}", grads[t][j]);
                }
            }
        }
    }
}
