use crate::error::{invalid, Result};
use crate::numkit::{Matrix, Vector};
use crate::rng::{fan_in_matrix, fan_in_vector, Rng};

use super::residual::{accumulate_outer, spectral_norm};
use super::{BlockCache, Layer};

/// One symplectic Euler step of the separable Hamiltonian
/// `H(q, p) = Σ γ(B p + b) + Σ γ(C q + c)` with `γ' = σ`:
///
/// ```text
/// q̂  = q + h Bᵀ σ(B p + b)
/// p' = p - h Cᵀ σ(C q̂ + c)
/// ```
///
/// The state is `x = (q, p)` of dimension `2d`. The layer map is symplectic,
/// so its Jacobian has spectral norm at least 1 everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianBlock {
    /// `d x d`, kinetic part
    pub b: Matrix,
    /// `d x d`, potential part
    pub c: Matrix,
    pub b_bias: Vector,
    pub c_bias: Vector,
    pub h: f64,
    pub activation: super::Activation,
}

impl HamiltonianBlock {
    /// Random block on a `2 * half_dim` state.
    pub fn new(rng: &mut Rng, half_dim: usize, h: f64, activation: super::Activation) -> Self {
        HamiltonianBlock {
            b: fan_in_matrix(rng, half_dim, half_dim, half_dim),
            b_bias: fan_in_vector(rng, half_dim, half_dim),
            c: fan_in_matrix(rng, half_dim, half_dim, half_dim),
            c_bias: fan_in_vector(rng, half_dim, half_dim),
            h,
            activation,
        }
    }

    pub fn from_parts(
        b: Matrix,
        c: Matrix,
        b_bias: Vector,
        c_bias: Vector,
        h: f64,
        activation: super::Activation,
    ) -> Result<Self> {
        let d = b.rows();
        if !b.is_square() || c.shape() != (d, d) || b_bias.len() != d || c_bias.len() != d {
            return invalid("Hamiltonian block needs square B, C of equal size and matching biases");
        }
        Ok(HamiltonianBlock { b, c, b_bias, c_bias, h, activation })
    }

    pub fn half_dim(&self) -> usize {
        self.b.rows()
    }
}

impl Layer for HamiltonianBlock {
    fn input_dim(&self) -> usize {
        2 * self.half_dim()
    }

    fn output_dim(&self) -> usize {
        2 * self.half_dim()
    }

    fn forward(&self, x: &Vector) -> Result<Vector> {
        Ok(self.forward_cached(x)?.0)
    }

    fn forward_cached(&self, x: &Vector) -> Result<(Vector, BlockCache)> {
        if x.len() % 2 != 0 {
            return invalid(format!("Hamiltonian block needs an even state dimension, got {}", x.len()));
        }
        if x.len() != self.input_dim() {
            return invalid(format!(
                "Hamiltonian block expects dimension {}, got {}",
                self.input_dim(),
                x.len()
            ));
        }
        let d = self.half_dim();
        let (q, p) = (x.slice(0, d), x.slice(d, 2 * d));
        let u = self.b.matvec(&p).add(&self.b_bias);
        let mut q_hat = q;
        q_hat.axpy(self.h, &self.b.matvec_t(&self.activation.map(&u)));
        let w = self.c.matvec(&q_hat).add(&self.c_bias);
        let mut p_next = p.clone();
        p_next.axpy(-self.h, &self.c.matvec_t(&self.activation.map(&w)));
        let out = q_hat.concat(&p_next);
        Ok((out, BlockCache(vec![p, u, q_hat, w])))
    }

    fn backward(&self, cache: &BlockCache, gy: &Vector, grads: &mut [Vec<f64>]) -> Vector {
        let d = self.half_dim();
        let (p, u, q_hat, w) = (&cache.0[0], &cache.0[1], &cache.0[2], &cache.0[3]);
        let (gq_out, gp_out) = (gy.slice(0, d), gy.slice(d, 2 * d));
        let h = self.h;

        // p' = p - h Cᵀ σ(w), w = C q̂ + c
        let sw = self.activation.map(w);
        let gw = self
            .activation
            .map_derivative(w)
            .hadamard(&self.c.matvec(&gp_out))
            .scaled(-h);
        accumulate_outer(&mut grads[2], d, -h, &sw, &gp_out);
        accumulate_outer(&mut grads[2], d, 1.0, &gw, q_hat);
        for (g, v) in grads[3].iter_mut().zip(gw.iter()) {
            *g += v;
        }
        let mut gq_hat = gq_out;
        gq_hat.axpy(1.0, &self.c.matvec_t(&gw));
        let mut gp = gp_out;

        // q̂ = q + h Bᵀ σ(u), u = B p + b
        let su = self.activation.map(u);
        let gu = self
            .activation
            .map_derivative(u)
            .hadamard(&self.b.matvec(&gq_hat))
            .scaled(h);
        accumulate_outer(&mut grads[0], d, h, &su, &gq_hat);
        accumulate_outer(&mut grads[0], d, 1.0, &gu, p);
        for (g, v) in grads[1].iter_mut().zip(gu.iter()) {
            *g += v;
        }
        gp.axpy(1.0, &self.b.matvec_t(&gu));
        gq_hat.concat(&gp)
    }

    fn parameters(&self) -> Vec<&[f64]> {
        vec![
            self.b.as_slice(),
            self.b_bias.as_slice(),
            self.c.as_slice(),
            self.c_bias.as_slice(),
        ]
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.b.as_mut_slice(),
            self.b_bias.as_mut_slice(),
            self.c.as_mut_slice(),
            self.c_bias.as_mut_slice(),
        ]
    }

    /// `(1 + h‖B‖₂²)(1 + h‖C‖₂²)`: each half-step is a shear whose
    /// off-diagonal block has norm at most `h‖·‖₂²`.
    fn lipschitz_bound(&self) -> Result<f64> {
        let nb = spectral_norm(&self.b)?;
        let nc = spectral_norm(&self.c)?;
        Ok((1.0 + self.h.abs() * nb * nb) * (1.0 + self.h.abs() * nc * nc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::testing::gradient_check;
    use crate::blocks::Activation;
    use crate::rng::seeded;

    fn scalar(h: f64) -> HamiltonianBlock {
        let one = Matrix::identity(1);
        HamiltonianBlock::from_parts(
            one.clone(),
            one,
            Vector::zeros(1),
            Vector::zeros(1),
            h,
            Activation::Tanh,
        )
        .unwrap()
    }

    #[test]
    fn hand_evaluated_scalar_step() {
        // q̂ = 0.5 tanh(1), p' = 1 - 0.5 tanh(q̂), evaluated independently
        let y = scalar(0.5).forward(&Vector::from([0.0, 1.0])).unwrap();
        assert!((y[0] - 0.380_797_077_977_882_4).abs() < 1e-15);
        assert!((y[1] - 0.818_300_257_805_473_8).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_are_identity() {
        let z = Matrix::zeros(2, 2);
        let blk = HamiltonianBlock::from_parts(
            z.clone(),
            z,
            Vector::filled(2, 0.3),
            Vector::filled(2, -0.2),
            0.7,
            Activation::Relu,
        )
        .unwrap();
        let x = Vector::from([1.0, -2.0, 3.0, 0.5]);
        assert_eq!(blk.forward(&x).unwrap(), x);
    }

    #[test]
    fn odd_dimension_rejected() {
        assert!(scalar(0.5).forward(&Vector::from([1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded(13);
        for act in [Activation::Tanh, Activation::Relu] {
            for _ in 0..5 {
                let blk = HamiltonianBlock::new(&mut rng, 3, 0.4, act);
                assert!(gradient_check(&blk, &mut rng) < 1e-5);
            }
        }
    }
}
