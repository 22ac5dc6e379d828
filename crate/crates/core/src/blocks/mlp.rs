use crate::error::{invalid, Result};
use crate::numkit::{Matrix, Vector};
use crate::rng::{fan_in_matrix, fan_in_vector, Rng};

use super::residual::{accumulate_outer, spectral_norm};
use super::{check_input, Activation, BlockCache, Layer};

/// Plain perceptron layer `x ↦ Bᵀ σ(A x + b)` without a skip connection.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpLayer {
    /// `H x d_in`
    pub a: Matrix,
    /// `H x d_out`
    pub b: Matrix,
    pub bias: Vector,
    pub activation: Activation,
}

impl MlpLayer {
    pub fn new(
        rng: &mut Rng,
        input_dim: usize,
        hidden: usize,
        output_dim: usize,
        activation: Activation,
    ) -> Self {
        MlpLayer {
            a: fan_in_matrix(rng, hidden, input_dim, input_dim),
            b: fan_in_matrix(rng, hidden, output_dim, hidden),
            bias: fan_in_vector(rng, hidden, input_dim),
            activation,
        }
    }

    pub fn from_parts(a: Matrix, b: Matrix, bias: Vector, activation: Activation) -> Result<Self> {
        if b.rows() != a.rows() || bias.len() != a.rows() {
            return invalid("MLP layer shapes must be A: HxDin, B: HxDout, b: H");
        }
        Ok(MlpLayer { a, b, bias, activation })
    }
}

impl Layer for MlpLayer {
    fn input_dim(&self) -> usize {
        self.a.cols()
    }

    fn output_dim(&self) -> usize {
        self.b.cols()
    }

    fn forward(&self, x: &Vector) -> Result<Vector> {
        Ok(self.forward_cached(x)?.0)
    }

    fn forward_cached(&self, x: &Vector) -> Result<(Vector, BlockCache)> {
        check_input(x, self.input_dim(), "MLP layer")?;
        let z = self.a.matvec(x).add(&self.bias);
        let y = self.b.matvec_t(&self.activation.map(&z));
        Ok((y, BlockCache(vec![x.clone(), z])))
    }

    fn backward(&self, cache: &BlockCache, gy: &Vector, grads: &mut [Vec<f64>]) -> Vector {
        let (x, z) = (&cache.0[0], &cache.0[1]);
        let s = self.activation.map(z);
        let gs = self.b.matvec(gy);
        let gz = self.activation.map_derivative(z).hadamard(&gs);
        accumulate_outer(&mut grads[0], self.a.cols(), 1.0, &gz, x);
        for (g, v) in grads[1].iter_mut().zip(gz.iter()) {
            *g += v;
        }
        accumulate_outer(&mut grads[2], self.b.cols(), 1.0, &s, gy);
        self.a.matvec_t(&gz)
    }

    fn parameters(&self) -> Vec<&[f64]> {
        vec![self.a.as_slice(), self.bias.as_slice(), self.b.as_slice()]
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.a.as_mut_slice(), self.bias.as_mut_slice(), self.b.as_mut_slice()]
    }

    /// `‖B‖₂ ‖A‖₂` (assumes a 1-Lipschitz activation).
    fn lipschitz_bound(&self) -> Result<f64> {
        Ok(spectral_norm(&self.a)? * spectral_norm(&self.b)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::testing::gradient_check;
    use crate::rng::seeded;

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded(5);
        for act in [Activation::Relu, Activation::Tanh] {
            for _ in 0..5 {
                let l = MlpLayer::new(&mut rng, 4, 6, 3, act);
                assert!(gradient_check(&l, &mut rng) < 1e-5);
            }
        }
    }
}
