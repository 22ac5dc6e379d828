use crate::error::{invalid, Result};
use crate::numkit::{Matrix, Vector};
use crate::rng::{fan_in_matrix, fan_in_vector, Rng};

use super::residual::{accumulate_outer, spectral_norm};
use super::{check_input, BlockCache, Layer};

/// Affine map `x ↦ W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub weight: Matrix,
    pub bias: Vector,
}

impl LinearLayer {
    pub fn new(rng: &mut Rng, input_dim: usize, output_dim: usize) -> Self {
        LinearLayer {
            weight: fan_in_matrix(rng, output_dim, input_dim, input_dim),
            bias: fan_in_vector(rng, output_dim, input_dim),
        }
    }

    pub fn from_parts(weight: Matrix, bias: Vector) -> Result<Self> {
        if bias.len() != weight.rows() {
            return invalid("linear layer bias must match the output dimension");
        }
        Ok(LinearLayer { weight, bias })
    }
}

impl Layer for LinearLayer {
    fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    fn forward(&self, x: &Vector) -> Result<Vector> {
        check_input(x, self.input_dim(), "linear layer")?;
        Ok(self.weight.matvec(x).add(&self.bias))
    }

    fn forward_cached(&self, x: &Vector) -> Result<(Vector, BlockCache)> {
        Ok((self.forward(x)?, BlockCache(vec![x.clone()])))
    }

    fn backward(&self, cache: &BlockCache, gy: &Vector, grads: &mut [Vec<f64>]) -> Vector {
        accumulate_outer(&mut grads[0], self.weight.cols(), 1.0, gy, &cache.0[0]);
        for (g, v) in grads[1].iter_mut().zip(gy.iter()) {
            *g += v;
        }
        self.weight.matvec_t(gy)
    }

    fn parameters(&self) -> Vec<&[f64]> {
        vec![self.weight.as_slice(), self.bias.as_slice()]
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weight.as_mut_slice(), self.bias.as_mut_slice()]
    }

    fn lipschitz_bound(&self) -> Result<f64> {
        spectral_norm(&self.weight)
    }
}
