use crate::error::{invalid, Result};
use crate::numkit::{power_method, Matrix, Vector};
use crate::rng::{fan_in_matrix, fan_in_vector, Rng};

use super::{check_input, Activation, BlockCache, Layer, VERIFY_POWER_ITERATIONS};

/// Residual block `x ↦ x + h B σ(A x + b)`, one explicit Euler step of a
/// field with no non-expansiveness guarantee.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    /// `H x d`
    pub a: Matrix,
    /// `d x H`
    pub b: Matrix,
    pub bias: Vector,
    pub h: f64,
    pub activation: Activation,
}

impl ResidualBlock {
    pub fn new(rng: &mut Rng, dim: usize, hidden: usize, h: f64, activation: Activation) -> Self {
        ResidualBlock {
            a: fan_in_matrix(rng, hidden, dim, dim),
            b: fan_in_matrix(rng, dim, hidden, hidden),
            bias: fan_in_vector(rng, hidden, dim),
            h,
            activation,
        }
    }

    pub fn from_parts(
        a: Matrix,
        b: Matrix,
        bias: Vector,
        h: f64,
        activation: Activation,
    ) -> Result<Self> {
        if b.shape() != (a.cols(), a.rows()) || bias.len() != a.rows() {
            return invalid("residual block shapes must be A: HxD, B: DxH, b: H");
        }
        Ok(ResidualBlock { a, b, bias, h, activation })
    }
}

impl Layer for ResidualBlock {
    fn input_dim(&self) -> usize {
        self.a.cols()
    }

    fn output_dim(&self) -> usize {
        self.a.cols()
    }

    fn forward(&self, x: &Vector) -> Result<Vector> {
        Ok(self.forward_cached(x)?.0)
    }

    fn forward_cached(&self, x: &Vector) -> Result<(Vector, BlockCache)> {
        check_input(x, self.input_dim(), "residual block")?;
        let z = self.a.matvec(x).add(&self.bias);
        let mut y = x.clone();
        y.axpy(self.h, &self.b.matvec(&self.activation.map(&z)));
        Ok((y, BlockCache(vec![x.clone(), z])))
    }

    fn backward(&self, cache: &BlockCache, gy: &Vector, grads: &mut [Vec<f64>]) -> Vector {
        let (x, z) = (&cache.0[0], &cache.0[1]);
        let s = self.activation.map(z);
        let bt_gy = self.b.matvec_t(gy);
        let gz = self.activation.map_derivative(z).hadamard(&bt_gy).scaled(self.h);
        accumulate_outer(&mut grads[0], self.a.cols(), 1.0, &gz, x);
        for (g, v) in grads[1].iter_mut().zip(gz.iter()) {
            *g += v;
        }
        accumulate_outer(&mut grads[2], self.b.cols(), self.h, gy, &s);
        let mut gx = gy.clone();
        gx.axpy(1.0, &self.a.matvec_t(&gz));
        gx
    }

    fn input_gradient(&self, cache: &BlockCache, gy: &Vector) -> Vector {
        let z = &cache.0[1];
        let gz = self.activation.map_derivative(z).hadamard(&self.b.matvec_t(gy)).scaled(self.h);
        let mut gx = gy.clone();
        gx.axpy(1.0, &self.a.matvec_t(&gz));
        gx
    }

    fn parameters(&self) -> Vec<&[f64]> {
        vec![self.a.as_slice(), self.bias.as_slice(), self.b.as_slice()]
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.a.as_mut_slice(), self.bias.as_mut_slice(), self.b.as_mut_slice()]
    }

    /// `1 + h ‖B‖₂ ‖A‖₂` (assumes a 1-Lipschitz activation).
    fn lipschitz_bound(&self) -> Result<f64> {
        let na = spectral_norm(&self.a)?;
        let nb = spectral_norm(&self.b)?;
        Ok(1.0 + self.h.abs() * na * nb)
    }
}

/// `buf += alpha · u vᵀ` for a row-major buffer with `cols` columns.
pub(crate) fn accumulate_outer(buf: &mut [f64], cols: usize, alpha: f64, u: &[f64], v: &[f64]) {
    debug_assert_eq!(buf.len(), u.len() * cols);
    for (i, &ui) in u.iter().enumerate() {
        if ui == 0.0 {
            continue;
        }
        let row = &mut buf[i * cols..(i + 1) * cols];
        for (r, &vj) in row.iter_mut().zip(v) {
            *r += alpha * ui * vj;
        }
    }
}

pub(crate) fn spectral_norm(m: &Matrix) -> Result<f64> {
    let start = Vector::filled(m.cols(), 1.0);
    Ok(power_method(m, &start, VERIFY_POWER_ITERATIONS)?.norm)
}
