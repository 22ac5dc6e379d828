use crate::error::{Error, Result};
use crate::numkit::{pairwise_dot, power_method, Matrix, SpectralEstimate, Vector};
use crate::rng::{fan_in_matrix, fan_in_vector, normal_vector, Rng};

use super::{check_input, Activation, BlockCache, Layer};

/// Cold-start power iterations run when a block is created or loaded.
pub const COLD_START_ITERATIONS: usize = 100;

/// Default multiplier applied to the spectral estimate when choosing the
/// number of sub-steps.
pub const DEFAULT_INFLATION: f64 = 1.01;

/// Gradient-flow block `x ↦ x - h Aᵀ ReLU(A x + b)` applied `n_steps` times
/// with `h = T / n_steps`.
///
/// Each sub-step is an explicit Euler step of `ẋ = -∇V(x)` for the convex
/// potential `V(x) = Σ ½ ReLU(A x + b)²`, whose gradient is
/// ‖A‖₂²-Lipschitz. The step is therefore 1-Lipschitz whenever
/// `h ≤ 2 / ‖A‖₂²`; [`NonExpansiveBlock::update_step_count`] picks the
/// smallest `n_steps` satisfying that with the tracked estimate of ‖A‖₂.
#[derive(Debug, Clone, PartialEq)]
pub struct NonExpansiveBlock {
    /// `H x d`
    pub weight: Matrix,
    pub bias: Vector,
    pub total_time: f64,
    pub spectral: SpectralEstimate,
    pub n_steps: usize,
    pub inflation: f64,
}

impl NonExpansiveBlock {
    /// Random block acting on `dim`-vectors with `hidden` units.
    pub fn new(rng: &mut Rng, dim: usize, hidden: usize, total_time: f64) -> Result<Self> {
        let weight = fan_in_matrix(rng, hidden, dim, dim);
        let bias = fan_in_vector(rng, hidden, dim);
        let start = normal_vector(rng, dim);
        Self::from_parts(weight, bias, total_time, &start)
    }

    /// Builds a block from explicit weights, running the cold-start power
    /// iteration from `start` and choosing the step count.
    pub fn from_parts(
        weight: Matrix,
        bias: Vector,
        total_time: f64,
        start: &Vector,
    ) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::InvalidInput(format!(
                "bias length {} does not match {} hidden units",
                bias.len(),
                weight.rows()
            )));
        }
        if !(total_time > 0.0) {
            return Err(Error::InvalidInput("integration time must be positive".into()));
        }
        let spectral = power_method(&weight, start, COLD_START_ITERATIONS)?;
        let mut block = NonExpansiveBlock {
            weight,
            bias,
            total_time,
            spectral,
            n_steps: 1,
            inflation: DEFAULT_INFLATION,
        };
        block.update_step_count();
        Ok(block)
    }

    pub fn hidden_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn step_size(&self) -> f64 {
        self.total_time / self.n_steps as f64
    }

    /// Warm-started power iterations on the current weight.
    pub fn refresh_spectral(&mut self, iterations: usize) -> Result<()> {
        self.spectral.refine(&self.weight, iterations)
    }

    /// Sets `n_steps = max(1, ceil(T (inflation · ‖A‖₂)² / 2))` from the
    /// stored estimate and returns it.
    pub fn update_step_count(&mut self) -> usize {
        self.n_steps = step_count_for(self.total_time, self.inflation * self.spectral.norm);
        self.n_steps
    }

    /// Whether `h ≤ 2/‖A‖₂²` holds for the given norm of `A`.
    pub fn satisfies_step_constraint(&self, spectral_norm: f64) -> bool {
        self.step_size() * spectral_norm * spectral_norm <= 2.0
    }

    /// The gradient field `x ↦ Aᵀ ReLU(A x + b)` of the block's potential.
    pub fn potential_gradient(&self, x: &Vector) -> Vector {
        let z = self.pre_activation(x);
        self.weight.matvec_t(&Activation::Relu.map(&z))
    }

    /// The potential `V(x) = Σ ½ ReLU(A x + b)²`.
    pub fn potential(&self, x: &Vector) -> f64 {
        let z = self.pre_activation(x);
        0.5 * Activation::Relu.map(&z).norm_squared()
    }

    fn pre_activation(&self, x: &Vector) -> Vector {
        self.weight.matvec(x).add(&self.bias)
    }

    /// `x ← x - h Aᵀ ReLU(A x + b)`, leaving the pre-activation in `z`.
    fn substep(&self, x: &mut [f64], z: &mut [f64], s: &mut [f64], g: &mut [f64], h: f64) {
        for (i, (zi, si)) in z.iter_mut().zip(s.iter_mut()).enumerate() {
            *zi = pairwise_dot(self.weight.row(i), x) + self.bias[i];
            *si = zi.max(0.0);
        }
        self.weight.matvec_t_into(s, g);
        for (xk, gk) in x.iter_mut().zip(g.iter()) {
            *xk -= h * gk;
        }
    }

    /// Reverse sweep over the cached sub-steps, adding weight and bias
    /// gradients when `grads` is given.
    fn reverse(&self, cache: &BlockCache, grad_out: &Vector, mut grads: Option<(&mut [f64], &mut [f64])>) -> Vector {
        let h = self.step_size();
        let dim = self.input_dim();
        let mut gy = grad_out.clone().into_vec();
        let mut gz = vec![0.0; self.hidden_dim()];
        let mut back = vec![0.0; dim];
        for pair in cache.0.chunks(2).rev() {
            let (x, z) = (&pair[0], &pair[1]);
            // y = x - h Aᵀ s(z), z = A x + b
            for (i, (&zi, gzi)) in z.iter().zip(gz.iter_mut()).enumerate() {
                *gzi = if zi > 0.0 { -h * pairwise_dot(self.weight.row(i), &gy) } else { 0.0 };
            }
            if let Some((grad_a, grad_b)) = grads.as_mut() {
                for (i, (&zi, &gzi)) in z.iter().zip(gz.iter()).enumerate() {
                    if zi <= 0.0 {
                        continue;
                    }
                    let c = -h * zi;
                    let grad_row = &mut grad_a[i * dim..(i + 1) * dim];
                    for ((g, &yk), &xk) in grad_row.iter_mut().zip(&gy).zip(x.iter()) {
                        *g += c * yk + gzi * xk;
                    }
                    grad_b[i] += gzi;
                }
            }
            self.weight.matvec_t_into(&gz, &mut back);
            for (y, b) in gy.iter_mut().zip(&back) {
                *y += b;
            }
        }
        Vector::from(gy)
    }

    fn check_steps(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::InvalidState("non-expansive block has n_steps = 0".into()));
        }
        Ok(())
    }
}

/// Smallest `n ≥ 1` with `T / n ≤ 2 / norm²`.
pub fn step_count_for(total_time: f64, norm: f64) -> usize {
    let needed = total_time * norm * norm / 2.0;
    if needed.is_finite() && needed > 1.0 {
        needed.ceil() as usize
    } else {
        1
    }
}

impl Layer for NonExpansiveBlock {
    fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    fn output_dim(&self) -> usize {
        self.weight.cols()
    }

    fn forward(&self, x: &Vector) -> Result<Vector> {
        check_input(x, self.input_dim(), "non-expansive block")?;
        self.check_steps()?;
        let h = self.step_size();
        let mut x = x.clone();
        let mut z = vec![0.0; self.hidden_dim()];
        let mut s = z.clone();
        let mut g = vec![0.0; x.len()];
        for _ in 0..self.n_steps {
            self.substep(&mut x, &mut z, &mut s, &mut g, h);
        }
        Ok(x)
    }

    fn forward_cached(&self, x: &Vector) -> Result<(Vector, BlockCache)> {
        check_input(x, self.input_dim(), "non-expansive block")?;
        self.check_steps()?;
        let h = self.step_size();
        let mut saved = Vec::with_capacity(2 * self.n_steps);
        let mut x = x.clone();
        let mut z = vec![0.0; self.hidden_dim()];
        let mut s = z.clone();
        let mut g = vec![0.0; x.len()];
        for _ in 0..self.n_steps {
            saved.push(x.clone());
            self.substep(&mut x, &mut z, &mut s, &mut g, h);
            saved.push(Vector::from(z.clone()));
        }
        Ok((x, BlockCache(saved)))
    }

    fn backward(&self, cache: &BlockCache, grad_out: &Vector, grads: &mut [Vec<f64>]) -> Vector {
        let (ga, gb) = grads.split_at_mut(1);
        self.reverse(cache, grad_out, Some((&mut ga[0], &mut gb[0])))
    }

    fn input_gradient(&self, cache: &BlockCache, grad_out: &Vector) -> Vector {
        self.reverse(cache, grad_out, None)
    }

    fn parameters(&self) -> Vec<&[f64]> {
        vec![self.weight.as_slice(), self.bias.as_slice()]
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weight.as_mut_slice(), self.bias.as_mut_slice()]
    }

    /// `max(1, h‖A‖₂² - 1)^n_steps`, with ‖A‖₂ from a long warm-started power
    /// iteration. Each sub-step has Jacobian `I - h AᵀDA` with `D` a 0/1
    /// diagonal, whose eigenvalues lie in `[1 - h‖A‖₂², 1]`.
    fn lipschitz_bound(&self) -> Result<f64> {
        let est = power_method(&self.weight, &self.spectral.vector, super::VERIFY_POWER_ITERATIONS)?;
        let per_step = (self.step_size() * est.norm * est.norm - 1.0).max(1.0);
        Ok(per_step.powi(self.n_steps as i32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::testing::gradient_check;
    use crate::rng::{seeded, uniform_vector};

    fn scalar_block(a: f64) -> NonExpansiveBlock {
        let mut b = NonExpansiveBlock::from_parts(
            Matrix::from_vec(1, 1, vec![a]).unwrap(),
            Vector::zeros(1),
            1.0,
            &Vector::from([1.0]),
        )
        .unwrap();
        b.n_steps = 1;
        b
    }

    #[test]
    fn inactive_relu_is_identity() {
        let b = scalar_block(1.0);
        assert_eq!(b.forward(&Vector::from([-3.0])).unwrap().as_slice(), &[-3.0]);
    }

    #[test]
    fn single_active_substep() {
        let b = scalar_block(1.0);
        assert_eq!(b.forward(&Vector::from([2.0])).unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn zero_steps_is_invalid_state() {
        let mut b = scalar_block(1.0);
        b.n_steps = 0;
        assert!(matches!(b.forward(&Vector::from([1.0])), Err(Error::InvalidState(_))));
    }

    #[test]
    fn step_count_examples() {
        assert_eq!(step_count_for(1.0, 1.0), 1);
        assert_eq!(step_count_for(1.0, 2.0), 2);
        assert_eq!(step_count_for(1.0, 0.0), 1);
        assert_eq!(step_count_for(1.0, 3.0), 5);
        let mut b = scalar_block(2.0);
        b.inflation = 1.0;
        assert_eq!(b.update_step_count(), 2);
        assert!(b.satisfies_step_constraint(2.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded(7);
        for _ in 0..10 {
            let mut b = NonExpansiveBlock::new(&mut rng, 4, 6, 1.0).unwrap();
            b.n_steps = 3;
            assert!(gradient_check(&b, &mut rng) < 1e-5);
        }
    }

    #[test]
    fn one_lipschitz_under_step_constraint() {
        let mut rng = seeded(11);
        for _ in 0..5 {
            let mut b = NonExpansiveBlock::new(&mut rng, 5, 8, 1.0).unwrap();
            b.weight = b.weight.scaled(3.0);
            b.refresh_spectral(200).unwrap();
            b.update_step_count();
            for _ in 0..200 {
                let x = uniform_vector(&mut rng, 5, -10.0, 10.0);
                let y = uniform_vector(&mut rng, 5, -10.0, 10.0);
                let fx = b.forward(&x).unwrap();
                let fy = b.forward(&y).unwrap();
                assert!(fx.sub(&fy).norm() <= x.sub(&y).norm() + 1e-9);
            }
            assert!((b.lipschitz_bound().unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
