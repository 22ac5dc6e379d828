use crate::error::{invalid, Result};
use crate::numkit::Vector;

use super::{check_input, BlockCache, Layer};

/// Appends zeros: `ℝ^in → ℝ^out`, `out ≥ in`. Norm preserving.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftLayer {
    pub in_dim: usize,
    pub out_dim: usize,
}

impl LiftLayer {
    pub fn new(in_dim: usize, out_dim: usize) -> Result<Self> {
        if in_dim == 0 || out_dim < in_dim {
            return invalid(format!("lift needs 0 < in <= out, got {in_dim} -> {out_dim}"));
        }
        Ok(LiftLayer { in_dim, out_dim })
    }
}

impl Layer for LiftLayer {
    fn input_dim(&self) -> usize {
        self.in_dim
    }

    fn output_dim(&self) -> usize {
        self.out_dim
    }

    fn forward(&self, x: &Vector) -> Result<Vector> {
        check_input(x, self.in_dim, "lift")?;
        Ok(x.concat(&Vector::zeros(self.out_dim - self.in_dim)))
    }

    fn forward_cached(&self, x: &Vector) -> Result<(Vector, BlockCache)> {
        Ok((self.forward(x)?, BlockCache::default()))
    }

    fn backward(&self, _: &BlockCache, gy: &Vector, _: &mut [Vec<f64>]) -> Vector {
        gy.slice(0, self.in_dim)
    }

    fn parameters(&self) -> Vec<&[f64]> {
        Vec::new()
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        Vec::new()
    }

    fn lipschitz_bound(&self) -> Result<f64> {
        Ok(1.0)
    }
}

/// Keeps the leading `out` coordinates: `ℝ^in → ℝ^out`, `out ≤ in`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectLayer {
    pub in_dim: usize,
    pub out_dim: usize,
}

impl ProjectLayer {
    pub fn new(in_dim: usize, out_dim: usize) -> Result<Self> {
        if out_dim == 0 || out_dim > in_dim {
            return invalid(format!("project needs 0 < out <= in, got {in_dim} -> {out_dim}"));
        }
        Ok(ProjectLayer { in_dim, out_dim })
    }
}

impl Layer for ProjectLayer {
    fn input_dim(&self) -> usize {
        self.in_dim
    }

    fn output_dim(&self) -> usize {
        self.out_dim
    }

    fn forward(&self, x: &Vector) -> Result<Vector> {
        check_input(x, self.in_dim, "project")?;
        Ok(x.slice(0, self.out_dim))
    }

    fn forward_cached(&self, x: &Vector) -> Result<(Vector, BlockCache)> {
        Ok((self.forward(x)?, BlockCache::default()))
    }

    fn backward(&self, _: &BlockCache, gy: &Vector, _: &mut [Vec<f64>]) -> Vector {
        gy.concat(&Vector::zeros(self.in_dim - self.out_dim))
    }

    fn parameters(&self) -> Vec<&[f64]> {
        Vec::new()
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        Vec::new()
    }

    fn lipschitz_bound(&self) -> Result<f64> {
        Ok(1.0)
    }
}

/// Learnable scalar gain `x ↦ clamp(c, -L, L) · x`.
///
/// The optimiser updates `c` freely and [`ClampedScale::clamp`] projects it
/// back into `[-L, L]` after every step; the gradient with respect to `c`
/// is the unclamped one.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampedScale {
    pub c: f64,
    pub bound: f64,
    pub dim: usize,
}

impl ClampedScale {
    pub fn new(dim: usize, c: f64, bound: f64) -> Result<Self> {
        if !(bound > 0.0) || !bound.is_finite() {
            return invalid(format!("scale bound must be positive, got {bound}"));
        }
        let mut s = ClampedScale { c, bound, dim };
        s.clamp();
        Ok(s)
    }

    pub fn effective(&self) -> f64 {
        self.c.clamp(-self.bound, self.bound)
    }

    pub fn clamp(&mut self) {
        self.c = self.effective();
    }
}

impl Layer for ClampedScale {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn output_dim(&self) -> usize {
        self.dim
    }

    fn forward(&self, x: &Vector) -> Result<Vector> {
        check_input(x, self.dim, "scale")?;
        Ok(x.scaled(self.effective()))
    }

    fn forward_cached(&self, x: &Vector) -> Result<(Vector, BlockCache)> {
        Ok((self.forward(x)?, BlockCache(vec![x.clone()])))
    }

    fn backward(&self, cache: &BlockCache, gy: &Vector, grads: &mut [Vec<f64>]) -> Vector {
        grads[0][0] += gy.dot(&cache.0[0]);
        gy.scaled(self.effective())
    }

    fn parameters(&self) -> Vec<&[f64]> {
        vec![std::slice::from_ref(&self.c)]
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        vec![std::slice::from_mut(&mut self.c)]
    }

    fn lipschitz_bound(&self) -> Result<f64> {
        Ok(self.effective().abs())
    }
}
