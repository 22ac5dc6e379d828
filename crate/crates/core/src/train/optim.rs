use crate::error::{invalid, Result};

fn check_shapes(params: &[&mut [f64]], grads: &[Vec<f64>]) -> Result<()> {
    if params.len() != grads.len()
        || params.iter().zip(grads).any(|(p, g)| p.len() != g.len())
    {
        return invalid("gradient tensors do not match the parameter tensors");
    }
    Ok(())
}

/// `θ ← θ - lr ∇L`.
pub fn sgd_step(params: &mut [&mut [f64]], grads: &[Vec<f64>], lr: f64) -> Result<()> {
    check_shapes(params, grads)?;
    for (p, g) in params.iter_mut().zip(grads) {
        for (x, dx) in p.iter_mut().zip(g) {
            *x -= lr * dx;
        }
    }
    Ok(())
}

/// Adam moments for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8, step: 0, m: Vec::new(), v: Vec::new() }
    }
}

impl Adam {
    pub fn new() -> Self {
        Self::default()
    }

    /// One bias-corrected update. A nonzero `weight_decay` adds
    /// `weight_decay · θ` to the gradient before the moments are formed.
    pub fn update(
        &mut self,
        params: &mut [&mut [f64]],
        grads: &[Vec<f64>],
        lr: f64,
        weight_decay: f64,
    ) -> Result<()> {
        check_shapes(params, grads)?;
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != grads.len()
            || self.m.iter().zip(grads).any(|(m, g)| m.len() != g.len())
        {
            return invalid("Adam state was built for different parameter shapes");
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                let gi = g[i] + weight_decay * p[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

/// Free-function form of [`Adam::update`].
pub fn adam_step(
    state: &mut Adam,
    params: &mut [&mut [f64]],
    grads: &[Vec<f64>],
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    state.update(params, grads, lr, weight_decay)
}
