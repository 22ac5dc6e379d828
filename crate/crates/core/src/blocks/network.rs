use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{invalid, Error, Result};
use crate::numkit::Vector;
use crate::rng::counter_uniform;

use super::{Block, BlockCache, Layer};

static NEXT_NETWORK_ID: AtomicU64 = AtomicU64::new(1);

/// Iterations of the Jacobian power method in [`jacobian_norm_probe`].
pub const PROBE_ITERATIONS: usize = 50;

/// Ordered block sequence `Φ = Φ_ℓ ∘ ⋯ ∘ Φ₁`.
#[derive(Debug)]
pub struct Network {
    blocks: Vec<Block>,
    pub lipschitz_budget: Option<f64>,
    id: u64,
    version: u64,
}

impl Clone for Network {
    fn clone(&self) -> Self {
        Network {
            blocks: self.blocks.clone(),
            lipschitz_budget: self.lipschitz_budget,
            id: NEXT_NETWORK_ID.fetch_add(1, Ordering::Relaxed),
            version: 0,
        }
    }
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.blocks == other.blocks && self.lipschitz_budget == other.lipschitz_budget
    }
}

/// Per-block intermediate values from one forward pass, tied to the
/// network state that produced them.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    network_id: u64,
    version: u64,
    start: usize,
    blocks: Vec<BlockCache>,
    /// `states[0]` is the input, `states[i + 1]` the output of block `start + i`.
    pub states: Vec<Vector>,
}

impl ForwardCache {
    pub fn output(&self) -> &Vector {
        self.states.last().expect("cache always holds the input")
    }
}

/// Parameter gradients, one flat buffer per tensor in
/// [`Network::parameters`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn scale(&mut self, alpha: f64) {
        self.tensors.iter_mut().flatten().for_each(|g| *g *= alpha);
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tensors.iter().flatten().all(|&g| g == 0.0)
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors.concat()
    }
}

impl Network {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return invalid("network needs at least one block");
        }
        for (i, pair) in blocks.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return invalid(format!(
                    "block {i} ({}) outputs {} but block {} ({}) expects {}",
                    pair[0].kind(),
                    pair[0].output_dim(),
                    i + 1,
                    pair[1].kind(),
                    pair[1].input_dim()
                ));
            }
        }
        Ok(Network {
            blocks,
            lipschitz_budget: None,
            id: NEXT_NETWORK_ID.fetch_add(1, Ordering::Relaxed),
            version: 0,
        })
    }

    pub fn with_budget(mut self, budget: f64) -> Self {
        self.lipschitz_budget = Some(budget);
        self
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Mutable access to the blocks; invalidates outstanding caches.
    pub fn blocks_mut(&mut self) -> &mut [Block] {
        self.version += 1;
        &mut self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.blocks[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.blocks[self.blocks.len() - 1].output_dim()
    }

    pub fn parameters(&self) -> Vec<&[f64]> {
        self.blocks.iter().flat_map(|b| b.parameters()).collect()
    }

    /// Mutable parameter slices; invalidates outstanding caches.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.version += 1;
        self.blocks.iter_mut().flat_map(|b| b.parameters_mut()).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients { tensors: self.parameters().iter().map(|p| vec![0.0; p.len()]).collect() }
    }

    pub fn forward(&self, x: &Vector) -> Result<Vector> {
        self.forward_range(x, 0, self.blocks.len())
    }

    /// Applies blocks `from..to` to `x`.
    pub fn forward_range(&self, x: &Vector, from: usize, to: usize) -> Result<Vector> {
        self.check_range(from, to)?;
        let mut x = x.clone();
        for b in &self.blocks[from..to] {
            x = b.forward(&x)?;
        }
        Ok(x)
    }

    /// All intermediate states `x_0 = x, x_{i+1} = Φ_i(x_i)`.
    pub fn states(&self, x: &Vector) -> Result<Vec<Vector>> {
        let mut out = Vec::with_capacity(self.blocks.len() + 1);
        out.push(x.clone());
        for b in &self.blocks {
            let next = b.forward(out.last().expect("nonempty"))?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn forward_cached(&self, x: &Vector) -> Result<ForwardCache> {
        self.forward_cached_range(x, 0, self.blocks.len())
    }

    pub fn forward_cached_range(&self, x: &Vector, from: usize, to: usize) -> Result<ForwardCache> {
        self.check_range(from, to)?;
        let mut states = Vec::with_capacity(to - from + 1);
        let mut caches = Vec::with_capacity(to - from);
        states.push(x.clone());
        for b in &self.blocks[from..to] {
            let (y, c) = b.forward_cached(states.last().expect("nonempty"))?;
            states.push(y);
            caches.push(c);
        }
        Ok(ForwardCache {
            network_id: self.id,
            version: self.version,
            start: from,
            blocks: caches,
            states,
        })
    }

    /// Reverse-mode pass: returns the input gradient and all parameter
    /// gradients for upstream gradient `grad_out`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Vector) -> Result<(Vector, Gradients)> {
        let mut grads = self.zero_gradients();
        let gx = self.backward_into(cache, grad_out, &mut grads)?;
        Ok((gx, grads))
    }

    /// As [`Network::backward`], accumulating into `grads`.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        grad_out: &Vector,
        grads: &mut Gradients,
    ) -> Result<Vector> {
        self.check_cache(cache, grad_out)?;
        let offsets = self.tensor_offsets();
        let mut g = grad_out.clone();
        for (i, c) in cache.blocks.iter().enumerate().rev() {
            let idx = cache.start + i;
            let (lo, hi) = (offsets[idx], offsets[idx + 1]);
            g = self.blocks[idx].backward(c, &g, &mut grads.tensors[lo..hi]);
        }
        Ok(g)
    }

    /// Input gradient alone, skipping parameter gradients.
    pub fn input_gradient(&self, cache: &ForwardCache, grad_out: &Vector) -> Result<Vector> {
        self.check_cache(cache, grad_out)?;
        let mut g = grad_out.clone();
        for (i, c) in cache.blocks.iter().enumerate().rev() {
            g = self.blocks[cache.start + i].input_gradient(c, &g);
        }
        Ok(g)
    }

    fn check_cache(&self, cache: &ForwardCache, grad_out: &Vector) -> Result<()> {
        if cache.network_id != self.id || cache.version != self.version {
            return Err(Error::InvalidState(
                "forward cache does not match the current network parameters".into(),
            ));
        }
        if grad_out.len() != cache.output().len() {
            return invalid(format!(
                "upstream gradient has dimension {}, output has {}",
                grad_out.len(),
                cache.output().len()
            ));
        }
        Ok(())
    }

    /// Vector-Jacobian product of blocks `from..to` at `x`.
    pub fn vjp_range(&self, x: &Vector, from: usize, to: usize, w: &Vector) -> Result<Vector> {
        let cache = self.forward_cached_range(x, from, to)?;
        self.input_gradient(&cache, w)
    }

    fn tensor_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.blocks.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for b in &self.blocks {
            acc += b.parameters().len();
            offsets.push(acc);
        }
        offsets
    }

    fn check_range(&self, from: usize, to: usize) -> Result<()> {
        if from > to || to > self.blocks.len() {
            return invalid(format!("block range {from}..{to} outside 0..{}", self.blocks.len()));
        }
        Ok(())
    }

    /// Runs `iterations` warm-started power iterations on every
    /// non-expansive block, then re-derives its step count.
    pub fn refresh_spectral(&mut self, iterations: usize) -> Result<()> {
        self.version += 1;
        for b in &mut self.blocks {
            if let Block::NonExpansive(ne) = b {
                ne.refresh_spectral(iterations)?;
                ne.update_step_count();
            }
        }
        Ok(())
    }

    /// Projects constrained parameters back onto their feasible sets.
    pub fn apply_constraints(&mut self) {
        self.version += 1;
        for b in &mut self.blocks {
            if let Block::Scale(s) = b {
                s.clamp();
            }
        }
    }

    /// Sub-step counts of the non-expansive blocks, in order.
    pub fn step_counts(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .filter_map(|b| match b {
                Block::NonExpansive(ne) => Some(ne.n_steps),
                _ => None,
            })
            .collect()
    }
}

/// Estimates `‖∂x_to / ∂x_from‖₂` at input `x`, where `x_i` is the state
/// after `i` blocks.
///
/// Matrix-free power iteration on `JᵀJ`: `J v` by central differences and
/// `Jᵀ w` by an exact vector-Jacobian product.
pub fn jacobian_norm_probe(net: &Network, x: &Vector, from: usize, to: usize) -> Result<f64> {
    net.check_range(from, to)?;
    if from == to {
        return Ok(1.0);
    }
    let start = net.forward_range(x, 0, from)?;
    let n = start.len();
    let mut v = Vector::from((0..n as u64).map(|i| counter_uniform(0x9a3, i)).collect::<Vec<_>>())
        .normalized()
        .expect("probe start vector is nonzero");
    let eps = 1e-6 * start.norm().max(1.0);
    let jvp = |v: &Vector| -> Result<Vector> {
        let mut xp = start.clone();
        xp.axpy(eps, v);
        let mut xm = start.clone();
        xm.axpy(-eps, v);
        let fp = net.forward_range(&xp, from, to)?;
        let fm = net.forward_range(&xm, from, to)?;
        Ok(fp.sub(&fm).scaled(0.5 / eps))
    };
    let mut estimate = 0.0;
    for _ in 0..PROBE_ITERATIONS {
        let jv = jvp(&v)?;
        let w = net.vjp_range(&start, from, to, &jv)?;
        estimate = w.norm().sqrt();
        match w.normalized() {
            Some(u) => v = u,
            None => return Ok(0.0),
        }
    }
    Ok(estimate)
}
