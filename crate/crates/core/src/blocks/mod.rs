//! Network layer kinds with explicit forward passes, vector-Jacobian products
//! and parameter gradients.
//!
//! Every block implements [`Layer`]. Backward passes are derived by hand per
//! block kind; there is no general autodiff graph. Parameter tensors are
//! exposed as flat slices in a fixed per-block order so that optimisers and
//! checkpoints can treat them uniformly.

mod checkpoint;
mod hamiltonian;
mod linear;
mod mlp;
mod network;
mod nonexpansive;
mod residual;
mod shape;

use crate::error::{invalid, Result};
use crate::numkit::Vector;

pub use checkpoint::{load_checkpoint, save_checkpoint, MANIFEST_FILE};
pub use hamiltonian::HamiltonianBlock;
pub use linear::LinearLayer;
pub use mlp::MlpLayer;
pub use network::{jacobian_norm_probe, ForwardCache, Gradients, Network};
pub use nonexpansive::NonExpansiveBlock;
pub use residual::ResidualBlock;
pub use shape::{ClampedScale, LiftLayer, ProjectLayer};

/// Iterations used whenever a block's spectral norm must be trusted
/// (certification, post-hoc verification).
pub const VERIFY_POWER_ITERATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative; the ReLU subgradient at 0 is 0.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => invalid(format!("unknown activation {other:?}")),
        }
    }

    pub(crate) fn map(self, v: &Vector) -> Vector {
        v.map(|x| self.apply(x))
    }

    pub(crate) fn map_derivative(self, v: &Vector) -> Vector {
        v.map(|x| self.derivative(x))
    }
}

/// Intermediate values saved by a forward pass for the matching backward.
/// The layout is private to each block kind.
#[derive(Debug, Clone, Default)]
pub struct BlockCache(pub(crate) Vec<Vector>);

/// Common interface of every block kind.
pub trait Layer {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    fn forward(&self, x: &Vector) -> Result<Vector>;

    fn forward_cached(&self, x: &Vector) -> Result<(Vector, BlockCache)>;

    /// Returns the input gradient and adds parameter gradients into `grads`
    /// (one buffer per tensor in [`Layer::parameters`] order).
    fn backward(&self, cache: &BlockCache, grad_out: &Vector, grads: &mut [Vec<f64>]) -> Vector;

    /// The input gradient of [`Layer::backward`] without parameter gradients.
    fn input_gradient(&self, cache: &BlockCache, grad_out: &Vector) -> Vector {
        let mut scratch: Vec<Vec<f64>> = self.parameters().iter().map(|p| vec![0.0; p.len()]).collect();
        self.backward(cache, grad_out, &mut scratch)
    }

    fn parameters(&self) -> Vec<&[f64]>;

    fn parameters_mut(&mut self) -> Vec<&mut [f64]>;

    /// Upper bound on the block's Lipschitz constant in ℓ².
    fn lipschitz_bound(&self) -> Result<f64>;
}

pub(crate) fn check_input(x: &Vector, expected: usize, kind: &str) -> Result<()> {
    if x.len() != expected {
        return invalid(format!("{kind} expects input of dimension {expected}, got {}", x.len()));
    }
    Ok(())
}

/// Tagged union of all block kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    NonExpansive(NonExpansiveBlock),
    Residual(ResidualBlock),
    Mlp(MlpLayer),
    Hamiltonian(HamiltonianBlock),
    Linear(LinearLayer),
    Lift(LiftLayer),
    Project(ProjectLayer),
    Scale(ClampedScale),
}

macro_rules! dispatch {
    ($self:expr, $b:ident => $body:expr) => {
        match $self {
            Block::NonExpansive($b) => $body,
            Block::Residual($b) => $body,
            Block::Mlp($b) => $body,
            Block::Hamiltonian($b) => $body,
            Block::Linear($b) => $body,
            Block::Lift($b) => $body,
            Block::Project($b) => $body,
            Block::Scale($b) => $body,
        }
    };
}

impl Block {
    pub fn kind(&self) -> &'static str {
        match self {
            Block::NonExpansive(_) => "nonexpansive",
            Block::Residual(_) => "residual",
            Block::Mlp(_) => "mlp",
            Block::Hamiltonian(_) => "hamiltonian",
            Block::Linear(_) => "linear",
            Block::Lift(_) => "lift",
            Block::Project(_) => "project",
            Block::Scale(_) => "scale",
        }
    }
}

impl Layer for Block {
    fn input_dim(&self) -> usize {
        dispatch!(self, b => b.input_dim())
    }

    fn output_dim(&self) -> usize {
        dispatch!(self, b => b.output_dim())
    }

    fn forward(&self, x: &Vector) -> Result<Vector> {
        dispatch!(self, b => b.forward(x))
    }

    fn forward_cached(&self, x: &Vector) -> Result<(Vector, BlockCache)> {
        dispatch!(self, b => b.forward_cached(x))
    }

    fn backward(&self, cache: &BlockCache, grad_out: &Vector, grads: &mut [Vec<f64>]) -> Vector {
        dispatch!(self, b => b.backward(cache, grad_out, grads))
    }

    fn input_gradient(&self, cache: &BlockCache, grad_out: &Vector) -> Vector {
        dispatch!(self, b => b.input_gradient(cache, grad_out))
    }

    fn parameters(&self) -> Vec<&[f64]> {
        dispatch!(self, b => b.parameters())
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        dispatch!(self, b => b.parameters_mut())
    }

    fn lipschitz_bound(&self) -> Result<f64> {
        dispatch!(self, b => b.lipschitz_bound())
    }
}

macro_rules! impl_from_block {
    ($($variant:ident($ty:ty)),* $(,)?) => {
        $(impl From<$ty> for Block {
            fn from(b: $ty) -> Self {
                Block::$variant(b)
            }
        })*
    };
}

impl_from_block!(
    NonExpansive(NonExpansiveBlock),
    Residual(ResidualBlock),
    Mlp(MlpLayer),
    Hamiltonian(HamiltonianBlock),
    Linear(LinearLayer),
    Lift(LiftLayer),
    Project(ProjectLayer),
    Scale(ClampedScale),
);
