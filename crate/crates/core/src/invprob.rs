//! The 2D ill-conditioned inverse problem `y = A x + z` with
//! `A = [[1+ε, 1], [1, 1+ε]]`: data generation, Tikhonov baseline and the
//! InvNet reconstruction network.

use crate::blocks::{ClampedScale, LiftLayer, Network, NonExpansiveBlock, ProjectLayer};
use crate::error::{invalid, Result};
use crate::numkit::{symmetric_eigenvalues, Matrix, Vector};
use crate::rng::{normal, seeded, uniform, Rng};

/// Standard deviation of the normal offset from the support curve.
pub const CURVE_THICKNESS: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardModel {
    pub a: Matrix,
    pub epsilon: f64,
    pub noise_sigma: f64,
    singular_values: Vec<f64>,
}

impl ForwardModel {
    pub fn new(epsilon: f64, noise_sigma: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return invalid("epsilon must be positive");
        }
        if !(noise_sigma >= 0.0) {
            return invalid("noise level must be nonnegative");
        }
        let a = Matrix::from_rows(&[vec![1.0 + epsilon, 1.0], vec![1.0, 1.0 + epsilon]])?;
        let ata = a.transpose().matmul(&a)?;
        let singular_values =
            symmetric_eigenvalues(&ata)?.into_iter().map(|l| l.max(0.0).sqrt()).collect();
        Ok(ForwardModel { a, epsilon, noise_sigma, singular_values })
    }

    /// Singular values of `A`, ascending.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn condition_number(&self) -> f64 {
        self.singular_values[1] / self.singular_values[0]
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        self.a.matvec(x)
    }
}

/// Point `(t, t² - ½)` of the support curve and its unit normal.
pub fn support_curve(t: f64) -> (Vector, Vector) {
    let n = (1.0 + 4.0 * t * t).sqrt();
    (Vector::from([t, t * t - 0.5]), Vector::from([-2.0 * t / n, 1.0 / n]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseSample {
    pub truth: Vector,
    pub observed: Vector,
    /// Curve parameter `t` and normal offset `r` of the ground truth.
    pub t: f64,
    pub r: f64,
}

/// `n` pairs `(x†, A x† + z)` with `x†` near the support curve and
/// `z ~ N(0, σ² I)`.
pub fn generate_dataset(model: &ForwardModel, n: usize, seed: u64) -> Vec<InverseSample> {
    let mut rng = seeded(seed);
    (0..n).map(|_| draw_sample(model, &mut rng)).collect()
}

fn draw_sample(model: &ForwardModel, rng: &mut Rng) -> InverseSample {
    let t = uniform(rng, -1.0, 1.0);
    let r = CURVE_THICKNESS * normal(rng);
    let (p, nrm) = support_curve(t);
    let mut truth = p;
    truth.axpy(r, &nrm);
    let mut observed = model.apply(&truth);
    if model.noise_sigma > 0.0 {
        let z = Vector::from([normal(rng), normal(rng)]);
        observed.axpy(model.noise_sigma, &z);
    }
    InverseSample { truth, observed, t, r }
}

/// Linear reconstruction `y ↦ (AᵀA + τI)⁻¹Aᵀ y`.
#[derive(Debug, Clone, PartialEq)]
pub struct TikhonovReconstructor {
    pub tau: f64,
    pub matrix: Matrix,
}

impl TikhonovReconstructor {
    pub fn new(model: &ForwardModel, tau: f64) -> Result<Self> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return invalid(format!("tau must be finite and nonnegative, got {tau}"));
        }
        let at = model.a.transpose();
        let normal = at.matmul(&model.a)?.add(&Matrix::identity(2).scaled(tau))?;
        Ok(TikhonovReconstructor { tau, matrix: normal.inverse()?.matmul(&at)? })
    }

    pub fn reconstruct(&self, y: &Vector) -> Vector {
        self.matrix.matvec(y)
    }
}

pub fn tikhonov_reconstruct(model: &ForwardModel, tau: f64, y: &Vector) -> Result<Vector> {
    Ok(TikhonovReconstructor::new(model, tau)?.reconstruct(y))
}

/// `L(τ) = maxᵢ σᵢ / (σᵢ² + τ)`, the operator norm of the reconstruction map.
pub fn tikhonov_lipschitz(model: &ForwardModel, tau: f64) -> f64 {
    model
        .singular_values()
        .iter()
        .map(|&s| s / (s * s + tau))
        .fold(0.0, f64::max)
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Mean of `‖x̂ - x†‖²` over `samples` for reconstruction `f`.
pub fn mean_squared_error(
    samples: &[InverseSample],
    mut f: impl FnMut(&Vector) -> Result<Vector>,
) -> Result<f64> {
    if samples.is_empty() {
        return invalid("no samples to evaluate");
    }
    let mut total = 0.0;
    for s in samples {
        total += f(&s.observed)?.sub(&s.truth).norm_squared();
    }
    Ok(total / samples.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauSearch {
    pub tau: f64,
    pub lipschitz: f64,
    /// `(τ, mean squared error)` for every grid point.
    pub curve: Vec<(f64, f64)>,
}

/// Grid point with the lowest training error; ties go to the larger `τ`.
pub fn grid_search_tau(
    model: &ForwardModel,
    train: &[InverseSample],
    grid: &[f64],
) -> Result<TauSearch> {
    if grid.is_empty() {
        return invalid("tau grid is empty");
    }
    let mut curve = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &tau in grid {
        let rec = TikhonovReconstructor::new(model, tau)?;
        let err = mean_squared_error(train, |y| Ok(rec.reconstruct(y)))?;
        curve.push((tau, err));
        best = match best {
            Some((bt, be)) if be < err || (be == err && bt >= tau) => Some((bt, be)),
            _ => Some((tau, err)),
        };
    }
    let (tau, _) = best.expect("grid is nonempty");
    Ok(TauSearch { tau, lipschitz: tikhonov_lipschitz(model, tau), curve })
}

/// The `τ` with `L(τ) = target`, by bisection to relative tolerance 1e-10.
pub fn invert_tau_for_lipschitz(model: &ForwardModel, target: f64) -> Result<f64> {
    let l0 = tikhonov_lipschitz(model, 0.0);
    if !(target > 0.0 && target < l0) {
        return invalid(format!("Lipschitz target {target} outside (0, {l0})"));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while tikhonov_lipschitz(model, hi) > target {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if tikhonov_lipschitz(model, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `c · project ∘ Φ_ℓ ∘ ⋯ ∘ Φ₁ ∘ lift` with non-expansive `Φᵢ` of width
/// `lift_dim`, `T = 1`, and `|c| ≤ L`.
pub fn build_invnet(rng: &mut Rng, lipschitz: f64, n_blocks: usize, lift_dim: usize) -> Result<Network> {
    let mut blocks = vec![LiftLayer::new(2, lift_dim)?.into()];
    for _ in 0..n_blocks {
        blocks.push(NonExpansiveBlock::new(rng, lift_dim, lift_dim, 1.0)?.into());
    }
    blocks.push(ProjectLayer::new(lift_dim, 2)?.into());
    blocks.push(ClampedScale::new(2, 1.0, lipschitz)?.into());
    Ok(Network::new(blocks)?.with_budget(lipschitz))
}
