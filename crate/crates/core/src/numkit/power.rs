use crate::error::{invalid, Result};
use crate::rng::counter_uniform;

use super::{Matrix, Vector};

const NULL_SPACE_THRESHOLD: f64 = 1e-30;

/// Running estimate of the top right singular pair of a weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    /// Unit-norm guess for the leading right singular vector.
    pub vector: Vector,
    /// Estimate of ‖A‖₂.
    pub norm: f64,
}

impl SpectralEstimate {
    /// Continues the power iteration from the stored vector.
    pub fn refine(&mut self, a: &Matrix, iterations: usize) -> Result<()> {
        *self = power_method(a, &self.vector, iterations)?;
        Ok(())
    }
}

/// Power iteration on `AᵀA`: `u ← AᵀAu / ‖AᵀAu‖₂`, `k` times.
///
/// The returned norm is `sqrt(‖AᵀA u_k‖₂)`, which never exceeds ‖A‖₂. If an
/// iterate lands in the null space of `A` it is re-seeded from a deterministic
/// counter-based draw.
pub fn power_method(a: &Matrix, u0: &Vector, k: usize) -> Result<SpectralEstimate> {
    if k == 0 {
        return invalid("power method needs at least one iteration");
    }
    if u0.len() != a.cols() {
        return invalid(format!(
            "start vector has length {}, matrix has {} columns",
            u0.len(),
            a.cols()
        ));
    }
    let mut u = match u0.normalized() {
        Some(u) => u,
        None => return invalid("power method start vector must be nonzero and finite"),
    };
    let mut reseeds = 0u64;
    for _ in 0..k {
        let w = gram_apply(a, &u);
        let n = w.norm();
        if n < NULL_SPACE_THRESHOLD || !n.is_finite() {
            reseeds += 1;
            u = reseed(a.cols(), reseeds);
            continue;
        }
        u = w.scaled(1.0 / n);
    }
    let norm = gram_apply(a, &u).norm().sqrt();
    Ok(SpectralEstimate { vector: u, norm })
}

fn gram_apply(a: &Matrix, u: &Vector) -> Vector {
    a.matvec_t(&a.matvec(u))
}

fn reseed(n: usize, round: u64) -> Vector {
    loop {
        let v = Vector::from(
            (0..n as u64)
                .map(|i| counter_uniform(round, i))
                .collect::<Vec<_>>(),
        );
        if let Some(v) = v.normalized() {
            return v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix_converges_to_largest_entry() {
        let a = Matrix::diagonal(&[3.0, 4.0]);
        let est = power_method(&a, &Vector::from([1.0, 1.0]), 200).unwrap();
        assert!((est.norm - 4.0).abs() < 1e-12);
        assert!((est.vector.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_zero_start_and_mismatched_dimension() {
        let a = Matrix::identity(3);
        assert!(power_method(&a, &Vector::zeros(3), 5).is_err());
        assert!(power_method(&a, &Vector::from([1.0, 0.0]), 5).is_err());
        assert!(power_method(&a, &Vector::from([1.0, 0.0, 0.0]), 0).is_err());
    }

    #[test]
    fn null_space_start_is_reseeded() {
        // u0 lies in ker(A); the first Gram product vanishes.
        let a = Matrix::from_rows(&[vec![0.0, 2.0]]).unwrap();
        let est = power_method(&a, &Vector::from([1.0, 0.0]), 20).unwrap();
        assert!((est.norm - 2.0).abs() < 1e-10);
    }

    #[test]
    fn zero_matrix_gives_zero_norm() {
        let a = Matrix::zeros(2, 3);
        let est = power_method(&a, &Vector::from([1.0, 2.0, 3.0]), 4).unwrap();
        assert_eq!(est.norm, 0.0);
        assert!((est.vector.norm() - 1.0).abs() < 1e-12);
    }
}
