use crate::error::{invalid, Result};

use super::Matrix;

const TAYLOR_TERMS: usize = 24;

/// `exp(A)` by scaling and squaring with a truncated Taylor series.
///
/// `A` is scaled by `2^-s` so the scaled 1-norm is at most 1/2; 24 terms then
/// truncate below double precision before squaring `s` times.
pub fn matrix_exponential(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return invalid(format!("matrix exponential of a {}x{} matrix", a.rows(), a.cols()));
    }
    if !a.is_finite() {
        return invalid("matrix exponential of a non-finite matrix");
    }
    let n = a.rows();
    let norm = a.norm_one();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a.scaled(2f64.powi(-squarings));

    let mut result = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=TAYLOR_TERMS {
        term = term.matmul(&scaled)?.scaled(1.0 / k as f64);
        result = result.add(&term)?;
    }
    for _ in 0..squarings {
        result = result.matmul(&result)?;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gives_identity() {
        let e = matrix_exponential(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(e, Matrix::identity(3));
    }

    #[test]
    fn diagonal_case() {
        let e = matrix_exponential(&Matrix::diagonal(&[1.0, -1.0])).unwrap();
        assert!((e[(0, 0)] - std::f64::consts::E).abs() < 1e-12);
        assert!((e[(1, 1)] - (-1f64).exp()).abs() < 1e-12);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn rejects_non_square() {
        assert!(matrix_exponential(&Matrix::zeros(2, 3)).is_err());
    }
}
