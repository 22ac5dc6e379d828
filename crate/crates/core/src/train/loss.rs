use crate::error::{invalid, Result};
use crate::numkit::Vector;

/// Per-sample squared error `‖pred - target‖²` and its gradient
/// `2 (pred - target)`. Averaging over a batch is the caller's job.
pub fn mse_loss(pred: &Vector, target: &Vector) -> Result<(f64, Vector)> {
    if pred.len() != target.len() {
        return invalid(format!(
            "prediction has dimension {}, target {}",
            pred.len(),
            target.len()
        ));
    }
    let r = pred.sub(target);
    Ok((r.norm_squared(), r.scaled(2.0)))
}

/// Softmax cross-entropy on logits whose true-class entry is lowered by
/// `margin_offset`. Returns the value and the gradient w.r.t. the
/// unmodified logits.
pub fn margin_cross_entropy(
    logits: &Vector,
    label: usize,
    margin_offset: f64,
) -> Result<(f64, Vector)> {
    if label >= logits.len() {
        return invalid(format!("label {label} out of range for {} classes", logits.len()));
    }
    if !(margin_offset >= 0.0) {
        return invalid("margin offset must be nonnegative");
    }
    let mut z = logits.clone();
    z[label] -= margin_offset;
    let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = z.map(|v| (v - top).exp());
    let total = exps.sum();
    let value = total.ln() + top - z[label];
    let mut grad = exps.scaled(1.0 / total);
    grad[label] -= 1.0;
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_vector, seeded};

    #[test]
    fn mse_examples() {
        let (v, g) = mse_loss(&Vector::from([1.0, 2.0]), &Vector::from([1.0, 2.0])).unwrap();
        assert_eq!((v, g), (0.0, Vector::zeros(2)));
        let (v, g) = mse_loss(&Vector::from([1.0, 0.0]), &Vector::zeros(2)).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(g.as_slice(), &[2.0, 0.0]);
        assert!(mse_loss(&Vector::zeros(2), &Vector::zeros(3)).is_err());
    }

    #[test]
    fn uniform_logits_give_log_classes() {
        let (v, g) = margin_cross_entropy(&Vector::from([0.3, 0.3, 0.3]), 1, 0.0).unwrap();
        assert!((v - 3f64.ln()).abs() < 1e-15);
        assert!(g.sum().abs() < 1e-12);
    }

    #[test]
    fn offset_penalises_true_class() {
        let logits = Vector::from([2.0, 0.5, -1.0]);
        let (plain, _) = margin_cross_entropy(&logits, 0, 0.0).unwrap();
        let (shifted, _) = margin_cross_entropy(&logits, 0, 0.5).unwrap();
        assert!(shifted > plain);
        assert!(margin_cross_entropy(&logits, 3, 0.0).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded(5);
        let step = 1e-5;
        for trial in 0..20 {
            let z = normal_vector(&mut rng, 5).scaled(2.0);
            let label = trial % 5;
            let (_, g) = margin_cross_entropy(&z, label, 0.5).unwrap();
            let t = normal_vector(&mut rng, 5);
            let (_, gm) = mse_loss(&z, &t).unwrap();
            for i in 0..5 {
                let (mut zp, mut zm) = (z.clone(), z.clone());
                zp[i] += step;
                zm[i] -= step;
                let f = |v: &Vector| margin_cross_entropy(v, label, 0.5).unwrap().0;
                let fd = (f(&zp) - f(&zm)) / (2.0 * step);
                assert!((fd - g[i]).abs() < 1e-6);
                let f = |v: &Vector| mse_loss(v, &t).unwrap().0;
                let fd = (f(&zp) - f(&zm)) / (2.0 * step);
                assert!((fd - gm[i]).abs() < 1e-7);
            }
        }
    }
}
