use std::f64::consts::PI;

use crate::numkit::Vector;
use crate::rng::{normal, seeded, uniform};

use super::LabeledDataset;

pub const T_MIN: f64 = PI / 2.0;
pub const T_MAX: f64 = 3.0 * PI;

/// Point at parameter `t` on arm `k`: `(t cos(t + kπ), t sin(t + kπ)) / t_max`.
pub fn swiss_roll_point(t: f64, arm: usize) -> [f64; 2] {
    let phase = t + arm as f64 * PI;
    [t * phase.cos() / T_MAX, t * phase.sin() / T_MAX]
}

/// `(x₁, x₂) ↦ (x₁, 0, x₂, 0)`.
pub fn embed_swiss_roll(p: [f64; 2]) -> Vector {
    Vector::from([p[0], 0.0, p[1], 0.0])
}

/// Two interleaved spiral arms in ℝ⁴; sample `i` belongs to arm `i mod 2`.
pub fn swiss_roll(n: usize, noise: f64, seed: u64) -> LabeledDataset {
    let mut rng = seeded(seed);
    let mut inputs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let arm = i % 2;
        let t = uniform(&mut rng, T_MIN, T_MAX);
        let mut p = swiss_roll_point(t, arm);
        if noise > 0.0 {
            p[0] += noise * normal(&mut rng);
            p[1] += noise * normal(&mut rng);
        }
        inputs.push(embed_swiss_roll(p));
        labels.push(arm);
    }
    LabeledDataset { inputs, labels, n_classes: 2 }
}

/// `n` starting points evenly spaced on the circle of the given radius,
/// for phase portraits of planar systems.
pub fn circle_seeds(n: usize, radius: f64) -> Vec<Vector> {
    (0..n)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / n as f64;
            Vector::from([radius * a.cos(), radius * a.sin()])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_points_lie_on_the_arms() {
        let ds = swiss_roll(4, 0.0, 1);
        for (x, &arm) in ds.inputs.iter().zip(&ds.labels) {
            assert_eq!((x[1], x[3]), (0.0, 0.0));
            let r = (x[0] * x[0] + x[2] * x[2]).sqrt();
            let t = r * T_MAX;
            let p = swiss_roll_point(t, arm);
            assert!((p[0] - x[0]).abs() < 1e-12 && (p[1] - x[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn classes_are_balanced_and_seeded() {
        for n in [7, 10, 1001] {
            let c = swiss_roll(n, 0.05, 3).class_counts();
            assert!(c[0].abs_diff(c[1]) <= 1);
        }
        assert_eq!(swiss_roll(20, 0.05, 3), swiss_roll(20, 0.05, 3));
        assert_ne!(swiss_roll(20, 0.05, 3), swiss_roll(20, 0.05, 4));
    }

    #[test]
    fn seeds_on_circle() {
        for s in circle_seeds(8, 2.0) {
            assert!((s.norm() - 2.0).abs() < 1e-12);
        }
    }
}
