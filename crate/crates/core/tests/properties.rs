use proptest::prelude::*;

use stablenet::attacks::{pgd_l2, AttackConfig};
use stablenet::blocks::{
    Activation, Block, ClampedScale, HamiltonianBlock, Layer, LiftLayer, LinearLayer, MlpLayer, Network,
    NonExpansiveBlock, ProjectLayer,
};
use stablenet::data::{parse_idx, IdxFile};
use stablenet::invprob::{build_invnet, tikhonov_lipschitz, ForwardModel, TikhonovReconstructor};
use stablenet::numkit::{power_method, spectral_norm_oracle};
use stablenet::ode::{harmonic_oscillator, integrate, Method};
use stablenet::rng::{normal_matrix, normal_vector, seeded, uniform_vector};
use stablenet::stability::{certified_radius, composed_lipschitz_bound, margin};
use stablenet::train::margin_cross_entropy;
use stablenet::{Matrix, Vector};

fn vector(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, len)
}

fn classifier(seed: u64, d: usize, classes: usize) -> Network {
    let mut rng = seeded(seed);
    Network::new(vec![
        MlpLayer::new(&mut rng, d, 8, d, Activation::Tanh).into(),
        LinearLayer::new(&mut rng, d, classes).into(),
    ])
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn margin_is_permutation_invariant(logits in vector(6), perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle()) {
        let (class, m) = margin(&Vector::from(logits.clone())).unwrap();
        let permuted: Vec<f64> = perm.iter().map(|&i| logits[i]).collect();
        let (pclass, pm) = margin(&Vector::from(permuted)).unwrap();
        prop_assert!(m >= 0.0);
        prop_assert_eq!(m, pm);
        // ties can legitimately resolve to a different index
        if m > 0.0 {
            prop_assert_eq!(perm[pclass], class);
        }
    }

    #[test]
    fn softmax_gradient_sums_to_zero(logits in vector(7), label in 0..7usize, offset in 0.0..2.0f64) {
        let (value, g) = margin_cross_entropy(&Vector::from(logits), label, offset).unwrap();
        prop_assert!(value >= 0.0);
        prop_assert!(g.sum().abs() <= 1e-12);
    }

    #[test]
    fn nonexpansive_block_is_one_lipschitz(seed in any::<u64>(), d in 1..8usize, hidden in 1..12usize, t in 0.1..4.0f64) {
        let mut rng = seeded(seed);
        let block = NonExpansiveBlock::new(&mut rng, d, hidden, t).unwrap();
        let exact = spectral_norm_oracle(&block.weight).unwrap();
        prop_assert!(block.satisfies_step_constraint(exact));
        for _ in 0..20 {
            let x = normal_vector(&mut rng, d).scaled(2.0);
            let y = x.add(&normal_vector(&mut rng, d).scaled(0.1));
            let gap = block.forward(&x).unwrap().sub(&block.forward(&y).unwrap()).norm();
            prop_assert!(gap <= x.sub(&y).norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn lift_and_project_are_isometric_or_truncating(x in vector(4), extra in 0..5usize) {
        let x = Vector::from(x);
        let lift = LiftLayer::new(4, 4 + extra).unwrap();
        let up = lift.forward(&x).unwrap();
        prop_assert_eq!(up.norm(), x.norm());
        prop_assert_eq!(&up.as_slice()[..4], x.as_slice());
        let project = ProjectLayer::new(4 + extra, 4).unwrap();
        prop_assert_eq!(project.forward(&up).unwrap(), x);
        prop_assert_eq!(lift.lipschitz_bound().unwrap(), 1.0);
        prop_assert_eq!(project.lipschitz_bound().unwrap(), 1.0);
    }

    #[test]
    fn clamped_scale_respects_bound(c in -100.0..100.0f64, bound in 0.01..10.0f64) {
        let mut s = ClampedScale::new(3, c, bound).unwrap();
        prop_assert!(s.effective().abs() <= bound);
        s.c = c * 3.0;
        prop_assert!(s.effective().abs() <= bound);
        prop_assert!(s.lipschitz_bound().unwrap() <= bound);
    }

    #[test]
    fn invnet_composed_bound_within_budget(seed in any::<u64>(), l in 0.1..10.0f64, blocks in 1..6usize) {
        let net = build_invnet(&mut seeded(seed), l, blocks, 6).unwrap();
        prop_assert!(composed_lipschitz_bound(&net).unwrap() <= l * (1.0 + 1e-12));
    }

    #[test]
    fn hamiltonian_jacobian_is_symplectic(seed in any::<u64>(), d in 1..5usize, h in 0.01..1.0f64, relu in any::<bool>()) {
        let mut rng = seeded(seed);
        let act = if relu { Activation::Relu } else { Activation::Tanh };
        let block: Block = HamiltonianBlock::new(&mut rng, d, h, act).into();
        let x = normal_vector(&mut rng, 2 * d);
        let (_, cache) = block.forward_cached(&x).unwrap();
        let rows: Vec<Vec<f64>> = (0..2 * d)
            .map(|i| {
                let mut g: Vec<Vec<f64>> = block.parameters().iter().map(|p| vec![0.0; p.len()]).collect();
                block.backward(&cache, &Vector::basis(2 * d, i), &mut g).into_vec()
            })
            .collect();
        let jac = Matrix::from_rows(&rows).unwrap();
        let mut j = Matrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            j[(i, d + i)] = 1.0;
            j[(d + i, i)] = -1.0;
        }
        let form = jac.transpose().matmul(&j).unwrap().matmul(&jac).unwrap().sub(&j).unwrap();
        prop_assert!(form.max_abs() <= 1e-8);
        prop_assert!(spectral_norm_oracle(&jac).unwrap() >= 1.0 - 1e-8);
    }

    #[test]
    fn pgd_stays_in_the_ball(seed in any::<u64>(), eps in 0.0..2.0f64, iters in 1..30usize) {
        let net = classifier(seed, 4, 3);
        let mut rng = seeded(seed ^ 1);
        let x = normal_vector(&mut rng, 4);
        let out = pgd_l2(&net, &x, (seed % 3) as usize, &AttackConfig::new(eps, iters)).unwrap();
        prop_assert!(out.point.sub(&x).norm() <= eps + 1e-9);
    }

    #[test]
    fn certified_ball_keeps_the_class(seed in any::<u64>()) {
        let net = classifier(seed, 3, 4);
        let l = composed_lipschitz_bound(&net).unwrap();
        let mut rng = seeded(seed ^ 2);
        let x = normal_vector(&mut rng, 3);
        let cert = certified_radius(&net, &x, l).unwrap();
        prop_assert!((cert.radius - cert.margin / (2.0 * l)).abs() <= 1e-15 * cert.radius.max(1.0));
        for _ in 0..200 {
            let dir = normal_vector(&mut rng, 3).normalized().unwrap();
            let r = cert.radius * (1.0 - 1e-6) * uniform_vector(&mut rng, 1, 0.0, 1.0)[0];
            let y = x.add(&dir.scaled(r));
            prop_assert_eq!(margin(&net.forward(&y).unwrap()).unwrap().0, cert.predicted_class);
        }
    }

    #[test]
    fn power_method_never_overshoots(seed in any::<u64>(), rows in 1..10usize, cols in 1..10usize, k in 1..50usize) {
        let mut rng = seeded(seed);
        let a = normal_matrix(&mut rng, rows, cols);
        let est = power_method(&a, &normal_vector(&mut rng, cols), k).unwrap();
        prop_assert!(est.norm <= spectral_norm_oracle(&a).unwrap() * (1.0 + 1e-12));
        prop_assert!((est.vector.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn tikhonov_map_is_linear_with_norm_l(tau in 0.0..50.0f64, y1 in vector(2), y2 in vector(2), a in -3.0..3.0f64) {
        let model = ForwardModel::new(0.25, 0.0).unwrap();
        let rec = TikhonovReconstructor::new(&model, tau).unwrap();
        let (y1, y2) = (Vector::from(y1), Vector::from(y2));
        let lhs = rec.reconstruct(&y1.scaled(a).add(&y2));
        let rhs = rec.reconstruct(&y1).scaled(a).add(&rec.reconstruct(&y2));
        prop_assert!(lhs.sub(&rhs).norm() <= 1e-9 * (1.0 + rhs.norm()));
        let l = tikhonov_lipschitz(&model, tau);
        prop_assert!((spectral_norm_oracle(&rec.matrix).unwrap() - l).abs() <= 1e-10 * l.max(1.0));
    }

    #[test]
    fn trajectories_have_increasing_times(h in 0.001..0.5f64, n in 0..100usize, symplectic in any::<bool>()) {
        let method = if symplectic { Method::Symplectic } else { Method::Euler };
        let traj = integrate(&harmonic_oscillator(), &Vector::from([1.0, 0.0]), 0.0, h, n, method).unwrap();
        prop_assert_eq!(traj.states.len(), n + 1);
        prop_assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(traj.states.iter().all(|s| s.len() == 2));
    }

    #[test]
    fn idx_round_trips(dims in prop::collection::vec(1..6usize, 1..4), fill in any::<u8>()) {
        let n: usize = dims.iter().product();
        let payload: Vec<u8> = (0..n).map(|i| (i as u8).wrapping_mul(31).wrapping_add(fill)).collect();
        let file = IdxFile::new(dims, payload).unwrap();
        let bytes = file.to_bytes();
        prop_assert_eq!(parse_idx(&bytes).unwrap(), file);
        prop_assert!(parse_idx(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn normalized_vectors_have_unit_norm(v in vector(5)) {
        let v = Vector::from(v);
        match v.normalized() {
            Some(u) => prop_assert!((u.norm() - 1.0).abs() <= 1e-12),
            None => prop_assert_eq!(v.norm(), 0.0),
        }
    }
}
