use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wreathlin::basis::{orbit_pattern, pattern_of_structure};
use wreathlin::layer::EquivariantLayer;
use wreathlin::perm::Permutation;
use wreathlin::{Matrix, StructureExpr};

mod common;

fn perm_strategy(n: usize) -> impl Strategy<Value = Permutation> {
    Just((0..n).collect::<Vec<usize>>())
        .prop_shuffle()
        .prop_map(|v| Permutation::new(v).unwrap())
}

fn perm_pair() -> impl Strategy<Value = (Permutation, Permutation)> {
    (1usize..9).prop_flat_map(|n| (perm_strategy(n), perm_strategy(n)))
}

proptest! {
    #[test]
    fn matrix_representation_is_a_homomorphism((p, q) in perm_pair()) {
        let pq: Matrix<i64> = p.compose(&q).unwrap().to_matrix();
        let prod = p.to_matrix::<i64>().matmul(&q.to_matrix()).unwrap();
        prop_assert_eq!(pq, prod);
    }

    #[test]
    fn row_action_composes((p, q) in perm_pair()) {
        let n = p.degree();
        let x = Matrix::from_fn(n, 2, |i, j| (10 * i + j) as i64);
        let lhs = p.compose(&q).unwrap().permute_rows(&x);
        let rhs = p.permute_rows(&q.permute_rows(&x));
        prop_assert_eq!(&lhs, &rhs);
        prop_assert_eq!(p.to_matrix::<i64>().matmul(&x).unwrap(), p.permute_rows(&x));
    }

    #[test]
    fn inverse_undoes((p, _) in perm_pair()) {
        prop_assert!(p.compose(&p.inverse()).unwrap().is_identity());
        prop_assert!(p.inverse().compose(&p).unwrap().is_identity());
    }

    #[test]
    fn structure_display_roundtrips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = common::random_structure(&mut rng, 64, 3);
        prop_assert_eq!(StructureExpr::parse(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn closed_form_matches_group_orbits(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = common::random_structure(&mut rng, 24, 3);
        let closed = pattern_of_structure(&e).unwrap();
        prop_assert_eq!(&closed, &orbit_pattern(&e.group().unwrap()));
        if e.is_transitive() {
            prop_assert_eq!(e.param_count(), closed.num_orbits());
        }
    }

    #[test]
    fn fast_apply_matches_dense(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = common::random_structure(&mut rng, 64, 3);
        let (ci, co) = (rng.random_range(1..=2), rng.random_range(1..=2));
        let layer = EquivariantLayer::<f64>::random(e.clone(), ci, co, &mut rng).unwrap();
        let x = Matrix::from_fn(e.degree(), ci, |_, _| rng.random_range(-1.0..1.0));
        let err = layer.apply(&x).unwrap().rel_diff(&layer.apply_dense(&x).unwrap());
        prop_assert!(err <= 1e-10, "{} err {:e}", e, err);
    }

    #[test]
    fn apply_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = common::random_structure(&mut rng, 64, 3);
        let n = e.degree();
        let layer = EquivariantLayer::<f64>::random(e, 2, 2, &mut rng).unwrap();
        let x = Matrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let y = Matrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let combo = x.scale(&a).add(&y.scale(&b)).unwrap();
        let lhs = layer.apply(&combo).unwrap();
        let rhs = layer.apply(&x).unwrap().scale(&a).add(&layer.apply(&y).unwrap().scale(&b)).unwrap();
        let scale = rhs.max_abs().max(lhs.max_abs()).max(1e-300);
        prop_assert!(lhs.max_abs_diff(&rhs) / scale <= 1e-12);
    }
}
