use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wreathlin::basis::pattern_of_structure;
use wreathlin::layer::{equivariance_check, group_of, param_count, EquivariantLayer, Plan};
use wreathlin::perm::DEFAULT_ENUMERATION_LIMIT;
use wreathlin::train::loss_ce;
use wreathlin::{Matrix, StructureExpr};

fn parse(s: &str) -> StructureExpr {
    StructureExpr::parse(s).unwrap()
}

#[test]
fn group_orders() {
    let order = |s: &str| {
        group_of(&parse(s))
            .unwrap()
            .order(DEFAULT_ENUMERATION_LIMIT)
            .unwrap()
    };
    assert_eq!(order("S(3)"), 6);
    assert_eq!(order("wr(S(2),S(3))"), 48);
    assert_eq!(order("prod(C(2),C(2))"), 4);
}

#[test]
fn stated_parameter_counts() {
    assert_eq!(param_count(&parse("wr(S(4),S(3))")), 3);
    assert_eq!(param_count(&parse("prod(S(3),S(4))")), 4);
    assert_eq!(param_count(&parse("wr(wr(S(2),C(2)),C(2))")), 4);
}

#[test]
fn unit_impulse_reads_a_column() {
    let e = parse("wr(C(2),C(2))");
    let pattern = pattern_of_structure(&e).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let layer = EquivariantLayer::<f64>::random(e, 1, 1, &mut rng).unwrap();
    let w = pattern.materialize(layer.weights()).unwrap();
    for j in 0..4 {
        let x = Matrix::from_fn(4, 1, |i, _| if i == j { 1.0 } else { 0.0 });
        assert_eq!(layer.apply(&x).unwrap().column(0), w.column(j));
    }
}

fn apply_outer(plan: &Plan, w: &[f64], x: &[f64], q: usize) -> Vec<f64> {
    let p = plan.degree();
    let mut out = vec![0.0; p * q];
    for b in 0..q {
        let col: Vec<f64> = (0..p).map(|a| x[a * q + b]).collect();
        let mut y = vec![0.0; p];
        plan.apply_into(&col, w, &mut y);
        for a in 0..p {
            out[a * q + b] = y[a];
        }
    }
    out
}

fn apply_inner(plan: &Plan, w: &[f64], x: &[f64], p: usize) -> Vec<f64> {
    let q = plan.degree();
    let mut out = vec![0.0; p * q];
    for a in 0..p {
        plan.apply_into(&x[a * q..(a + 1) * q], w, &mut out[a * q..(a + 1) * q]);
    }
    out
}

#[test]
fn product_factors_commute() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (outer, inner) in [
        ("S(3)", "C(4)"),
        ("wr(S(2),C(2))", "S(3)"),
        ("C(5)", "trivial(2)"),
    ] {
        let (o, i) = (Plan::new(&parse(outer)), Plan::new(&parse(inner)));
        let (p, q) = (o.degree(), i.degree());
        let wo: Vec<f64> = (0..o.num_orbits())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let wi: Vec<f64> = (0..i.num_orbits())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let x: Vec<f64> = (0..p * q).map(|_| rng.random_range(-1.0..1.0)).collect();
        let outer_first = apply_inner(&i, &wi, &apply_outer(&o, &wo, &x, q), p);
        let inner_first = apply_outer(&o, &wo, &apply_inner(&i, &wi, &x, p), q);
        for (a, b) in outer_first.iter().zip(&inner_first) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn training_keeps_layer_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let e = parse("wr(S(3),C(4))");
    let mut layer = EquivariantLayer::<f64>::random(e, 2, 3, &mut rng).unwrap();
    layer.set_bias(Some(vec![0.0; 3])).unwrap();
    let x = Matrix::from_fn(12, 2, |_, _| rng.random_range(-1.0..1.0));
    let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
    let first = loss_ce(&layer.apply(&x).unwrap(), &labels).unwrap().0;
    for _ in 0..50 {
        let (_, g) = loss_ce(&layer.apply(&x).unwrap(), &labels).unwrap();
        let grads = layer.backward(&x, &g).unwrap();
        for (w, d) in layer.weights_mut().iter_mut().zip(&grads.weights) {
            *w -= 0.5 * d;
        }
        for (b, d) in layer
            .bias_mut()
            .unwrap()
            .iter_mut()
            .zip(grads.bias.as_ref().unwrap())
        {
            *b -= 0.5 * d;
        }
    }
    let last = loss_ce(&layer.apply(&x).unwrap(), &labels).unwrap().0;
    assert!(last < first);
    assert!(equivariance_check(&layer, 5, 3).unwrap().passed());
}

#[test]
fn zero_upstream_gradient_gives_zero_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let layer =
        EquivariantLayer::<f64>::random(parse("prod(S(2),wr(C(2),S(2)))"), 2, 2, &mut rng).unwrap();
    let x = Matrix::from_fn(8, 2, |_, _| rng.random_range(-1.0..1.0));
    let g = layer.backward(&x, &Matrix::zeros(8, 2)).unwrap();
    assert!(g.weights.iter().all(|v| *v == 0.0));
    assert!(g.input.is_zero());
}

#[test]
fn f32_and_f64_layers_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let e = parse("wr(S(3),S(4))");
    let l64 = EquivariantLayer::<f64>::random(e.clone(), 1, 1, &mut rng).unwrap();
    let l32 = EquivariantLayer::<f32>::new(
        e,
        1,
        1,
        l64.weights().iter().map(|w| *w as f32).collect(),
        None,
    )
    .unwrap();
    let x = Matrix::from_fn(12, 1, |_, _| rng.random_range(-1.0..1.0));
    let y64 = l64.apply(&x).unwrap();
    let y32 = l32.apply(&x.map(|v| *v as f32)).unwrap().map(|v| *v as f64);
    assert!(y32.max_abs_diff(&y64) < 1e-5);
}

#[test]
fn bias_is_added_on_both_paths() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut layer =
        EquivariantLayer::<f64>::random(parse("wr(C(3),S(2))"), 2, 2, &mut rng).unwrap();
    layer.set_bias(Some(vec![0.5, -1.5])).unwrap();
    let x = Matrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
    let fast = layer.apply(&x).unwrap();
    assert!(fast.rel_diff(&layer.apply_dense(&x).unwrap()) <= 1e-12);
}
