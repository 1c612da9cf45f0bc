#![allow(dead_code)]

use rand::Rng;
use wreathlin::StructureExpr;

/// Structures covering every expression shape, all with degree ≤ 24 and group order ≤ 200 000.
pub const AGREEMENT_SHAPES: &[&str] = &[
    "S(4)",
    "C(5)",
    "trivial(3)",
    "prod(S(3),S(4))",
    "prod(C(4),C(3))",
    "prod(S(2),trivial(2))",
    "wr(S(4),S(3))",
    "wr(C(3),C(4))",
    "wr(S(3),C(4))",
    "wr(C(3),S(4))",
    "wr(trivial(2),S(3))",
    "wr(wr(S(2),C(2)),C(2))",
    "wr(prod(C(2),C(2)),prod(S(2),S(2)))",
    "prod(C(2),wr(S(2),S(3)))",
    "wr(S(2),prod(C(2),C(3)))",
    "wr(C(2),C(12))",
];

fn primitive(rng: &mut impl Rng, max_degree: usize) -> StructureExpr {
    let n = rng.random_range(1..=max_degree.clamp(1, 6));
    match rng.random_range(0..3) {
        0 => StructureExpr::Set(n),
        1 => StructureExpr::Cycle(n),
        _ => StructureExpr::Trivial(n),
    }
}

/// A random expression of degree at most `max_degree`.
pub fn random_structure(rng: &mut impl Rng, max_degree: usize, depth: usize) -> StructureExpr {
    if depth == 0 || max_degree < 4 || rng.random_bool(0.3) {
        return primitive(rng, max_degree);
    }
    let left = random_structure(rng, max_degree / 2, depth - 1);
    let right = random_structure(rng, max_degree / left.degree(), depth - 1);
    if rng.random_bool(0.5) {
        StructureExpr::prod(left, right)
    } else {
        StructureExpr::wreath(left, right)
    }
}
