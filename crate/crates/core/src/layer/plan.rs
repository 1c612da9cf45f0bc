//! Matrix-free evaluation of an equivariant map over a structure tree.
//!
//! Every node numbers its orbits structurally ("raw" ids) so that the map can be
//! applied recursively without the `N × N` pattern. [`Plan`] relates raw ids to the
//! canonical ids of [`crate::basis::pattern_of_structure`] through each orbit's first
//! row-major occurrence, which is itself computed recursively.

use crate::scalar::Scalar;
use crate::structure::StructureExpr;

#[derive(Debug, Clone)]
pub(crate) enum Node {
    Set(usize),
    Cycle(usize),
    Trivial(usize),
    Prod { outer: Box<Node>, inner: Box<Node> },
    Wreath(Box<WreathNode>),
}

#[derive(Debug, Clone)]
pub(crate) struct WreathNode {
    inner: Node,
    outer: Node,
    /// dense index of every inner point orbit, per inner point
    inner_point: Vec<usize>,
    /// inner points of every inner point orbit, ascending
    inner_members: Vec<Vec<usize>>,
    /// outer raw id -> index among off-diagonal outer orbits
    off_index: Vec<Option<usize>>,
    /// outer raw id -> index among diagonal outer orbits
    diag_index: Vec<Option<usize>>,
    off_ids: Vec<usize>,
    diag_ids: Vec<usize>,
}

impl WreathNode {
    fn point_orbits(&self) -> usize {
        self.inner_members.len()
    }

    fn off_count(&self) -> usize {
        let s = self.point_orbits();
        self.off_ids.len() * s * s
    }

    fn off_raw(&self, a: usize, s: usize, t: usize) -> usize {
        let so = self.point_orbits();
        (self.off_index[a].expect("off-diagonal orbit") * so + s) * so + t
    }

    fn diag_raw(&self, d: usize, b: usize) -> usize {
        self.off_count() + self.diag_index[d].expect("diagonal orbit") * self.inner.num_orbits() + b
    }
}

impl Node {
    pub(crate) fn build(expr: &StructureExpr) -> Node {
        match expr {
            StructureExpr::Set(n) => Node::Set(*n),
            StructureExpr::Cycle(n) => Node::Cycle(*n),
            StructureExpr::Trivial(n) => Node::Trivial(*n),
            StructureExpr::Prod { outer, inner } => Node::Prod {
                outer: Box::new(Node::build(outer)),
                inner: Box::new(Node::build(inner)),
            },
            StructureExpr::Wreath { inner, outer } => {
                let inner = Node::build(inner);
                let outer = Node::build(outer);
                let qn = inner.degree();
                let mut remap = vec![usize::MAX; inner.num_orbits()];
                let mut inner_members: Vec<Vec<usize>> = Vec::new();
                let inner_point = (0..qn)
                    .map(|q| {
                        let d = inner.raw_id(q, q);
                        if remap[d] == usize::MAX {
                            remap[d] = inner_members.len();
                            inner_members.push(Vec::new());
                        }
                        inner_members[remap[d]].push(q);
                        remap[d]
                    })
                    .collect();
                let ho = outer.num_orbits();
                let mut off_index = vec![None; ho];
                let mut diag_index = vec![None; ho];
                let (mut off_ids, mut diag_ids) = (Vec::new(), Vec::new());
                for a in 0..ho {
                    if outer.is_diagonal(a) {
                        diag_index[a] = Some(diag_ids.len());
                        diag_ids.push(a);
                    } else {
                        off_index[a] = Some(off_ids.len());
                        off_ids.push(a);
                    }
                }
                Node::Wreath(Box::new(WreathNode {
                    inner,
                    outer,
                    inner_point,
                    inner_members,
                    off_index,
                    diag_index,
                    off_ids,
                    diag_ids,
                }))
            }
        }
    }

    pub(crate) fn degree(&self) -> usize {
        match self {
            Node::Set(n) | Node::Cycle(n) | Node::Trivial(n) => *n,
            Node::Prod { outer, inner } => outer.degree() * inner.degree(),
            Node::Wreath(w) => w.outer.degree() * w.inner.degree(),
        }
    }

    pub(crate) fn num_orbits(&self) -> usize {
        match self {
            Node::Set(1) => 1,
            Node::Set(_) => 2,
            Node::Cycle(n) => *n,
            Node::Trivial(n) => n * n,
            Node::Prod { outer, inner } => outer.num_orbits() * inner.num_orbits(),
            Node::Wreath(w) => w.off_count() + w.diag_ids.len() * w.inner.num_orbits(),
        }
    }

    /// Raw orbit id of the pair `(i, j)`.
    pub(crate) fn raw_id(&self, i: usize, j: usize) -> usize {
        match self {
            Node::Set(1) => 0,
            Node::Set(_) => usize::from(i != j),
            Node::Cycle(n) => (j + n - i) % n,
            Node::Trivial(n) => i * n + j,
            Node::Prod { outer, inner } => {
                let qn = inner.degree();
                outer.raw_id(i / qn, j / qn) * inner.num_orbits() + inner.raw_id(i % qn, j % qn)
            }
            Node::Wreath(w) => {
                let qn = w.inner.degree();
                let (p, q, pp, qq) = (i / qn, i % qn, j / qn, j % qn);
                if p != pp {
                    w.off_raw(w.outer.raw_id(p, pp), w.inner_point[q], w.inner_point[qq])
                } else {
                    w.diag_raw(w.outer.raw_id(p, p), w.inner.raw_id(q, qq))
                }
            }
        }
    }

    /// First `(row, col)` in row-major order that belongs to raw orbit `r`.
    pub(crate) fn first(&self, r: usize) -> (usize, usize) {
        match self {
            Node::Set(_) => (0, r),
            Node::Cycle(_) => (0, r),
            Node::Trivial(n) => (r / n, r % n),
            Node::Prod { outer, inner } => {
                let (ko, qn) = (inner.num_orbits(), inner.degree());
                let (p, pp) = outer.first(r / ko);
                let (q, qq) = inner.first(r % ko);
                (p * qn + q, pp * qn + qq)
            }
            Node::Wreath(w) => {
                let qn = w.inner.degree();
                let s = w.point_orbits();
                if r < w.off_count() {
                    let (a, st) = (w.off_ids[r / (s * s)], r % (s * s));
                    let (p, pp) = w.outer.first(a);
                    let q = w.inner_members[st / s][0];
                    let qq = w.inner_members[st % s][0];
                    (p * qn + q, pp * qn + qq)
                } else {
                    let r = r - w.off_count();
                    let ko = w.inner.num_orbits();
                    let (p, _) = w.outer.first(w.diag_ids[r / ko]);
                    let (q, qq) = w.inner.first(r % ko);
                    (p * qn + q, p * qn + qq)
                }
            }
        }
    }

    /// Diagonal orbits contain only pairs `(i, i)`; every other orbit has none.
    fn is_diagonal(&self, r: usize) -> bool {
        let (i, j) = self.first(r);
        i == j
    }

    /// `out += W(w) x`, with `w` indexed by raw orbit id.
    pub(crate) fn apply<T: Scalar>(&self, x: &[T], w: &[T], out: &mut [T]) {
        debug_assert_eq!(w.len(), self.num_orbits());
        match self {
            Node::Set(1) => out[0] = out[0].clone() + w[0].clone() * x[0].clone(),
            Node::Set(_) => {
                let total = x.iter().cloned().fold(T::zero(), |a, b| a + b);
                let diag = w[0].clone() - w[1].clone();
                let pooled = w[1].clone() * total;
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = o.clone() + diag.clone() * xi.clone() + pooled.clone();
                }
            }
            Node::Cycle(n) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = T::zero();
                    for (j, xj) in x.iter().enumerate() {
                        acc = acc + w[(j + n - i) % n].clone() * xj.clone();
                    }
                    *o = o.clone() + acc;
                }
            }
            Node::Trivial(n) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = T::zero();
                    for (j, xj) in x.iter().enumerate() {
                        acc = acc + w[i * n + j].clone() * xj.clone();
                    }
                    *o = o.clone() + acc;
                }
            }
            Node::Prod { outer, inner } => {
                let (pn, qn) = (outer.degree(), inner.degree());
                let ko = inner.num_orbits();
                let mut unit = vec![T::zero(); outer.num_orbits()];
                let mut z = vec![T::zero(); pn * qn];
                let mut col = vec![T::zero(); pn];
                let mut col_out = vec![T::zero(); pn];
                for a in 0..outer.num_orbits() {
                    let wa = &w[a * ko..(a + 1) * ko];
                    if wa.iter().all(|v| v.is_zero()) {
                        continue;
                    }
                    z.iter_mut().for_each(|v| *v = T::zero());
                    for p in 0..pn {
                        inner.apply(&x[p * qn..(p + 1) * qn], wa, &mut z[p * qn..(p + 1) * qn]);
                    }
                    unit[a] = T::one();
                    for q in 0..qn {
                        for p in 0..pn {
                            col[p] = z[p * qn + q].clone();
                            col_out[p] = T::zero();
                        }
                        outer.apply(&col, &unit, &mut col_out);
                        for p in 0..pn {
                            out[p * qn + q] = out[p * qn + q].clone() + col_out[p].clone();
                        }
                    }
                    unit[a] = T::zero();
                }
            }
            Node::Wreath(wn) => wn.apply(x, w, out),
        }
    }
}

impl WreathNode {
    /// Pool over each fiber, apply the outer map, broadcast back; plus the inner map
    /// on every fiber.
    fn apply<T: Scalar>(&self, x: &[T], w: &[T], out: &mut [T]) {
        let (pn, qn) = (self.outer.degree(), self.inner.degree());
        let ho = self.outer.num_orbits();
        let so = self.point_orbits();
        // pooled[t][p] = Σ_{q ∈ t} x[p, q]
        let pooled: Vec<Vec<T>> = self
            .inner_members
            .iter()
            .map(|members| {
                (0..pn)
                    .map(|p| {
                        members
                            .iter()
                            .fold(T::zero(), |acc, &q| acc + x[p * qn + q].clone())
                    })
                    .collect()
            })
            .collect();
        let mut w_outer = vec![T::zero(); ho];
        let mut v = vec![T::zero(); pn];
        for s in 0..so {
            v.iter_mut().for_each(|e| *e = T::zero());
            for (t, u) in pooled.iter().enumerate() {
                for &a in &self.off_ids {
                    w_outer[a] = w[self.off_raw(a, s, t)].clone();
                }
                self.outer.apply(u, &w_outer, &mut v);
            }
            for p in 0..pn {
                for &q in &self.inner_members[s] {
                    out[p * qn + q] = out[p * qn + q].clone() + v[p].clone();
                }
            }
        }
        let ko = self.inner.num_orbits();
        let per_diag: Vec<&[T]> = self
            .diag_ids
            .iter()
            .map(|&d| {
                let start = self.diag_raw(d, 0);
                &w[start..start + ko]
            })
            .collect();
        for p in 0..pn {
            let d = self.diag_index[self.outer.raw_id(p, p)].expect("diagonal orbit");
            self.inner.apply(
                &x[p * qn..(p + 1) * qn],
                per_diag[d],
                &mut out[p * qn..(p + 1) * qn],
            );
        }
    }
}

/// A structure's matrix-free evaluator plus the raw ↔ canonical orbit correspondence.
#[derive(Debug, Clone)]
pub struct Plan {
    root: Node,
    canon_to_raw: Vec<usize>,
    raw_to_canon: Vec<usize>,
    raw_transpose: Vec<usize>,
}

impl Plan {
    pub fn new(expr: &StructureExpr) -> Self {
        let root = Node::build(expr);
        let k = root.num_orbits();
        let firsts: Vec<(usize, usize)> = (0..k).map(|r| root.first(r)).collect();
        let mut canon_to_raw: Vec<usize> = (0..k).collect();
        canon_to_raw.sort_by_key(|&r| firsts[r]);
        let mut raw_to_canon = vec![0; k];
        for (c, &r) in canon_to_raw.iter().enumerate() {
            raw_to_canon[r] = c;
        }
        let raw_transpose = firsts.iter().map(|&(i, j)| root.raw_id(j, i)).collect();
        Self {
            root,
            canon_to_raw,
            raw_to_canon,
            raw_transpose,
        }
    }

    pub fn degree(&self) -> usize {
        self.root.degree()
    }

    pub fn num_orbits(&self) -> usize {
        self.canon_to_raw.len()
    }

    /// Canonical orbit id of entry `(i, j)`.
    pub fn orbit_of(&self, i: usize, j: usize) -> usize {
        self.raw_to_canon[self.root.raw_id(i, j)]
    }

    /// Canonical id of the transposed orbit.
    pub fn transpose_orbit(&self, canonical: usize) -> usize {
        self.raw_to_canon[self.raw_transpose[self.canon_to_raw[canonical]]]
    }

    /// `out += W x` for canonical weights, without materializing `W`.
    pub fn apply_into<T: Scalar>(&self, x: &[T], canonical_weights: &[T], out: &mut [T]) {
        let raw: Vec<T> = self.canon_to_raw.iter().enumerate().fold(
            vec![T::zero(); self.num_orbits()],
            |mut acc, (c, &r)| {
                acc[r] = canonical_weights[c].clone();
                acc
            },
        );
        self.apply_raw_into(x, &raw, out);
    }

    pub(crate) fn raw_index(&self, canonical: usize) -> usize {
        self.canon_to_raw[canonical]
    }

    pub(crate) fn apply_raw_into<T: Scalar>(&self, x: &[T], raw_weights: &[T], out: &mut [T]) {
        self.root.apply(x, raw_weights, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::pattern_of_structure;

    const SHAPES: &[&str] = &[
        "S(1)",
        "S(4)",
        "C(5)",
        "trivial(3)",
        "prod(C(3),S(2))",
        "wr(S(3),C(4))",
        "wr(C(3),S(2))",
        "wr(trivial(2),S(3))",
        "wr(C(2),trivial(3))",
        "wr(wr(S(2),C(2)),C(2))",
        "prod(wr(S(2),C(3)),trivial(2))",
        "wr(prod(C(2),C(2)),prod(S(2),S(2)))",
    ];

    #[test]
    fn plan_orbits_match_closed_form_pattern() {
        for s in SHAPES {
            let e = StructureExpr::parse(s).unwrap();
            let pat = pattern_of_structure(&e).unwrap();
            let plan = Plan::new(&e);
            assert_eq!(plan.num_orbits(), pat.num_orbits(), "{s}");
            for i in 0..pat.n() {
                for j in 0..pat.n() {
                    assert_eq!(plan.orbit_of(i, j), pat.get(i, j), "{s} at ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn transpose_orbits() {
        for s in SHAPES {
            let e = StructureExpr::parse(s).unwrap();
            let pat = pattern_of_structure(&e).unwrap();
            let plan = Plan::new(&e);
            for i in 0..pat.n() {
                for j in 0..pat.n() {
                    assert_eq!(plan.transpose_orbit(pat.get(i, j)), pat.get(j, i), "{s}");
                }
            }
        }
    }

    #[test]
    fn unit_impulse_gives_materialized_column() {
        let e = StructureExpr::parse("wr(C(2),C(2))").unwrap();
        let pat = pattern_of_structure(&e).unwrap();
        let plan = Plan::new(&e);
        let w: Vec<i64> = (0..pat.num_orbits() as i64).map(|v| 3 * v + 1).collect();
        let dense = pat.materialize(&w).unwrap();
        for j in 0..4 {
            let mut x = vec![0i64; 4];
            x[j] = 1;
            let mut y = vec![0i64; 4];
            plan.apply_into(&x, &w, &mut y);
            assert_eq!(y, dense.column(j));
        }
    }
}
