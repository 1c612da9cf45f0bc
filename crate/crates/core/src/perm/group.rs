use std::collections::{HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::union_find::UnionFind;

use super::Permutation;

/// Default cap on the number of elements [`PermGroup::enumerate`] will produce.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 200_000;

/// Environment variable overriding [`DEFAULT_ENUMERATION_LIMIT`].
pub const MAX_ORDER_ENV: &str = "WREATHLIN_MAX_ORDER";

/// The enumeration limit, honouring `WREATHLIN_MAX_ORDER` when it parses as a
/// positive integer.
pub fn enumeration_limit() -> usize {
    std::env::var(MAX_ORDER_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(DEFAULT_ENUMERATION_LIMIT)
}

/// A finite permutation group given by generators. Elements are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct PermGroup {
    degree: usize,
    generators: Vec<Permutation>,
    label: String,
}

impl PermGroup {
    pub fn new(
        degree: usize,
        generators: Vec<Permutation>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidDegree(0));
        }
        let generators = if generators.is_empty() {
            vec![Permutation::identity(degree)?]
        } else {
            generators
        };
        for g in &generators {
            if g.degree() != degree {
                return Err(Error::DegreeMismatch {
                    left: degree,
                    right: g.degree(),
                });
            }
        }
        Ok(Self {
            degree,
            generators,
            label: label.into(),
        })
    }

    pub fn trivial(n: usize) -> Result<Self> {
        Self::new(n, vec![Permutation::identity(n)?], format!("trivial({n})"))
    }

    /// Regular action of the cyclic group: generated by `i -> (i + 1) mod n`.
    pub fn cyclic(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDegree(0));
        }
        let shift = Permutation::from_fn(n, |i| (i + 1) % n);
        Self::new(n, vec![shift], format!("C({n})"))
    }

    /// Natural action of the symmetric group, generated by `(0 1)` and the n-cycle.
    pub fn symmetric(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDegree(0));
        }
        let gens = if n == 1 {
            vec![Permutation::identity(1)?]
        } else {
            let swap = Permutation::from_fn(n, |i| match i {
                0 => 1,
                1 => 0,
                _ => i,
            });
            let cycle = Permutation::from_fn(n, |i| (i + 1) % n);
            if n == 2 {
                vec![swap]
            } else {
                vec![swap, cycle]
            }
        };
        Self::new(n, gens, format!("S({n})"))
    }

    /// `H × K` acting on `P × Q` componentwise; point `(p, q)` has index `p·Q + q`.
    pub fn direct_product(outer: &PermGroup, inner: &PermGroup) -> Result<Self> {
        let (pn, qn) = (outer.degree, inner.degree);
        let mut gens = Vec::new();
        for h in &outer.generators {
            gens.push(Permutation::from_fn(pn * qn, |i| {
                h.apply(i / qn) * qn + i % qn
            }));
        }
        for k in &inner.generators {
            gens.push(Permutation::from_fn(pn * qn, |i| {
                (i / qn) * qn + k.apply(i % qn)
            }));
        }
        Self::new(
            pn * qn,
            gens,
            format!("prod({},{})", outer.label, inner.label),
        )
    }

    /// Imprimitive action of `K ≀ H` on `P × Q` with the same indexing as
    /// [`PermGroup::direct_product`].
    ///
    /// Generators: every outer generator lifted to `(p, q) -> (h·p, q)`, plus every
    /// inner generator acting on one representative fiber of each `H`-orbit of `P`.
    /// The conjugates of those fibers under `H` supply every other fiber, so the
    /// result is the full wreath product of order `|K|^P · |H|`.
    pub fn wreath_product(inner: &PermGroup, outer: &PermGroup) -> Result<Self> {
        let (pn, qn) = (outer.degree, inner.degree);
        let mut gens = Vec::new();
        for h in &outer.generators {
            gens.push(Permutation::from_fn(pn * qn, |i| {
                h.apply(i / qn) * qn + i % qn
            }));
        }
        for rep in outer.orbit_representatives() {
            for k in &inner.generators {
                gens.push(Permutation::from_fn(pn * qn, |i| {
                    let (p, q) = (i / qn, i % qn);
                    if p == rep {
                        p * qn + k.apply(q)
                    } else {
                        i
                    }
                }));
            }
        }
        Self::new(
            pn * qn,
            gens,
            format!("wr({},{})", inner.label, outer.label),
        )
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn generators(&self) -> &[Permutation] {
        &self.generators
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Point orbit label of every point, numbered by first occurrence.
    pub fn point_orbits(&self) -> Vec<usize> {
        let mut uf = UnionFind::new(self.degree);
        for g in &self.generators {
            for i in 0..self.degree {
                uf.union(i, g.apply(i));
            }
        }
        uf.labels()
    }

    pub fn is_transitive(&self) -> bool {
        self.point_orbits().iter().all(|&o| o == 0)
    }

    /// Smallest point of every orbit.
    pub fn orbit_representatives(&self) -> Vec<usize> {
        let labels = self.point_orbits();
        let mut reps = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            if l == reps.len() {
                reps.push(i);
            }
        }
        reps
    }

    /// Breadth-first closure under left multiplication by generators, starting at the
    /// identity. Fails once more than `limit` elements have been found.
    pub fn enumerate(&self, limit: usize) -> Result<Vec<Permutation>> {
        if limit == 0 {
            return Err(Error::InvalidArgument("limit must be at least 1".into()));
        }
        let e = Permutation::identity(self.degree)?;
        let mut seen: HashSet<Permutation> = HashSet::new();
        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        seen.insert(e.clone());
        order.push(e.clone());
        queue.push_back(e);
        while let Some(x) = queue.pop_front() {
            for g in &self.generators {
                let y = g.compose(&x)?;
                if !seen.contains(&y) {
                    if order.len() >= limit {
                        return Err(Error::EnumerationLimitExceeded { limit });
                    }
                    seen.insert(y.clone());
                    order.push(y.clone());
                    queue.push_back(y);
                }
            }
        }
        Ok(order)
    }

    pub fn order(&self, limit: usize) -> Result<usize> {
        self.enumerate(limit).map(|v| v.len())
    }
}

/// Splits an element of the imprimitive action on `P × Q` into its outer permutation
/// `h` and fiber permutations `k`, such that `g·(p, q) = (h·p, k[h·p]·q)`.
/// Returns `None` when `g` does not preserve the block system of fibers.
#[allow(clippy::needless_range_loop)]
pub fn decompose_wreath_element(
    g: &Permutation,
    pn: usize,
    qn: usize,
) -> Option<(Permutation, Vec<Permutation>)> {
    if g.degree() != pn * qn {
        return None;
    }
    let mut h = vec![0; pn];
    let mut k = vec![vec![0; qn]; pn];
    for p in 0..pn {
        let target = g.apply(p * qn) / qn;
        h[p] = target;
        for q in 0..qn {
            let img = g.apply(p * qn + q);
            if img / qn != target {
                return None;
            }
            k[target][q] = img % qn;
        }
    }
    let h = Permutation::new(h).ok()?;
    let k = k
        .into_iter()
        .map(Permutation::new)
        .collect::<Result<Vec<_>>>()
        .ok()?;
    Some((h, k))
}
