use crate::error::Result;
use crate::perm::PermGroup;
use crate::union_find::UnionFind;

use super::SharingPattern;

/// Orbits of index pairs `(i, j) ~ (g·i, g·j)` under the generators, by union-find.
/// Never enumerates the group.
pub fn orbit_pattern(group: &PermGroup) -> SharingPattern {
    let n = group.degree();
    let mut uf = UnionFind::new(n * n);
    for g in group.generators() {
        for i in 0..n {
            let gi = g.apply(i);
            for j in 0..n {
                uf.union(i * n + j, gi * n + g.apply(j));
            }
        }
    }
    let labels = uf.labels();
    SharingPattern::from_key_fn(n, n * n, |i, j| labels[i * n + j])
}

/// Number of pair orbits via Burnside's lemma: the mean over all group elements of
/// `fix(g)²`, where `fix(g) = trace(Π(g))`.
pub fn burnside_count(group: &PermGroup, limit: usize) -> Result<u64> {
    let elements = group.enumerate(limit)?;
    let total: u128 = elements
        .iter()
        .map(|g| {
            let f = g.fixed_points() as u128;
            f * f
        })
        .sum();
    let order = elements.len() as u128;
    debug_assert_eq!(total % order, 0, "Burnside sum must divide the group order");
    Ok((total / order) as u64)
}
