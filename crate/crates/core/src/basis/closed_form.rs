use crate::error::Result;
use crate::structure::StructureExpr;

use super::{orbit_pattern, SharingPattern};

/// Pattern of `W_H ⊗ W_K`: entry `((p,q),(p',q'))` is labeled by the pair of the
/// outer id at `(p,p')` and the inner id at `(q,q')`.
pub fn kron_pattern(outer: &SharingPattern, inner: &SharingPattern) -> SharingPattern {
    let (pn, qn) = (outer.n(), inner.n());
    let ko = inner.num_orbits();
    SharingPattern::from_key_fn(pn * qn, outer.num_orbits() * ko, |i, j| {
        outer.get(i / qn, j / qn) * ko + inner.get(i % qn, j % qn)
    })
}

/// Pattern of `W_H ⊗ 1 1ᵀ + I_P ⊗ W_K` for the imprimitive wreath action.
///
/// Off-diagonal blocks `p ≠ p'` carry the outer id of `(p, p')`, refined by the inner
/// point orbits of `q` and `q'` (a no-op when the inner action is transitive).
/// Diagonal block `p` carries the inner pattern, refined by the outer orbit of
/// `(p, p)` (a no-op when the outer action is transitive). For transitive factors
/// the orbit count is `outer + inner − 1`: the outer diagonal orbit and the inner
/// all-ones direction merge into one.
pub fn wreath_pattern(outer: &SharingPattern, inner: &SharingPattern) -> SharingPattern {
    let (pn, qn) = (outer.n(), inner.n());
    let (ho, ko) = (outer.num_orbits(), inner.num_orbits());
    let (inner_points, s) = inner.point_orbits();
    let off_range = ho * s * s;
    SharingPattern::from_key_fn(pn * qn, off_range + ho * ko, |i, j| {
        let (p, q, pp, qq) = (i / qn, i % qn, j / qn, j % qn);
        if p != pp {
            (outer.get(p, pp) * s + inner_points[q]) * s + inner_points[qq]
        } else {
            off_range + outer.get(p, p) * ko + inner.get(q, qq)
        }
    })
}

/// Closed-form pattern of a structure, evaluated recursively: primitives from their
/// group's pair orbits, `prod` by [`kron_pattern`], `wr` by [`wreath_pattern`].
pub fn pattern_of_structure(expr: &StructureExpr) -> Result<SharingPattern> {
    Ok(match expr {
        StructureExpr::Set(_) | StructureExpr::Cycle(_) | StructureExpr::Trivial(_) => {
            orbit_pattern(&expr.group()?)
        }
        StructureExpr::Prod { outer, inner } => {
            kron_pattern(&pattern_of_structure(outer)?, &pattern_of_structure(inner)?)
        }
        StructureExpr::Wreath { inner, outer } => {
            wreath_pattern(&pattern_of_structure(outer)?, &pattern_of_structure(inner)?)
        }
    })
}
