//! Parameter-sharing patterns of equivariant linear maps, computed three independent
//! ways: generator orbit closure, closed forms over the structure tree, and the exact
//! commutant nullspace. Burnside's lemma supplies a fourth count.

mod closed_form;
mod commutant;
mod orbit;
mod pattern;

pub use closed_form::{kron_pattern, pattern_of_structure, wreath_pattern};
pub use commutant::{
    commutant_basis, commutant_basis_with_limit, nullspace, projection_residual, CommutantBasis,
    SparseRow, DEFAULT_COMMUTANT_MAX_DEGREE,
};
pub use orbit::{burnside_count, orbit_pattern};
pub use pattern::SharingPattern;
