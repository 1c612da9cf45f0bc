//! Permutations, permutation groups given by generators, and the direct-product and
//! imprimitive wreath-product constructions.

mod group;
mod permutation;

pub use group::{
    decompose_wreath_element, enumeration_limit, PermGroup, DEFAULT_ENUMERATION_LIMIT,
    MAX_ORDER_ENV,
};
pub use permutation::Permutation;
