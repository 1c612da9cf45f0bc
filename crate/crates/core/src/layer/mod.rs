//! Multi-channel equivariant layers evaluated without materializing the weight matrix.

mod equivariance;
mod equivariant;
mod plan;

pub use equivariance::{
    check_equivariance, equivariance_check, ChannelMap, EquivarianceReport, GeneratorResidual,
    PatternLayer, Stack, EQUIVARIANCE_TOLERANCE,
};
pub use equivariant::{EquivariantLayer, LayerGrads};
pub use plan::Plan;

use crate::error::Result;
use crate::perm::PermGroup;
use crate::structure::StructureExpr;

pub fn group_of(expr: &StructureExpr) -> Result<PermGroup> {
    expr.group()
}

pub fn param_count(expr: &StructureExpr) -> usize {
    expr.param_count()
}
