//! Linear maps equivariant to hierarchical (wreath-product) and product
//! (direct-product) symmetries of finite permutation groups.

pub mod basis;
pub mod error;
pub mod layer;
pub mod matrix;
pub mod perm;
pub mod pointcloud;
pub mod scalar;
pub mod structure;
pub mod train;
pub mod union_find;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::{Field, Real, Scalar};
pub use structure::StructureExpr;

pub type Rational = num_rational::BigRational;
pub type RationalMatrix = Matrix<Rational>;
pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Layer64 = layer::EquivariantLayer<f64>;
pub type Layer32 = layer::EquivariantLayer<f32>;
pub type SegNet64 = pointcloud::SegNet<f64>;
