//! Voxelized point clouds and the layers that respect their set-within-grid symmetry.

mod cloud;
mod conv;
mod layers;
mod segnet;
mod symmetry;
mod voxel;

pub use cloud::{format_predictions, synthetic_blobs, BlobConfig, PointCloud};
pub use conv::{conv3d_kernel_grad, conv3d_periodic, conv3d_periodic_adjoint, Kernel3};
pub use layers::{AttnPCLayer, Block, ParamGrads, SetPCLayer, WreathPCLayer};
pub use segnet::{argmax_rows, LayerKind, SegNet, SegNetConfig};
pub use symmetry::{hierarchy_check, move_rows, point_permutation_check, within_voxel_permutation};
pub use voxel::{voxelize, VoxelizedCloud};
