//! Losses, gradient checks and a small SGD loop for the point-cloud networks.

mod ablation;
mod gradcheck;
mod loss;
mod sgd;

pub use ablation::{run_ablation, AblationConfig, AblationOutcome, AblationRun};
pub use gradcheck::{
    gradcheck, layer_gradcheck, rel_error, segnet_gradcheck, GradReport, TensorError, FD_STEP,
};
pub use loss::{accuracy, loss_ce};
pub use sgd::{evaluate, sgd_train, Sample, TraceRow, TrainConfig, TrainTrace};
