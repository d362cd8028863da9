//! Dense numeric primitives and the two-layer MLP every algorithm trains.

mod loss;
mod matrix;
mod mlp;
mod params;

pub use loss::{cross_entropy, cross_entropy_grad, log_softmax_row, softmax};
pub use matrix::Matrix;
pub use mlp::{Batch, Forward, MlpModel, MlpShape};
pub use params::{
    axpy, clip01, dot, hadamard, scale, sgd_step, sgd_step_in_place, sq_norm, Layout, ParamVector, Segment,
    SegmentGroup, SegmentMask,
};
