//! Dense numeric kernel: matrices, affine layers, activations, softmax
//! cross-entropy, cosine similarity, Adam and a finite-difference checker.

mod adam;
mod gradcheck;
mod matrix;
mod ops;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{finite_diff_check, DEFAULT_FD_STEP};
pub use matrix::{dot, norm, Matrix};
pub use ops::{
    activation_apply, affine_apply, affine_backward, affine_backward_accumulate, argmax,
    cosine_grad, cosine_similarity, softmax_cross_entropy, Activation, AffineGrads, NORM_EPS,
};
