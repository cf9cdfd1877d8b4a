//! Dense and sparse kernels, seeded randomness and the Adam optimizer.
//!
//! Everything here is deterministic: identical inputs and seeds produce
//! bit-identical outputs. Storage on disk is `f32`; all arithmetic is `f64`.

mod adam;
mod dense;
mod rng;
mod sparse;

pub use adam::{adam_step, dropout_mask, AdamState, DropoutMask};
pub use dense::{dot, norm, normalized, relu, sigmoid, softmax, DenseMatrix};
pub use rng::{derive_seed, Rng};
pub use sparse::{spmm, spmm_transpose, SparseMatrix};
