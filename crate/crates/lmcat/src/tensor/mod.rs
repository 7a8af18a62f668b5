//! Minimal dense-tensor numerical core with reverse-mode gradients.
//!
//! Execution is single-threaded per graph; batch evaluation may fan out
//! across workers as long as the final reduction order stays fixed, which is
//! what the training loops do. Tensors are plain values and safe to share
//! read-only between threads.

mod dense;
mod graph;
pub(crate) mod kernels;

pub use dense::{check_same_shape, Scalar, Tensor};
pub use graph::{Graph, Var};
