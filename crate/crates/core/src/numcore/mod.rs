//! Dense matrices, a reverse-mode tape, and AdaGrad.

mod adagrad;
pub mod gradcheck;
mod matrix;
mod tape;

pub use adagrad::{AdaGradState, DEFAULT_EPSILON};
pub use matrix::{affine, max_pool_columns, softmax_row, tanh_map, Matrix};
pub use tape::{Gradients, NodeId, Tape};
