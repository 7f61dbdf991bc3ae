//! Sparse operators, dense eigensolvers and small vector helpers.

mod dense;
mod lanczos;
mod sparse;
pub mod vec;

pub use dense::{eigh, eigvalsh, Eigenvectors, DENSE_LIMIT};
pub use lanczos::{lanczos_extremes, lanczos_lowest, LanczosOptions};
pub use sparse::{Csr, Scalar, SparseOp};
