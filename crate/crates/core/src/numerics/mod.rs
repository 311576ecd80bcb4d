//! Dense linear algebra and seeded randomness.

mod matrix;
mod rng;

pub use matrix::{axpy, dot, frobenius_dot, matmul, Matrix2D};
pub(crate) use matrix::{matmul_rows_into, matmul_rows_transposed_into};
pub use rng::{sample_batch, SeededRng};
