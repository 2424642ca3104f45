//! Seeded random streams with the samplers built on them, plus a small dense matrix.

mod matrix;
mod rng;
mod sample;

pub use matrix::{relu_inplace, softmax_row, softmax_rows, Matrix};
pub use rng::RngState;
pub use sample::{beta_sample, gamma_sample, gaussian_sample, standard_normal};
