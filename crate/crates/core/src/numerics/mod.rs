//! Deterministic differentiable-numerics substrate: dense arrays,
//! forward/backward primitives with hand-derived gradients, Adam, a Jacobi
//! eigensolver, a naive DFT, and a fully specified PRNG.
//!
//! Everything is 64-bit and seed-deterministic; all randomness flows through
//! [`RngState`].

pub mod activation;
pub mod adam;
pub mod array;
pub mod batchnorm;
pub mod conv;
pub mod dft;
pub mod eig;
pub mod embedding;
pub mod gradcheck;
pub mod linear;
pub mod loss;
pub mod mlp;
pub mod rng;

pub use activation::Activation;
pub use adam::{adam_step, AdamConfig, Parameter};
pub use array::Array;
pub use batchnorm::BatchNorm1d;
pub use conv::Conv1d;
pub use dft::{dft, dft_rows, Spectrum};
pub use eig::{symmetric_eig, symmetric_sqrt};
pub use embedding::{embedding_lookup, EmbeddingTable};
pub use linear::{matmul, matmul_backward, Linear};
pub use mlp::{Mlp, MlpCache};
pub use rng::RngState;
