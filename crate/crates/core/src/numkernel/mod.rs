//! Deterministic double-precision kernels shared by every other module.
//!
//! The random source is ChaCha8 (`rand_chacha`), keyed by a 64-bit seed and
//! a 64-bit stream id. ChaCha output is specified bit-for-bit, so a given
//! `(seed, stream_id)` produces the same samples on every platform.

mod linalg;
mod matrix;
mod rng;

pub use linalg::{
    cholesky, inverse_hpd, logdet_psd, solve, spectral_norm, symmetric_eigen,
    SPECTRAL_NORM_MAX_ITERS,
};
pub use matrix::{dot_conj, norm_sq, ComplexMatrix, Matrix, RealMatrix, Scalar};
pub use rng::{sample_complex_gaussian, RngStream};
