//! Dense-matrix primitives: row-wise softmax, matrix norms, exact (SVD-based)
//! and iterative pseudoinverses, eigen-spectra, and numerical rank.
//!
//! All operations are pure functions of their inputs; values may be freely
//! sent between threads. Nothing here spawns internal parallelism.

pub mod audit;
mod decomp;
mod dense;
mod pinv_iter;

pub use decomp::{NormKind, Spectrum, SvdFactors, PINV_DEFAULT_TOL, RANK_DEFAULT_TOL};
pub use dense::DenseMatrix;
pub use pinv_iter::{
    pinv_iterative, pinv_iterative_verified, pinv_iterative_with_start, scaled_transpose_start,
    IterativePinv, PinvMode, PINV_ITER_DEFAULT_MAX, PINV_ITER_DEFAULT_TOL,
};
