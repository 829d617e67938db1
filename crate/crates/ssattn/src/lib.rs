//! Linear-time approximation of softmax self-attention via landmark pooling
//! and sketched spectral shifting, next to the exact quadratic reference and
//! the plain Nystrom baseline it is measured against.
//!
//! The crate is organized around desk-scale verifiability: every approximate
//! pipeline has a materialized twin, every closed form has its least-squares
//! objective, and every claimed property (reduction to Nystrom at zero shift,
//! exactness on flat-tail SPSD instances, linear memory, linear runtime) is
//! checkable with the tools in [`analysis`] and the test suites.
//!
//! - [`matcore`]: dense row-major matrices, row softmax, norms, SVD-backed
//!   and iterative pseudoinverses, spectra, numerical rank.
//! - [`landmarks`]: segment-means pooling with zero-row padding.
//! - [`attention`]: the exact reference.
//! - [`nystrom`]: raw column reconstruction and the landmark three-softmax
//!   pipeline.
//! - [`spectral_shift`]: full and sketched shift closed forms, flat-tail SPSD
//!   generators, and the accuracy comparison against plain Nystrom.
//! - [`ss_attention`]: the shifted landmark pipeline, its materialized twin,
//!   and the SVD-form entry evaluator.
//! - [`analysis`]: error measurement, the error bound, spectrum reports, and
//!   the sequence-length scaling study.
//! - [`synth`]: seeded, reproducible input generation (ChaCha8).

pub mod analysis;
pub mod attention;
pub mod error;
pub mod landmarks;
pub mod matcore;
pub mod nystrom;
pub mod spectral_shift;
pub mod ss_attention;
pub mod synth;

pub use attention::AttentionProblem;
pub use error::{Error, Result};
pub use matcore::{DenseMatrix, NormKind, PinvMode};
pub use ss_attention::{DeltaMode, DiagShift, InnerForm, SsAttentionConfig};

/// Largest `n` for which `n x n` matrices are materialized by default
/// (4096^2 doubles is about 128 MB).
pub const DESK_SCALE_MAX_N: usize = 4096;

/// Version stamped into every JSON report this workspace emits.
pub const SCHEMA_VERSION: u32 = 1;
