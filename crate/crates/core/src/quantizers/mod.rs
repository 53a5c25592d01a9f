//! Quantizers for the two feedback streams: scalar coefficient coders and
//! Grassmannian RVQ for the eigenvector basis.

pub mod basis;
pub mod coeffs;
pub mod rvq;
pub mod scalar;

pub use basis::{quantize_basis, quantize_dominant, QuantizedBasis};
pub use coeffs::{quantize_coeffs, CoefficientCoder, CoefficientCodeword};
pub use rvq::{rvq_codebook, rvq_expected_chordal, rvq_quantize, GrassmannCodebook};
pub use scalar::{
    empirical_entropy, lloyd_max_design, DitheredUniform, LloydMaxQuantizer, QuantizerKind, ScalarQuantizer,
};
