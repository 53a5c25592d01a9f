//! Transform coding of channel state information with a separately fed-back
//! eigenbasis.
//!
//! The pipeline: a Kronecker covariance gives the KLT basis and spectrum
//! ([`channel`]); reverse water-filling allocates coefficient bits ([`rwf`]);
//! coefficients are scalar-quantized and dominant basis columns are
//! RVQ-quantized ([`quantizers`]); the end-to-end error under the resulting
//! basis mismatch is modeled and measured ([`mismatch`]); the total budget
//! is split between the two streams ([`ratesplit`]); and [`harness`] runs
//! complete sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod channel;
pub mod error;
pub mod harness;
pub mod mismatch;
pub mod numeric;
pub mod quantizers;
pub mod ratesplit;
pub mod rng;
pub mod rwf;

pub use error::{Error, Result};
