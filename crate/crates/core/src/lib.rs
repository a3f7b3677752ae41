//! Contraction functionals of the binary-tree Green's function recursion on
//! the upper half-plane, the blow-up coordinates used to study them near the
//! boundary, and numerical verification of their identities and bounds.

// negated comparisons are how NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod blowup;
pub mod error;
pub mod halfplane;
pub mod recursion;
pub mod report;
pub mod treesim;
pub mod verify;

pub use error::{Error, Result};
pub use halfplane::{ExtendedPoint, SpectralParam, SpectralRegion, C64};
