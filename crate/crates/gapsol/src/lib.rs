//! Computer-assisted existence proofs for gap solitons of
//! `u'' + (a − b cos 2x) u − c u³ = 0`.
//!
//! The proof runs three Newton–Kantorovich stages with rigorous interval
//! bounds: the stable Floquet bundle of the linearisation, a parameterisation
//! of the local stable manifold of the zero solution, and a Chebyshev
//! boundary-value problem that connects the manifold back to the symmetry
//! section `u'(0) = 0`.

// Negated float comparisons are deliberate: they send NaN down the failure
// path. Index loops mirror the coefficient formulas they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bundle;
pub mod bvp;
pub mod certify;
pub mod dense;
pub mod error;
pub mod interval;
pub mod manifold;
pub mod numerics;
pub mod operators;
pub mod pipeline;
pub mod seqspace;
pub mod serial;

pub use error::{Error, Result};
