//! Numerical laboratory for the L²-gradient flow of the length-penalized
//! elastic energy `½∫|κ⃗|² ds + λ L` on open curves in ℝ^d with clamped ends.
//!
//! * [`geometry`]: arc-length stencils, tangents, curvature, `∇_s`.
//! * [`energy`]: energies, gradients and the stationarity residual.
//! * [`variation`]: second variation, the linearized operator and its spectrum.
//! * [`flow`]: the semi-implicit clamped flow and its normal-graph variant.
//! * [`reparam`]: arc-length resampling, normal frames, normal-graph projection.
//! * [`diagnostics`]: Łojasiewicz exponent and convergence-rate fits.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod curves;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod par;
pub mod reparam;
pub mod variation;

#[cfg(test)]
mod test_support;

pub use error::{Error, Result};
pub use geometry::{DiscreteCurve, NormalField, VectorField};
pub use par::Exec;
