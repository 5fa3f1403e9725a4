//! Numerics for weighted symbol spaces on phase space: uniform grids and DFT
//! calculus, quantization kernels, Gaussian time-frequency norms, quadratic
//! complex transforms with their weights, and coherent-state decompositions.
//!
//! Everything is deterministic: fixed node orderings, serial reductions, and
//! seeded randomness in construction-time self checks.

#![forbid(unsafe_code)]

pub mod bargmann;
pub mod error;
pub mod fourier;
pub mod grid;
pub mod lattice;
pub mod order;
pub mod quadform;
pub mod rankone;
pub mod stft;
pub mod symplectic;
pub mod warn;
pub mod weyl;

pub use error::{CoreError, Result};
pub use grid::{AxisSpec, GridSamples, RealGrid, SampledFunction, SampledSymbol};
pub use warn::{Flagged, Warning};

/// Shorthand used throughout; matches the convention of the surrounding code base.
pub type C64 = num_complex::Complex64;

/// Lebesgue exponent tag shared by the Schur estimates and the weighted
/// transform-side norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PExponent {
    One,
    Two,
    Infinity,
}

impl PExponent {
    pub fn label(self) -> &'static str {
        match self {
            PExponent::One => "1",
            PExponent::Two => "2",
            PExponent::Infinity => "inf",
        }
    }
}
