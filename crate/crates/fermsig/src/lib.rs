//! Dirac-mode dynamics on de Sitter spacetime, the per-mode fermionic
//! signature operator and the maximally symmetric two-point scalars.
//!
//! The crate is organized along the pipeline
//!
//! * [`special`] — complex log-Gamma and the Gauss hypergeometric function
//!   with the connection formulas the closed-form solutions need,
//! * [`modes`] — the separated Dirac-mode ODE systems in cosmological,
//!   conformal and closed-slicing time, an adaptive Runge-Kutta 5(4)
//!   integrator with dense output, and the explicit spatial spinor basis,
//! * [`exact`] — hypergeometric closed-form solutions of the closed-slicing
//!   mode equation, their boundary asymptotics and asymptotic-coefficient
//!   extraction for both slicings,
//! * [`signature`] — assembly of the signature operator per mode (numeric
//!   and closed form), spectral projection, boundary terms and the
//!   mass-smearing decay study,
//! * [`hadamard`] — the maximally symmetric two-point scalar coefficients
//!   and their short-distance singularity exponents.
//!
//! All public operations are pure functions of their inputs and safe to call
//! concurrently.

pub mod exact;
pub mod hadamard;
pub mod modes;
pub mod report;
pub mod signature;
pub mod special;

pub use num_complex::Complex64;

/// Formats a float with 17 significant digits in scientific notation.
///
/// This is the exchange format of every CSV/JSON data file emitted by the
/// crate; it round-trips `f64` bit-exactly and is locale independent.
pub fn fmt_g17(x: f64) -> String {
    format!("{:.16e}", x)
}
