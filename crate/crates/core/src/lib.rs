//! Complex-parameter harmonic oscillator in a two-basis (biorthogonal) Fock
//! formalism.
//!
//! The crate is organised bottom-up:
//!
//! * [`params`] validates complex `(m, ω)` and classifies the phase diagram,
//! * [`cfx`] holds the smeared complex delta function and contour quadrature,
//! * [`fock`] builds truncated operator matrices in `|n⟩₁` coordinates, where
//!   the metric inner product `I_Q` is the plain dot product,
//! * [`position`] evaluates wavefunctions and checks dual normalization by
//!   quadrature on rotated contours,
//! * [`dynamics`] propagates the initial/final states and computes weak values,
//! * [`maxprin`] maximizes the transition amplitude over normalized boundary
//!   states,
//! * [`cli`] is the command-line front end.

pub mod cfx;
pub mod cli;
pub mod dynamics;
mod error;
pub mod fock;
pub mod maxprin;
pub mod params;
pub mod position;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
