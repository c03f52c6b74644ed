//! Extended-precision solver for the quartic oscillator and double well
//! H = -d²/dx² + a x² + 2x⁴.
//!
//! Trial functions that interpolate the small- and large-|x| behaviour of
//! the phase serve as the zeroth order of a logarithmic (Riccati)
//! perturbation theory. The variational energy is its first-order sum and
//! higher corrections refine it; an independent shooting solver checks the
//! results and the one-instanton series gives the asymptotic level splitting.

pub mod analysis;
pub mod error;
pub mod instanton;
pub mod model;
pub mod num;
pub mod pt;
pub mod quad;
pub mod reference;
pub mod trial;
pub mod varopt;

pub use error::{Error, Result};
pub use model::{OscillatorParams, Parity, TrialParams};
pub use num::{BigReal, Precision};

// Linked directly only to select the system GMP/MPFR build for rug.
use gmp_mpfr_sys as _;
