//! Numerical toolkit for conformally invariant functionals on the round
//! 2-sphere: stereographic geometry, spherical harmonics, the Möbius group
//! and its Lorentz lift, the extremal family, centre-of-mass normalization
//! and a stability certificate.

pub mod convergence;
pub mod error;
pub mod extremals;
pub mod functionals;
pub mod harmonics;
pub mod lorentz;
pub mod mobius;
pub mod nelder_mead;
pub mod normalize;
pub mod sampling;
pub mod sphere;
pub mod stability;

pub use error::{Error, Result};
