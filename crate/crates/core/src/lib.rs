//! Numerical laboratory for the Benjamin-Ono equation `u_t = (D u - u^2)_x` on a
//! periodic box: spectral operators, soliton profiles, an integrating-factor RK4
//! solver, modulation tracking, weighted Lyapunov functionals, linearized spectra
//! and a batch harness.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod evolution;
pub mod harness;
pub mod lyapunov;
pub mod modulation;
pub mod soliton;
pub mod spectral;

pub use error::{Error, Result};
pub use spectral::{Grid, RealField, SpectralField};
