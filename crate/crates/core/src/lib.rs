//! Numerics for the reduced BCS model under an imaginary magnetic field.

pub mod covariance;
pub mod ed;
pub mod error;
pub mod gap;
pub mod grassmann;
pub mod lattice;
pub mod measure;
pub mod phase;
pub mod quadrature;
pub mod thermo;

pub use error::{Error, Result};
pub use lattice::{builtin_model, HoppingModel, ReciprocalBasis};
pub use measure::SpectralMeasure;
pub use num_complex::Complex64;
