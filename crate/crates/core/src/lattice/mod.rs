//! Reciprocal geometry, hopping matrices and their condition checks.

mod basis;
mod conditions;
mod model;

pub use basis::{dot, ReciprocalBasis};
pub use conditions::{sample_points, verify_conditions, ConditionEntry, ConditionReport, SortedLeaves};
pub use model::{builtin_model, spectral_of, HoppingModel, ModelKind, SpectralData, StencilTerm, BUILTIN_NAMES};
