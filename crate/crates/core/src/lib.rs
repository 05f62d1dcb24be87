//! Half-line Schrödinger-type operators `-d^2/dx^2 + T` with a matrix
//! potential `T >= 0`: Weyl functions, boundary triplets, self-adjoint
//! realizations, spectral multiplicity and a finite-difference oracle.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the common case.

// negated comparisons below are deliberate: they reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod multiplicity;
pub mod oracle;
pub mod realizations;
pub mod scalar;
pub mod spectral;
pub mod suite;
pub mod triplets;
pub mod weyl;

pub use error::{Error, Result};
pub use realizations::{canonical_parameter, CanonicalKind, ExtensionParameter, GridFunction, UniformGrid};
pub use scalar::Real;
pub use spectral::{branch_sqrt, SpectralMeasure};
pub use triplets::{BlockModel, TripletTransform};
pub use oracle::{DiscretizedOperator, IntervalBc};
pub use weyl::{HerglotzSample, Realization, TripletTag};

pub type SpectralMeasure64 = SpectralMeasure<f64>;
pub type SpectralMeasure32 = SpectralMeasure<f32>;
pub type ExtensionParameter64 = ExtensionParameter<f64>;
pub type GridFunction64 = GridFunction<f64>;
pub type TripletTransform64 = TripletTransform<f64>;
pub type BlockModel64 = BlockModel<f64>;
pub type DiscretizedOperator64 = oracle::DiscretizedOperator<f64>;
pub type DiscretizedOperator32 = oracle::DiscretizedOperator<f32>;
