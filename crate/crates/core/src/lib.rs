//! Risk fields on time-varying multimodal simplicial complexes.
//!
//! The pipeline: [`complex`] builds a typed simplicial complex from raw
//! event streams; [`dec`] supplies the discrete exterior calculus operators
//! on it; [`model`] produces a vector-valued node risk section through a
//! bundle-structured mixture of experts and an antisymmetric edge flow;
//! [`hhd`] splits that flow into orthogonal gradient, curl, and harmonic
//! parts; [`monitor`] derives per-agent scores and shift signals;
//! [`training`] fits the model; [`synth`] generates seeded cohorts with
//! planted ground truth.
//!
//! Numerical code is generic over the scalar type through [`Real`];
//! concrete `f64` aliases live at the crate root.

pub mod complex;
pub mod dec;
pub mod error;
pub mod hhd;
pub mod linalg;
pub mod model;
pub mod monitor;
pub mod scalar;
pub mod synth;
pub mod training;

pub use error::{GvfError, Result};
pub use scalar::Real;

/// `f64` cochain, the default for the CLI and reports.
pub type Cochain64 = dec::Cochain<f64>;
/// `f32` cochain.
pub type Cochain32 = dec::Cochain<f32>;
/// `f64` Hodge operator.
pub type HodgeOperator64 = dec::HodgeOperator<f64>;
/// `f64` decomposition result.
pub type HodgeDecomposition64 = hhd::HodgeDecomposition<f64>;
/// `f64` model.
pub type GvfModel64 = model::GvfModel<f64>;
/// `f64` dataset.
pub type Dataset64 = training::Dataset<f64>;
