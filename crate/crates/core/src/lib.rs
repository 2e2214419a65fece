//! Data-driven out-of-sample estimation on snapshot datasets.
//!
//! The crate builds a diffusion-map parametrization of a snapshot set, selects
//! a parsimonious subset of the diffusion coordinates, extends new points into
//! that latent space (Nystrom), learns smooth maps into and out of it
//! (geometric harmonics, including the latent-input "double" variant), and
//! provides a gappy POD baseline for reconstruction from partial observations.
//!
//! All numerical kernels are generic over the scalar type through [`Real`];
//! concrete `f64` aliases for the main model types live at the crate root.

pub mod datagen;
pub mod dmaps;
pub mod error;
pub mod gappy_pod;
pub mod harmonics;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod parsimony;
pub mod persist;
pub mod scalar;
pub mod workflows;

pub use error::{Error, Result};
pub use scalar::{real, Real};

/// Snapshot or parameter table in double precision, one observation per row.
pub type Matrix64 = nalgebra::DMatrix<f64>;
/// Double-precision column vector.
pub type Vector64 = nalgebra::DVector<f64>;

pub type KernelConfig64 = kernel::KernelConfig<f64>;
pub type MarkovOperator64 = kernel::MarkovOperator<f64>;
pub type DMapModel64 = dmaps::DMapModel<f64>;
pub type ResidualReport64 = parsimony::ResidualReport<f64>;
pub type GHModel64 = harmonics::GHModel<f64>;
pub type PODBasis64 = gappy_pod::PODBasis<f64>;
pub type Pipeline64 = workflows::Pipeline<f64>;
pub type PipelineOptions64 = workflows::PipelineOptions<f64>;
