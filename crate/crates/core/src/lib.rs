//! Global and environmental quantum Fisher information of multimode bosonic
//! sensors under continuous Gaussian measurement.
//!
//! The [`gaussian`] module turns a quadratic model into drift and diffusion
//! generators, [`dynamics`] integrates the moments together with the QFI
//! accumulators, [`spectral`] evaluates the closed-form solutions and
//! asymptotic rates, [`models`] builds the cavity and trapped-particle arrays,
//! and [`fock`] is a brute-force truncated-Fock cross-check.

pub mod dynamics;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod linalg;
pub mod models;
pub mod spectral;

pub use error::{GqfiError, Result};
pub use gaussian::{GaussianState, ModelSpec};
