//! Numerical laboratory for the small-time heat content of fractional
//! Schrödinger operators `(-Δ)^{α/2} + V` on `R^d`.
//!
//! The expansion coefficients `C_ℓ(V)` are computed by two deterministic
//! routes (closed spatial forms on a spectral grid, and nested sums over the
//! frequency lattice with exact simplex weights) and compared against a
//! Feynman-Kac Monte Carlo estimator driven by exact isotropic α-stable
//! increments.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod config;
pub mod error;
pub mod feynman_kac;
pub mod output;
pub mod potentials;
pub mod quadrature;
pub mod simplex_weights;
pub mod spectral;
pub mod stable_sampler;
pub mod validator;

pub use coefficients::{CoefficientEngine, CoefficientTable, Route};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use feynman_kac::{McConfig, McEstimate, Proposal};
pub use potentials::{Component, GaussianMixturePotential};
pub use simplex_weights::{Composition, SimplexWeight};
pub use spectral::{GridField, SpaceTag, SpectralGrid};
pub use stable_sampler::{RngStream, StablePath};
pub use validator::ExpansionReport;

/// Tool version embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
