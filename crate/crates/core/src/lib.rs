//! Score-Jacobian spectra, condensation thermodynamics and dimension
//! detection for Gaussian data on linear manifolds.
//!
//! The crate is organised bottom-up: [`linear_model`] samples data,
//! [`score`] evaluates exact and empirical scores, [`rem`] computes
//! condensation quantities, [`spectral`] turns scores into singular spectra
//! and [`harness`] runs configured experiments and writes CSV output.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod linear_model;
pub mod numerics;
pub mod rem;
pub mod rng;
pub mod score;
pub mod spectral;

pub use error::{Error, ErrorClass, Result};
pub use linear_model::{Block, Dataset, ManifoldSpec, StateVector};
