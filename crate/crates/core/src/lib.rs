//! Random-matrix analysis of large-array sample covariance matrices and a
//! GLRT detector for signal presence.
//!
//! * [`models`] draws the transmit signal, multipath channel, noise and the
//!   received `P x N` array matrix.
//! * [`matrices`] builds the sample covariance matrix, its surrogate and
//!   spiked-Wishart equivalents, and the Hermitian spectral primitives.
//! * [`rmt`] evaluates the Marchenko–Pastur law and outlier-eigenvalue limits.
//! * [`detector`] implements the GLRT statistic, its asymptotic normal
//!   parameters and the threshold test.
//! * [`experiments`] runs seeded Monte Carlo studies and writes result tables.
//! * [`cli`] is the `rmt-detect` command-line front end.

pub mod cli;
pub mod detector;
pub mod error;
pub mod experiments;
pub mod matrices;
pub mod matrix;
pub mod models;
pub mod rmt;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
pub use matrices::EigenSpectrum;
pub use matrix::ComplexMatrix;
pub use models::{Hypothesis, Scenario, SignalLaw};
pub use seed::StreamSeed;
