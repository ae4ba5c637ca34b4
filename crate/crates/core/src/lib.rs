//! Zero-temperature corners processes.
//!
//! Root grids of Appell sequences, the jumping-process kernels between
//! their levels, dual orthogonal polynomials diagonalizing those kernels,
//! exact covariances of the Gaussian fluctuation fields, Monte Carlo
//! samplers, the Airy-line limit object and steepest-descent asymptotics.

pub mod airy;
pub mod asymptotics;
pub mod cli;
pub mod covariance;
pub mod dualpoly;
pub mod error;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod polygrid;
pub mod quad;
pub mod sampler;

pub use error::{Error, Result};
