//! Hyperspectral unmixing with spectral variability.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod io;
pub mod metrics;
pub mod mua_sv;
pub mod solvers;
pub mod superpixel;
pub mod synthgen;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
