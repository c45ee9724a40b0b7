//! Bayesian Dirichlet ARMA models for compositional time series with a
//! directional-shift intervention.
//!
//! The crate covers the whole pipeline: Aitchison geometry primitives
//! ([`simplex`]), the model equations and posterior ([`model`]), a
//! gradient-based sampler with adaptation and diagnostics ([`sampler`]),
//! the synthetic recovery study ([`simulation`]), forecasting and rolling
//! backtests ([`forecast`]), forecast scores ([`metrics`]) and the file
//! formats used by the `bdarma` binary ([`io`]).

pub mod covariates;
pub mod error;
pub mod forecast;
pub mod io;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod simplex;
pub mod simulation;
mod stats;

pub use error::{Error, Result};
pub use model::{CovariateSet, ModelSpec, ParamSet, Variant};
pub use simplex::{Composition, ContrastMatrix, IlrVector};
