//! The directional-shift Dirichlet ARMA model.
//!
//! Observations follow `Y_t ~ Dirichlet(lambda_t * mu_t)` with
//! `mu_t = ilr_inv(eta_t)`. The ILR-space mean follows a diagonal
//! ARMA(1,1) recursion around a drift that may carry an intervention:
//!
//! ```text
//! eta_t = d_t + A (Z_{t-1} - d_{t-1}) + Theta e_{t-1}
//! d_t   = b + B x_t + Delta * w_t * v          (intervention)
//! log lambda_t = x_phi_t' gamma + delta_phi * w_t
//! ```
//!
//! Time indices are 1-based throughout: row `i` of a series is time `i + 1`.

mod dirichlet;
mod gate;
mod params;
mod posterior;
mod prior;
mod spec;
mod state;

pub use dirichlet::{dirichlet_log_pdf, sample_dirichlet};
pub use gate::{clr_direction, direction, gate};
pub use params::{param_names, Intervention, ParamSet, ARMA_BOUND};
pub use posterior::{grad_log_posterior, log_likelihood, log_posterior, Dataset, Posterior};
pub use prior::{log_prior, Priors};
pub use spec::{CovariateSet, Matrix, ModelSpec, Variant};
pub use state::{build_state, IlrSeries, SeriesState};
pub(crate) use state::DriftEval;

/// Dirichlet concentrations below this are rejected.
pub const ALPHA_FLOOR: f64 = 1e-10;
