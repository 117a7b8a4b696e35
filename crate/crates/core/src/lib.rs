//! Non-stationary peaks-over-threshold models for record-breaking running
//! performances: likelihood, fitting, forecasting, diagnostics and
//! simulation.
//!
//! Performances are handled on the negated-seconds scale throughout; see
//! [`model`] for the parameterization.

pub mod dataio;
pub mod diagnostics;
pub mod error;
pub mod forecast;
pub mod inference;
pub mod model;
pub mod optim;
pub mod paper;
pub mod simgen;
pub mod timefmt;

pub use error::{Error, Result};
pub use forecast::{ForecastQuery, ForecastResult, ForecastSettings, Interval, RecordRef};
pub use inference::{aic, bootstrap, fit, BootstrapConfig, BootstrapResult, FitConfig, FitResult};
pub use model::{
    AftMode, DisciplineParams, ExceedanceSet, GlobalModel, Observation, YearParams, YearRange,
};
