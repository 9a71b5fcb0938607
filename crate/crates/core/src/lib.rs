//! White-noise testing for multivariate locally stationary functional
//! time series.
//!
//! The pipeline estimates a smooth time-varying mean surface, forms
//! residual curves, aggregates local autocovariance traces over a band
//! of lags into a sup-type statistic, and calibrates it with a
//! difference-based block multiplier bootstrap. Tuning parameters come
//! from generalized cross validation (bandwidths) and a minimum
//! volatility rule (block length), with sensible defaults throughout.
//!
//! Entry points: [`bootstrap::run_test`] for a single panel,
//! [`sim::monte_carlo`] for rejection-rate studies on the built-in
//! benchmark models.

pub mod bootstrap;
pub mod config;
pub mod covstat;
pub mod error;
pub mod kernel;
pub mod panel;
pub mod rng;
pub mod sim;
pub mod smoothing;
pub mod tuning;

pub use bootstrap::{run_test, ResolvedPipeline};
pub use config::{Method, Setting, TestConfig, TestResult, TestSettings};
pub use error::{Error, Result};
pub use kernel::Kernel;
pub use panel::{FunctionalPanel, PanelFormat, ResidualPanel};
pub use sim::{generate, monte_carlo, Hypothesis, McReport, McRow, SimSpec};
pub use tuning::TuningReport;
