//! Generative learning for matrix-valued time series.
//!
//! The crate trains nonparametric one-step and multi-step sequence generators
//! by an adversarial variational objective built on f-divergences, and ships
//! everything needed to benchmark them at desk scale:
//!
//! - [`fdiv`]: f-divergence definitions, convex conjugates and the variational
//!   lower-bound machinery shared by training and tests.
//! - [`neural`]: a small dense-network stack (forward pass, reverse-mode
//!   gradients, decoupled-weight-decay optimizer, checkpoints).
//! - [`simgen`]: synthetic matrix autoregressions, panel sampling and
//!   stationary-covariance tools used as ground truth.
//! - [`gan`]: the empirical min-max objectives and alternating training loops
//!   for iterative, s-step, lag-k and panel generators.
//! - [`forecast`]: generation from trained models and rolling forecasting.
//! - [`baselines`]: OLS matrix autoregression and the naive lag-s predictor.
//! - [`metrics`]: NRMSE / SSIM / PSNR and replication-level aggregation.
//! - [`harness`]: experiment configuration, orchestration and CSV emission.

pub mod baselines;
pub mod error;
pub mod fdiv;
pub mod forecast;
pub mod gan;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod neural;
pub mod rng;
pub mod series;
pub mod simgen;

pub use error::{Error, Result};

/// Dense double-precision matrix used for frames, weights and batches.
pub type Mat = nalgebra::DMatrix<f64>;
/// Dense double-precision column vector.
pub type Vecf = nalgebra::DVector<f64>;
