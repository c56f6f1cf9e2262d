//! Maximum-entropy weighted Nadaraya-Watson estimation of conditional
//! distributions and quantiles for stationary time series.
//!
//! The pipeline for a one-step forecast:
//!
//! 1. [`cond_dist::lag_embed`] turns a series into pairs `(Y_i, Z_i)`.
//! 2. [`maxent::solve_lambda`] picks weights `p_i` of maximal entropy subject
//!    to `Σ p_i (Y_i - y) K_h(Y_i - y) = 0`.
//! 3. [`cond_dist::fit_cdf`] forms `F̂(z | y) ∝ Σ p_i 1{Z_i < z} K_h(Y_i - y)`.
//! 4. [`quantile::quantile`] and [`quantile::prediction_interval`] invert it.
//!
//! [`bandwidth`] chooses `h`, [`montecarlo`] checks the estimator's
//! statistical behaviour on simulated AR(1) data and [`io`] handles files and
//! the rolling backtest.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandwidth;
pub mod cond_dist;
pub mod error;
pub mod io;
pub mod kernel;
pub mod maxent;
pub mod montecarlo;
pub mod quantile;
pub mod stats;

pub use bandwidth::{BandwidthPlan, BandwidthRule, PlugInComponents};
pub use cond_dist::{fit_cdf, lag_embed, ConditionalCdf, LaggedSample};
pub use error::{Error, Result};
pub use io::{backtest, read_csv, BacktestConfig, TimeSeries};
pub use kernel::{KernelFamily, KernelSpec};
pub use maxent::{solve_lambda, MaxEntWeights, WeightStatus};
pub use quantile::{prediction_interval, quantile, PredictionInterval};
