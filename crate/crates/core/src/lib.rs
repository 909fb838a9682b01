//! Volatility forecasting laboratory.
//!
//! Fits GARCH(1,1), GJR-GARCH(1,1,1) and EGARCH(1,1,1) models by maximum
//! likelihood under normal, Student-t and Hansen skewed-t innovations, trains
//! a stacked LSTM regressor on windowed return series, and compares every
//! model through rolling-window backtests scored by RMSE/MAE and BIC.
//!
//! Module map:
//!
//! - [`market_data`]: CSV ingestion, percent returns, realized volatility,
//!   annualization and date-based train/test splits.
//! - [`dist`]: standardized innovation densities, absolute moments, samplers.
//! - [`garch`]: variance recursions, likelihood, simulation, forecasting.
//! - [`estimation`]: constrained maximum likelihood, numerical-Hessian
//!   inference, BIC and order selection.
//! - [`lstm`]: windowing, min-max scaling, stacked LSTM with BPTT and Adam.
//! - [`backtest`]: sliding-window evaluation and cross-model comparison.
//! - [`cli`]: the `vollab` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod backtest;
pub mod cli;
pub mod dist;
pub mod estimation;
pub mod garch;
pub mod lstm;
pub mod market_data;
pub(crate) mod rng;
