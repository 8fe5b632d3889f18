//! Real-time equity allocation backtests driven by a recursively estimated
//! predictor index.
//!
//! The pipeline runs in the order of the modules below: load the monthly panel
//! ([`data`]), label yield-curve states ([`state`]), build the index at each
//! formation month ([`index`]), turn it into one-step-ahead forecasts
//! ([`forecast`]), map forecasts into constrained mean-variance weights
//! ([`alloc`]) and evaluate the resulting portfolios ([`eval`]).
//! [`pipeline`] wires these together for the command-line tool.

// Negated comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alloc;
pub mod config;
pub mod data;
pub mod date;
pub mod error;
pub mod eval;
pub mod forecast;
pub mod index;
pub mod pipeline;
pub mod state;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
