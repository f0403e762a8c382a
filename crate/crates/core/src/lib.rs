//! Benchmark harness for comparing predicted causal-discovery performance
//! ranges against bootstrap ground truth.

// `!(x > 0.0)` style guards are meant to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calibration;
pub mod campaign;
pub mod citests;
pub mod data;
pub mod discovery;
pub mod error;
pub mod graphs;
pub mod metrics;
pub mod predictions;
pub mod seed;

pub use error::{Error, Result};
