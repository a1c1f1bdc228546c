//! Surface vessel simulation with unscented Kalman filtering and nonlinear
//! disturbance observation.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod environment;
pub mod error;
pub mod estimator;
pub mod io;
pub mod noise;
pub mod observer;
pub mod sim;
pub mod vessel;

pub use error::{Error, Result};
