//! Self-constructed system energy models.
//!
//! The crate simulates a battery-powered system (component power states, the
//! OS-visible predictors and a smart-battery interface), and builds energy
//! models from those coarse self-measurements: readings are stretched to a
//! low-rate training set, predictors are rotated with PCA, coefficients are
//! fitted by total least squares, and the resulting model is compressed back
//! down to short estimation intervals. A model manager keys models by system
//! configuration and rebuilds them when the monitored error drifts.

// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod battery_sim;
pub mod collector;
pub mod constructor;
pub mod error;
pub mod eval;
pub mod manager;
pub mod time;
pub mod trace_sim;

pub use error::{Error, Result};
