//! Conformalized locally adaptive weighting for multiple testing with side
//! information.
//!
//! The crate pairs every test statistic with a calibration draw from the
//! null, builds swap-invariant locally weighted Clfdr scores for both, and
//! thresholds the score pairs with a mirror process that controls the false
//! discovery rate in finite samples.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregate;
pub mod baselines;
pub mod error;
pub mod estimators;
pub mod mirror;
pub mod model;
pub mod normal;
pub mod pipeline;
pub mod semisup;
pub mod sim;
pub mod weights;

pub use error::{ClawError, Result};
pub use mirror::{DecisionResult, Threshold};
pub use model::{ClawConfig, Covariate, Dataset, TestUnit};
pub use pipeline::{claw_run, ClawRun};
pub use weights::WeightMatrix;
