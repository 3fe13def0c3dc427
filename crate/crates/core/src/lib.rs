//! Sparse deep additive models with interactions: additive screening,
//! group-lasso effect partitioning, and constrained per-effect networks.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod basis;
pub mod config;
pub mod dataget;
pub mod error;
pub mod footprint;
pub mod grouplasso;
pub mod metrics;
pub mod net;
pub mod pipeline;
pub mod plot;
pub mod spam;
pub mod util;

pub use error::{ErrorKind, Result, SdamiError};
