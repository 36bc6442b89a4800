//! Curvature of tangent bundles carrying natural metrics.

#![allow(clippy::needless_range_loop)]

pub mod basemanifold;
pub mod bundlemetric;
pub mod cli;
pub mod closedform;
pub mod error;
pub mod metricfamily;
pub mod numdiff;
pub mod oracle;
pub mod scalarfun;
pub mod tensor;

pub use error::{Error, Result};
