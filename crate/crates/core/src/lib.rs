//! Elastic-net penalized risk minimization and numerical checks of its oracle inequality.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod loss;
pub mod oracle_lab;
pub mod population;
pub mod rng;
pub mod selection;
pub mod solver;

pub use error::{Error, Result};
