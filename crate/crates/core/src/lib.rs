//! Scaled subordinators, unitary random measures, and the feature and
//! partition models built on them.

// `!(x > 0.0)` is used on purpose so that NaN fails parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod featmat;
pub mod levy;
pub mod measures;
pub mod pkbridge;
pub mod posterior;
pub mod special;
pub mod urns;

pub use error::{Error, Result};
