//! Heterogeneous treatment effect estimation for household panels.
//!
//! The crate covers the whole chain from raw inputs to reports:
//!
//! * [`panel`]: role-tagged longitudinal data, lagged baselines.
//! * [`weather`]: SPEI from monthly water balance, growing-season aggregation.
//! * [`index`]: first-principal-component composite indices rescaled to 0-100.
//! * [`forest`]: honest regression and causal forests with cluster-aware
//!   subsampling, out-of-bag prediction and little-bags variance estimates.
//! * [`pipeline`]: double orthogonalization, doubly robust average effect,
//!   group-average reports and the placebo permutation harness.
//! * [`synth`]: synthetic panels with a known effect surface.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod forest;
pub mod index;
pub mod panel;
pub mod pipeline;
pub mod stats;
pub mod synth;
pub mod weather;

pub use error::{Error, ErrorKind, Result};
