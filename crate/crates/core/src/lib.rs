//! Categorical variable encoders and the machinery to compare them.
//!
//! The crate is organised around a small pipeline:
//!
//! * [`data`] loads CSV tables, splits them and runs the
//!   impute → encode → standardize preprocessing with train-only statistics.
//! * [`encoders`] holds the fourteen encoders (grouping, ordering, semantic
//!   and target families).
//! * [`models`] provides the desk-scale learners: ridge, logistic regression,
//!   a one-hidden-layer MLP, CART and a random forest.
//! * [`theory`] checks the one-hot reconstruction identity for affine models
//!   and the contiguous-partition property of mean-ordered tree splits.
//! * [`synth`] generates the season datasets and runs samples-per-level sweeps.
//! * [`metrics`], [`bench`] and [`guide`] score, aggregate and turn results
//!   into encoder recommendations.

// `!(x > 0.0)` checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod data;
pub mod encoders;
mod error;
pub mod guide;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod synth;
pub mod theory;

pub use error::{Error, Result};
