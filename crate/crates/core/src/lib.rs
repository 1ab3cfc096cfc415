//! Weighted proper scoring rules for density forecasts and the tests of
//! equal predictive performance built on them.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dist;
pub mod error;
pub mod grammar;
pub mod ingest;
pub mod numfmt;
pub mod quad;
pub mod rng;
pub mod scores;
pub mod sim;
pub mod testing;
pub mod verify;
pub mod weights;

pub use dist::Density;
pub use error::{Error, Result};
pub use scores::{BinaryScore, ScoreValue, ScoringRule};
pub use weights::WeightFunction;
