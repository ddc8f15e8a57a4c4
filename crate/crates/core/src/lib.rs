//! Evaluability of generative-model metrics on finite domains.
//!
//! A metric `f(q, q*)` compares a model `q` to an unknown ground truth `q*`;
//! a score `s(q, S)` sees only a sample `S ~ q*`. This crate provides the
//! divergences and test families that define metrics, the sample scores that
//! try to track them, adversarial constructions where tracking provably
//! fails, and a Monte-Carlo harness that measures how often it does.

pub mod constructions;
pub mod distributions;
mod error;
pub mod experiments;
pub mod float_serde;
pub mod scores;
pub mod test_families;

pub use error::{Error, Result};
