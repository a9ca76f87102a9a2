//! A simulation and learning laboratory for predicting with distributions.
//!
//! A hidden binary concept `c(x)` chooses which of two outcome distributions
//! `P0`, `P1` generates `y`. Learners see `(x, y)` pairs and must output a
//! model `(h, Q0, Q1)` whose expected conditional KL divergence is small.

pub mod distlearn;
pub mod distributions;
pub mod error;
pub mod events;
pub mod cccn;
pub mod harness;
pub mod mixture;
pub mod model;
pub mod reductions;
pub mod seed;

pub use error::{Error, Result};
