//! Synthetic task-oriented dialogue datasets with controllable events and
//! label noise, plus a small harness for measuring how label noise degrades
//! dialogue-policy learning.
//!
//! Pipeline: [`ontology`] → [`engine`] (generate) → [`inject`] (perturb) →
//! [`encoding`] (state/target vectors) → [`eval`] (train, score, sweep).

pub mod cli;
pub mod encoding;
pub mod engine;
pub mod eval;
pub mod inject;
pub mod io;
pub mod ontology;
pub mod presets;
pub mod rng;

mod error;

pub use error::{Error, Result};
