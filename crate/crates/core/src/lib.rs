//! Symbolic-regression genetic programming with a pluggable parent-selection
//! library: tournament, lexicase, automatic epsilon-lexicase and batch
//! tournament selection (BTS / BTSS), plus the experiment harness used to
//! compare them.

pub mod analysis;
pub mod campaign;
pub mod data;
pub mod engine;
pub mod error;
pub mod exprtree;
pub mod genetics;
pub mod par;
pub mod rng;
pub mod selbench;
pub mod selection;
pub mod stats;

pub use error::{Error, Result};
