//! Log-linear learning on semi-anonymous potential games.
//!
//! The crate covers the full pipeline: game definitions and their aggregate
//! state spaces ([`game`]), discrete transition kernels of three learning
//! dynamics ([`kernel`]), exact continuous-time analysis ([`analysis`]),
//! event-driven Monte Carlo including agent churn ([`simulate`]), and
//! closed-form convergence bounds ([`bounds`]). The `semianon` binary binds
//! these to scenario files.

pub mod analysis;
pub mod bounds;
pub mod cli;
mod config;
pub mod error;
pub mod game;
pub mod kernel;
pub mod report;
pub mod scenario;
pub mod simulate;

pub use error::{Error, Result};
