//! Parallel cellular-automata traffic micro-simulation.
//!
//! The crate is organised bottom-up:
//!
//! - [`net`]: road network graph, 7.5 m cell discretisation, file formats and
//!   synthetic generators.
//! - [`ca`]: single-domain cellular-automata dynamics (lane changing, car
//!   following, signals, unprotected turns, injection and removal).
//! - [`partition`]: orthogonal recursive bisection and multilevel graph
//!   partitioning, split-link statistics and scaling fits.
//! - [`parengine`]: split-link domain decomposition, boundary exchange and
//!   master/worker orchestration over pluggable transports.
//! - [`loadbal`]: turns measured per-element work into node weights for the
//!   next run.
//! - [`perfmodel`]: analytic time-per-step, real-time ratio, speed-up and
//!   efficiency prediction.
//! - [`validate`]: scripted flow experiments (fundamental diagrams, merges,
//!   signals, lane usage).
//! - [`cli`]: the command implementations behind the `cellflow` binary.
//!
//! A p-domain run produces cell-by-cell the same states as a single-domain
//! run: every random draw is keyed by vehicle, time and sub-step, and every
//! decision only reads cells inside the five-cell interaction range.

pub mod ca;
pub mod cli;
pub mod error;
pub mod loadbal;
pub mod net;
pub mod parengine;
pub mod partition;
pub mod perfmodel;
pub mod rng;
pub mod validate;

pub use error::{Error, Result};
