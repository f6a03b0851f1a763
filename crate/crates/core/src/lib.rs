//! Markov chains in random environments: exact mixing computations, Doeblin
//! splitting and coupling, limit-theorem diagnostics and the single-server
//! queue driven by dependent service times.

pub mod counterexample;
pub mod error;
pub mod finite;
pub mod law;
pub mod limits;
pub mod mcre;
pub mod mixing;
pub mod process;
pub mod queue;
pub mod rng;
pub mod runner;
pub mod stats;

pub use error::{Error, Result};
