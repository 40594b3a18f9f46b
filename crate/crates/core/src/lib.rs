//! Preferential Bayesian optimization over multi-output black boxes, with
//! local comparative ("why" / "why not") explanations for every candidate pair.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs plus an explicit [`RngStream`], so a run is fully
//! reproducible from `(problem, seed, config, choices)`.
//!
//! Module map:
//! - [`benchmarks`]: DTLZ2 / DTLZ4 / ZDT1 and their utility adaptations.
//! - [`sampling`]: scrambled Sobol, Latin hypercube, LHS inside a ball, adaptive radius.
//! - [`gp`]: independent-output GP regression with analytic mean gradients.
//! - [`pref`]: probit pairwise-comparison GP with Laplace inference.
//! - [`explain`]: importance vectors, importance comparison, the comparative matrix.
//! - [`engine`]: the preference-exploration / experimentation loop.
//! - [`agents`]: simulated decision-makers.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod acquisition;
pub mod agents;
pub mod benchmarks;
pub mod engine;
mod error;
pub mod explain;
pub mod gp;
pub mod kernel;
pub mod linalg;
pub mod optim;
pub mod pref;
pub mod rng;
pub mod sampling;
pub mod special;

pub use crate::benchmarks::{BenchmarkId, BenchmarkProblem, DesignPoint, OutcomeVector};
pub use crate::error::{Error, Result};
pub use crate::rng::RngStream;
