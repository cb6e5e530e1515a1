//! Simulation and analytic toolkit for wireless network scaling laws.
//!
//! The crate reproduces per-flow capacity under relay, receiver, topological
//! and cluster-leader bottlenecks, throughput under end-to-end and hop-by-hop
//! erasure recovery, coded multicast completion time, and two-hop mobility
//! relaying, and checks every simulated sweep against its closed-form law
//! through fitted log-log exponents.
//!
//! Modules:
//! - [`topology`]: node placement, unit-disk graphs, geographic clustering.
//! - [`routing`]: traffic patterns, shortest-path and leader routing, relay
//!   loads and per-flow capacity.
//! - [`laws`]: closed-form scaling laws and the exponent fitter.
//! - [`erasure`]: erasure-recovery protocols and coded multicast.
//! - [`mobility`]: two-hop relaying over a random-walk torus.
//! - [`harness`]: scenario configs, sweeps, verdicts and CSV output.
//!
//! With the default `parallel` feature, independent work items (flows grouped
//! by destination, Monte-Carlo trials, sweep points) run on rayon. Without it
//! the same code paths run sequentially and produce identical results.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod erasure;
mod error;
pub mod harness;
pub mod laws;
pub mod mobility;
pub mod par;
pub mod rng;
pub mod routing;
pub mod topology;

pub use error::{Error, Result};
