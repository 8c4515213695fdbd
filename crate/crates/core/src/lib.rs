//! State-augmented learning for constrained radio resource management.
//!
//! The crate trains a policy `p(H, mu; phi)` that takes both the network
//! state and a vector of dual multipliers, then runs it online while the
//! multipliers follow projected dual descent on the observed constraint
//! slack. The shipped instantiation is power control in `m`-user interference
//! channels: sum-rate utility, per-user minimum ergodic rates, and a
//! three-layer GNN policy.
//!
//! Module map:
//!
//! * [`channel`]: topologies, path loss, Gauss-Markov Rayleigh fading.
//! * [`rrm`]: rates, utility, constraints, Lagrangians, metrics.
//! * [`graph`]: node features and normalized edge weights.
//! * [`gnn`]: the policy network and its hand-written backward pass.
//! * [`training`]: offline learning with randomly sampled duals.
//! * [`execution`]: online execution with dual descent.
//! * [`baselines`]: full reuse, ITLinQ, early-stopped duals.
//! * [`checkpoint`], [`experiment`]: file formats and the experiment harness.
//! * [`diagnostics`]: gradient checks and property batteries.
//!
//! The guide in `book/` walks through each piece; its snippets run as doctests.

pub mod baselines;
pub mod channel;
pub mod checkpoint;
pub mod diagnostics;
mod error;
pub mod execution;
pub mod experiment;
pub mod gnn;
pub mod graph;
pub mod rng;
pub mod rrm;
mod serde_util;
pub mod training;

pub use error::{Error, Result};

pub type Complex64 = nalgebra::Complex<f64>;

/// Tool version embedded in every emitted artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/problem.md")]
    mod problem {}
    #[doc = include_str!("../../../book/src/policy.md")]
    mod policy {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/execution.md")]
    mod execution {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
