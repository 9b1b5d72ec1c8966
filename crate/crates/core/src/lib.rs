//! Federated PPO simulation lab.
//!
//! Clients run neural PPO learners on heterogeneous environments and a
//! simulated server aggregates their actors and critics. Two intra-round
//! update orders are supported: the conventional critic-then-actor order
//! (`Variant::Baseline`) and the reversed actor-then-critic order
//! (`Variant::FedRac`), where each local actor is guided by the aggregated
//! global critic instead of a freshly fitted local one.
//!
//! Besides the training loop, the crate carries exact tabular oracles
//! (value iteration, linear-solve policy evaluation, discounted visitation,
//! exhaustive federated policy search) and the heterogeneity/aggregation
//! diagnostics that are measured on every round.

pub mod analysis;
pub mod environments;
pub mod error;
pub mod exec;
pub mod federation;
pub mod harness;
pub mod learners;
pub mod numerics;
pub mod policies;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
