//! Clustered vehicular federated learning.
//!
//! A deterministic simulator for hierarchical federated learning over a
//! vehicular network: cluster heads are chosen by a greedy knapsack over
//! resource blocks, the remaining vehicles are attached to heads through a
//! capacity-constrained max-weight matching, and model updates are averaged
//! at the head and again at the edge server. At a configured round the
//! server clusters raw updates by cosine similarity and spawns one model per
//! cluster.
//!
//! Everything random is driven by four named seeds (fleet, channel, data,
//! train) so that runs are reproducible bit for bit.

pub mod channel;
pub mod datasets;
pub mod error;
pub mod learner;
pub mod mobility;
pub mod orchestrator;
pub mod rng;
pub mod scheduler;
pub mod verify;

pub use error::{Error, Result};
