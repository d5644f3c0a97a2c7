//! Local training, federated averaging, update similarity and update
//! clustering.

mod aggregate;
mod checkpoint;
mod cluster;
mod mlp;

pub use aggregate::{aggregate_updates, fedavg, fedavg_weights, spawn_cluster_models};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use cluster::{adjusted_rand_index, cosine_similarity, hierarchical_cluster, ClusterPartition};
pub use mlp::{
    class_accuracy, evaluate, evaluate_accuracy, local_train, loss, loss_and_gradient, predict, relu_margin,
    ModelArch, ModelParams, TrainConfig,
};

use serde::{Deserialize, Serialize};

/// Parameter change produced by one vehicle (or one cluster) for one model
/// version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Update {
    pub vehicle_id: usize,
    pub model_version: u32,
    pub delta: Vec<f64>,
    pub num_samples: usize,
}
