//! Labelled datasets, the shard partitioner, concept-shift injection and the
//! diversity index used to rank cluster-head candidates.

mod diversity;
mod idx;
mod partition;
mod shift;
mod synth;

pub use diversity::{diversity_index, DatasetMeta, DiversityWeights};
pub use idx::{load_idx, parse_idx};
pub use partition::{partition_shards, Partition, PartitionIndex, PartitionSpec};
pub use shift::{apply_concept_shift, swap_labels, ConceptShiftSpec};
pub use synth::{synth_dataset, SyntheticTask};

use crate::error::{config_err, Result};

/// Row-major feature matrix with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub dim: usize,
    pub num_classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, dim: usize, num_classes: usize) -> Result<Self> {
        if dim == 0 || features.len() != labels.len() * dim {
            return Err(config_err(format!(
                "feature matrix of {} values does not fit {} rows of dim {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(config_err(format!("label {bad} outside [0, {num_classes})")));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(config_err("non-finite feature value"));
        }
        Ok(LabeledDataset {
            features,
            labels,
            dim,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Copies the given rows, in order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        LabeledDataset {
            features,
            labels,
            dim: self.dim,
            num_classes: self.num_classes,
        }
    }

    pub fn label_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.num_classes];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }

    /// Shannon entropy of the label histogram, in nats.
    pub fn label_entropy(&self) -> f64 {
        let n = self.len() as f64;
        if n == 0.0 {
            return 0.0;
        }
        -self
            .label_histogram()
            .into_iter()
            .filter(|&c| c > 0)
            .map(|c| {
                let p = c as f64 / n;
                p * p.ln()
            })
            .sum::<f64>()
    }
}
