use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{config_err, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub num_shards: usize,
    pub shard_size: usize,
    pub min_shards: usize,
    pub max_shards: usize,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        PartitionSpec {
            num_shards: 1200,
            shard_size: 50,
            min_shards: 1,
            max_shards: 30,
        }
    }
}

impl PartitionSpec {
    pub fn validate(&self, dataset_len: usize) -> Result<()> {
        if self.num_shards == 0 || self.shard_size == 0 {
            return Err(config_err("num_shards and shard_size must be positive"));
        }
        if self.num_shards * self.shard_size > dataset_len {
            return Err(config_err(format!(
                "{} shards of {} exceed the {dataset_len} available samples",
                self.num_shards, self.shard_size
            )));
        }
        if self.min_shards == 0 || self.min_shards > self.max_shards {
            return Err(config_err(format!(
                "shard bounds must satisfy 1 <= min <= max, got [{}, {}]",
                self.min_shards, self.max_shards
            )));
        }
        Ok(())
    }
}

/// Which vehicle owns which shard; enough to rebuild a partition from the
/// source dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionIndex {
    pub shard_size: usize,
    /// Owner of each shard, `None` for unused shards.
    pub shard_owner: Vec<Option<usize>>,
    /// Source sample indices of each shard.
    pub shard_samples: Vec<Vec<usize>>,
}

impl PartitionIndex {
    pub fn vehicle_shards(&self, vehicle: usize) -> Vec<usize> {
        (0..self.shard_owner.len())
            .filter(|&s| self.shard_owner[s] == Some(vehicle))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone)]
pub struct Partition {
    pub datasets: Vec<LabeledDataset>,
    pub index: PartitionIndex,
}

/// Splits `ds` into label-sorted shards and deals a uniformly random number
/// of them, in `[min_shards, max_shards]`, to each of `vehicles` vehicles.
pub fn partition_shards(ds: &LabeledDataset, vehicles: usize, spec: &PartitionSpec, seed: u64) -> Result<Partition> {
    spec.validate(ds.len())?;
    if vehicles * spec.min_shards > spec.num_shards {
        return Err(config_err(format!(
            "{vehicles} vehicles x {} shards minimum exceeds {} shards",
            spec.min_shards, spec.num_shards
        )));
    }
    let mut rng = rng::rng_from(seed);

    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.sort_by_key(|&i| ds.labels[i]);
    let shard_samples: Vec<Vec<usize>> = (0..spec.num_shards)
        .map(|s| order[s * spec.shard_size..(s + 1) * spec.shard_size].to_vec())
        .collect();

    let mut max = spec.max_shards;
    let counts = loop {
        let counts: Vec<usize> = (0..vehicles).map(|_| rng.random_range(spec.min_shards..=max)).collect();
        let demand: usize = counts.iter().sum();
        if demand <= spec.num_shards {
            break counts;
        }
        let rescaled = (max * spec.num_shards / demand).max(spec.min_shards);
        log::warn!(
            "shard demand {demand} exceeds {} shards; redrawing with max {rescaled}",
            spec.num_shards
        );
        max = rescaled;
    };

    let mut shuffled: Vec<usize> = (0..spec.num_shards).collect();
    shuffled.shuffle(&mut rng);
    let mut shard_owner = vec![None; spec.num_shards];
    let mut next = shuffled.into_iter();
    let mut datasets = Vec::with_capacity(vehicles);
    for (vehicle, &count) in counts.iter().enumerate() {
        let mut samples = Vec::with_capacity(count * spec.shard_size);
        for shard in next.by_ref().take(count) {
            shard_owner[shard] = Some(vehicle);
            samples.extend_from_slice(&shard_samples[shard]);
        }
        datasets.push(ds.subset(&samples));
    }
    Ok(Partition {
        datasets,
        index: PartitionIndex {
            shard_size: spec.shard_size,
            shard_owner,
            shard_samples,
        },
    })
}
