use super::{ClusterPartition, ModelParams, Update};
use crate::error::{config_err, Error, Result};

/// Sample-count weights `|D_k| / sum |D_k|`.
pub fn fedavg_weights(updates: &[Update]) -> Vec<f64> {
    let total: usize = updates.iter().map(|u| u.num_samples).sum();
    updates
        .iter()
        .map(|u| u.num_samples as f64 / total as f64)
        .collect()
}

fn check_updates(version: u32, len: usize, updates: &[Update]) -> Result<()> {
    for u in updates {
        if u.model_version != version {
            return Err(Error::VersionMismatch {
                expected: version,
                got: u.model_version,
            });
        }
        if u.delta.len() != len {
            return Err(config_err(format!(
                "update from vehicle {} has {} entries, model has {len}",
                u.vehicle_id,
                u.delta.len()
            )));
        }
        if u.num_samples == 0 {
            return Err(config_err(format!("update from vehicle {} has no samples", u.vehicle_id)));
        }
    }
    Ok(())
}

/// Weighted mean of the updates' deltas as a single update carrying the
/// combined sample count. Used by cluster heads before forwarding upstream.
pub fn aggregate_updates(version: u32, len: usize, updates: &[Update], aggregator_id: usize) -> Result<Update> {
    if updates.is_empty() {
        return Err(config_err("cannot aggregate an empty update set"));
    }
    check_updates(version, len, updates)?;
    let weights = fedavg_weights(updates);
    let mut delta = vec![0.0; len];
    for (u, w) in updates.iter().zip(&weights) {
        for (acc, d) in delta.iter_mut().zip(&u.delta) {
            *acc += w * d;
        }
    }
    Ok(Update {
        vehicle_id: aggregator_id,
        model_version: version,
        delta,
        num_samples: updates.iter().map(|u| u.num_samples).sum(),
    })
}

/// `theta + sum_k (|D_k| / |D|) * delta_k`. No updates leaves the model as is.
pub fn fedavg(base: &ModelParams, updates: &[Update]) -> Result<ModelParams> {
    if updates.is_empty() {
        log::info!("fedavg on version {} with no updates; model unchanged", base.version);
        return Ok(base.clone());
    }
    let agg = aggregate_updates(base.version, base.theta.len(), updates, usize::MAX)?;
    let mut next = base.clone();
    for (t, d) in next.theta.iter_mut().zip(&agg.delta) {
        *t += d;
    }
    Ok(next)
}

/// One model per cluster, each the FedAvg of that cluster's updates on
/// `base`. Cluster `c` becomes version `c`.
pub fn spawn_cluster_models(base: &ModelParams, updates: &[Update], partition: &ClusterPartition) -> Result<Vec<ModelParams>> {
    if partition.assignment.len() != updates.len() {
        return Err(config_err("partition does not cover the update list"));
    }
    (0..partition.num_clusters)
        .map(|c| {
            let members: Vec<Update> = updates
                .iter()
                .zip(&partition.assignment)
                .filter(|(_, &a)| a == c)
                .map(|(u, _)| u.clone())
                .collect();
            let mut model = fedavg(base, &members)?;
            model.version = c as u32;
            Ok(model)
        })
        .collect()
}
