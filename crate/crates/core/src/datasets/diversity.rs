use serde::{Deserialize, Serialize};

use crate::error::{domain_err, Result};

/// Raw per-vehicle dataset metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub size: usize,
    /// Label entropy in nats.
    pub label_entropy: f64,
    /// Rounds since the vehicle last uploaded.
    pub age: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityWeights {
    pub diversity: f64,
    pub size: f64,
    pub age: f64,
}

impl Default for DiversityWeights {
    fn default() -> Self {
        DiversityWeights {
            diversity: 0.4,
            size: 0.4,
            age: 0.2,
        }
    }
}

impl DiversityWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.diversity, self.size, self.age];
        if w.iter().any(|&g| !(g >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(domain_err(format!("diversity weights must be >= 0 and sum to 1, got {w:?}")));
        }
        Ok(())
    }
}

/// Min-max normalisation across the fleet; a constant metric maps to 0.
fn normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        values.iter().map(|&v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; values.len()]
    }
}

/// Weighted sum of the fleet-normalised entropy, size and age of each
/// vehicle's dataset. Every index lies in `[0, 1]`.
pub fn diversity_index(metas: &[DatasetMeta], weights: &DiversityWeights) -> Result<Vec<f64>> {
    if metas.is_empty() {
        return Err(domain_err("diversity index of an empty fleet"));
    }
    weights.validate()?;
    let entropy = normalize(&metas.iter().map(|m| m.label_entropy).collect::<Vec<_>>());
    let size = normalize(&metas.iter().map(|m| m.size as f64).collect::<Vec<_>>());
    let age = normalize(&metas.iter().map(|m| m.age as f64).collect::<Vec<_>>());
    Ok((0..metas.len())
        .map(|k| {
            (weights.diversity * entropy[k] + weights.size * size[k] + weights.age * age[k]).clamp(0.0, 1.0)
        })
        .collect())
}
