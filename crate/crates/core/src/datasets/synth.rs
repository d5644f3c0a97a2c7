use rand::Rng;
use rand_distr::StandardNormal;

use super::LabeledDataset;
use crate::error::{config_err, Result};
use crate::rng;

const MIN_SEPARATION: f64 = 4.0;

/// Gaussian class clusters with unit covariance. The class means are fixed by
/// the task seed, so train and test sets drawn from one task share them.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub means: Vec<Vec<f64>>,
}

impl SyntheticTask {
    pub fn new(num_classes: usize, dim: usize, seed: u64) -> Result<Self> {
        if num_classes < 2 || dim == 0 {
            return Err(config_err(format!(
                "synthetic task needs at least 2 classes and 1 dimension, got C={num_classes}, d={dim}"
            )));
        }
        let mut rng = rng::derive(seed, &[0]);
        // random directions on a sphere of radius MIN_SEPARATION
        let mut means: Vec<Vec<f64>> = (0..num_classes)
            .map(|_| loop {
                let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-9 {
                    break v.into_iter().map(|x| x * MIN_SEPARATION / norm).collect();
                }
            })
            .collect();
        let mut closest = f64::INFINITY;
        for i in 0..num_classes {
            for j in i + 1..num_classes {
                let d = means[i].iter().zip(&means[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                closest = closest.min(d);
            }
        }
        if closest <= 1e-9 {
            // collisions (e.g. d = 1): fall back to points on the coordinate axes
            means = (0..num_classes)
                .map(|i| {
                    let mut m = vec![0.0; dim];
                    m[i % dim] = MIN_SEPARATION * (1 + i / dim) as f64;
                    m
                })
                .collect();
        } else if closest < MIN_SEPARATION {
            let scale = MIN_SEPARATION / closest;
            for m in &mut means {
                m.iter_mut().for_each(|x| *x *= scale);
            }
        }
        Ok(SyntheticTask { means })
    }

    pub fn num_classes(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// `n` samples split as evenly as possible across classes (lower classes
    /// take the remainder), grouped by class.
    pub fn sample(&self, n: usize, seed: u64) -> Result<LabeledDataset> {
        let c = self.num_classes();
        if n < c {
            return Err(config_err(format!("need at least one sample per class, got n={n} < C={c}")));
        }
        let d = self.dim();
        let mut rng = rng::derive(seed, &[1]);
        let mut features = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for (class, mean) in self.means.iter().enumerate() {
            let count = n / c + usize::from(class < n % c);
            for _ in 0..count {
                features.extend(mean.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)));
                labels.push(class);
            }
        }
        LabeledDataset::new(features, labels, d, c)
    }
}

pub fn synth_dataset(num_classes: usize, dim: usize, n: usize, seed: u64) -> Result<LabeledDataset> {
    SyntheticTask::new(num_classes, dim, seed)?.sample(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_classes() {
        let ds = synth_dataset(2, 2, 100, 3).unwrap();
        assert_eq!(ds.label_histogram(), vec![50, 50]);
        let odd = synth_dataset(3, 2, 10, 3).unwrap();
        assert_eq!(odd.label_histogram(), vec![4, 3, 3]);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = synth_dataset(10, 20, 500, 11).unwrap();
        let b = synth_dataset(10, 20, 500, 11).unwrap();
        let bits = |d: &LabeledDataset| d.features.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.labels, b.labels);
        assert_ne!(bits(&a), bits(&synth_dataset(10, 20, 500, 12).unwrap()));
    }

    #[test]
    fn means_are_separated() {
        for (c, d) in [(2, 1), (10, 1), (10, 20), (5, 3)] {
            let t = SyntheticTask::new(c, d, 5).unwrap();
            for i in 0..c {
                for j in i + 1..c {
                    let dist = t.means[i].iter().zip(&t.means[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    assert!(dist >= MIN_SEPARATION - 1e-9, "C={c} d={d}: {dist}");
                }
            }
        }
    }

    #[test]
    fn invalid_sizes() {
        assert!(synth_dataset(1, 2, 10, 0).is_err());
        assert!(synth_dataset(2, 0, 10, 0).is_err());
        assert!(synth_dataset(5, 2, 4, 0).is_err());
    }
}
