use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{config_err, Result};

/// Label swaps per vehicle group. Group `g` exchanges every pair in
/// `groups[g]`; the number of groups is the number of concepts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConceptShiftSpec {
    pub groups: Vec<Vec<(usize, usize)>>,
}

impl ConceptShiftSpec {
    /// No shift: a single group that swaps nothing.
    pub fn none() -> Self {
        ConceptShiftSpec { groups: vec![vec![]] }
    }

    pub fn n_shifts(&self) -> usize {
        self.groups.len().max(1)
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        for (g, pairs) in self.groups.iter().enumerate() {
            let mut used = vec![false; num_classes];
            for &(a, b) in pairs {
                if a >= num_classes || b >= num_classes || a == b {
                    return Err(config_err(format!("group {g}: invalid swap ({a}, {b}) for {num_classes} classes")));
                }
                for l in [a, b] {
                    if used[l] {
                        return Err(config_err(format!("group {g}: label {l} appears in more than one swap")));
                    }
                    used[l] = true;
                }
            }
        }
        Ok(())
    }

    /// Group of vehicle `k` among `vehicles`: contiguous blocks whose sizes
    /// differ by at most one.
    pub fn group_of(&self, k: usize, vehicles: usize) -> usize {
        k * self.n_shifts() / vehicles.max(1)
    }

    pub fn pairs(&self, group: usize) -> &[(usize, usize)] {
        self.groups.get(group).map_or(&[], |p| p.as_slice())
    }
}

pub fn swap_labels(ds: &mut LabeledDataset, pairs: &[(usize, usize)]) {
    for l in &mut ds.labels {
        for &(a, b) in pairs {
            if *l == a {
                *l = b;
                break;
            } else if *l == b {
                *l = a;
                break;
            }
        }
    }
}

/// Applies each group's swaps to its vehicles in place and returns the
/// ground-truth group of every vehicle.
pub fn apply_concept_shift(partitions: &mut [LabeledDataset], spec: &ConceptShiftSpec) -> Result<Vec<usize>> {
    if let Some(first) = partitions.first() {
        spec.validate(first.num_classes)?;
    }
    let k = partitions.len();
    Ok(partitions
        .iter_mut()
        .enumerate()
        .map(|(i, ds)| {
            let g = spec.group_of(i, k);
            swap_labels(ds, spec.pairs(g));
            g
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::synth_dataset;

    #[test]
    fn empty_shift_is_identity() {
        let ds = synth_dataset(10, 3, 200, 1).unwrap();
        let mut parts = vec![ds.clone(), ds.clone()];
        let groups = apply_concept_shift(&mut parts, &ConceptShiftSpec::none()).unwrap();
        assert_eq!(groups, vec![0, 0]);
        assert_eq!(parts[0], ds);
    }

    #[test]
    fn swap_is_involution() {
        let orig = synth_dataset(10, 3, 200, 1).unwrap();
        let mut ds = orig.clone();
        swap_labels(&mut ds, &[(1, 7), (3, 5)]);
        assert_ne!(ds.labels, orig.labels);
        swap_labels(&mut ds, &[(1, 7), (3, 5)]);
        assert_eq!(ds, orig);
    }

    #[test]
    fn only_label_one_becomes_only_label_seven() {
        let ds = LabeledDataset::new(vec![0.5; 6], vec![1; 3], 2, 10).unwrap();
        let spec = ConceptShiftSpec {
            groups: vec![vec![(1, 7)], vec![(3, 5)]],
        };
        let mut parts = vec![ds.clone(), ds];
        let groups = apply_concept_shift(&mut parts, &spec).unwrap();
        assert_eq!(groups, vec![0, 1]);
        assert_eq!(parts[0].label_histogram()[7], 3);
        assert_eq!(parts[0].label_histogram()[1], 0);
        assert_eq!(parts[1].label_histogram()[1], 3);
        assert_eq!(parts[0].features, parts[1].features);
    }

    #[test]
    fn groups_are_contiguous_and_balanced() {
        let spec = ConceptShiftSpec {
            groups: vec![vec![], vec![], vec![]],
        };
        let groups: Vec<usize> = (0..10).map(|k| spec.group_of(k, 10)).collect();
        assert_eq!(groups, vec![0, 0, 0, 0, 1, 1, 1, 2, 2, 2]);
    }

    #[test]
    fn rejects_bad_pairs() {
        let bad = ConceptShiftSpec {
            groups: vec![vec![(1, 7), (7, 3)]],
        };
        assert!(bad.validate(10).is_err());
        assert!(ConceptShiftSpec { groups: vec![vec![(1, 10)]] }.validate(10).is_err());
        assert!(ConceptShiftSpec { groups: vec![vec![(2, 2)]] }.validate(10).is_err());
    }
}
