use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ClusterAssignment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct V2vShare {
    pub vehicle: usize,
    pub head: usize,
    /// RBs of the cluster's V2V pool; fractional when members outnumber RBs.
    pub rbs: f64,
}

/// Splits each cluster's V2V pool evenly among its members, lowest ids
/// taking the remainder. When there are more members than RBs the pool is
/// time-shared equally.
pub fn allocate_v2v(assignment: &ClusterAssignment, pool: usize) -> Vec<V2vShare> {
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(v, h) in &assignment.pairs {
        clusters.entry(h).or_default().push(v);
    }
    let mut out = Vec::with_capacity(assignment.pairs.len());
    for (head, mut members) in clusters {
        members.sort_unstable();
        let m = members.len();
        for (i, vehicle) in members.into_iter().enumerate() {
            let rbs = if m > pool {
                pool as f64 / m as f64
            } else {
                (pool / m + usize::from(i < pool % m)) as f64
            };
            out.push(V2vShare { vehicle, head, rbs });
        }
    }
    out.sort_by_key(|s| s.vehicle);
    out
}

/// Smallest share any member can end up with in a cluster of at most
/// `capacity` members, used to pre-screen pairs before matching.
pub fn conservative_share(pool: usize, capacity: usize) -> f64 {
    let capacity = capacity.max(1);
    if pool >= capacity {
        (pool / capacity) as f64
    } else {
        pool as f64 / capacity as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shares(n: usize, pool: usize) -> Vec<f64> {
        let a = ClusterAssignment {
            pairs: (0..n).map(|v| (v, 0)).collect(),
        };
        allocate_v2v(&a, pool).into_iter().map(|s| s.rbs).collect()
    }

    #[test]
    fn fixtures() {
        assert_eq!(shares(1, 4), vec![4.0]);
        assert_eq!(shares(2, 4), vec![2.0, 2.0]);
        assert_eq!(shares(3, 4), vec![2.0, 1.0, 1.0]);
        assert_eq!(shares(5, 4), vec![0.8; 5]);
    }

    #[test]
    fn conservative_share_is_a_lower_bound() {
        for pool in 0..8 {
            for cap in 1..6 {
                let lb = conservative_share(pool, cap);
                for n in 1..=cap {
                    assert!(shares(n, pool).iter().all(|&s| s >= lb), "pool {pool} cap {cap} n {n}");
                }
            }
        }
    }

    #[test]
    fn clusters_are_independent() {
        let a = ClusterAssignment {
            pairs: vec![(0, 1), (2, 0), (3, 1), (5, 1)],
        };
        let s = allocate_v2v(&a, 4);
        let by_vehicle: Vec<(usize, f64)> = s.iter().map(|s| (s.vehicle, s.rbs)).collect();
        assert_eq!(by_vehicle, vec![(0, 2.0), (2, 4.0), (3, 1.0), (5, 1.0)]);
    }
}
