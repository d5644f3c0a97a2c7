use serde::{Deserialize, Serialize};

use super::Update;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPartition {
    /// Cluster id of each update; ids are contiguous from 0 and numbered by
    /// the smallest update index they contain.
    pub assignment: Vec<usize>,
    pub num_clusters: usize,
}

impl ClusterPartition {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == cluster).collect()
    }
}

/// Cosine of the angle between two parameter changes. A zero vector has no
/// direction; its similarity to anything is 0.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "cosine similarity of vectors with different lengths");
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        log::debug!("cosine similarity with a zero-norm update; using 0");
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Agglomerative clustering of updates on the cosine distance `1 - sim`
/// with average linkage, merging until `max_clusters` remain. Ties go to
/// the lowest `(i, j)` cluster pair.
pub fn hierarchical_cluster(updates: &[Update], max_clusters: usize) -> ClusterPartition {
    let vectors: Vec<&[f64]> = updates.iter().map(|u| u.delta.as_slice()).collect();
    cluster_vectors(&vectors, max_clusters)
}

pub(crate) fn cluster_vectors(vectors: &[&[f64]], max_clusters: usize) -> ClusterPartition {
    let n = vectors.len();
    let target = max_clusters.max(1);
    let dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| 1.0 - cosine_similarity(vectors[i], vectors[j])).collect())
        .collect();

    // kept ordered by smallest member
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    while clusters.len() > target {
        let mut best = (0, 1, f64::INFINITY);
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let d = average_linkage(&dist, &clusters[i], &clusters[j]);
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        let (i, j, _) = best;
        let merged = clusters.remove(j);
        clusters[i].extend(merged);
        clusters[i].sort_unstable();
    }

    let mut assignment = vec![0; n];
    for (c, members) in clusters.iter().enumerate() {
        for &m in members {
            assignment[m] = c;
        }
    }
    ClusterPartition {
        assignment,
        num_clusters: clusters.len(),
    }
}

fn average_linkage(dist: &[Vec<f64>], a: &[usize], b: &[usize]) -> f64 {
    let total: f64 = a.iter().flat_map(|&i| b.iter().map(move |&j| dist[i][j])).sum();
    total / (a.len() * b.len()) as f64
}

/// Chance-corrected agreement between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings of different lengths");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let comb2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&c| comb2(c)).sum();
    let rows: f64 = table.iter().map(|r| comb2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| comb2(table.iter().map(|r| r[j]).sum())).sum();
    let total = comb2(n as u64);
    if total == 0.0 {
        return 1.0;
    }
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if max == expected {
        // both labelings trivial (one cluster, or all singletons)
        return 1.0;
    }
    (index - expected) / (max - expected)
}
