use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Cluster heads, V2V members and clustered models.
    Cvfl,
    /// A random feasible subset uploads straight to the server.
    Vanilla,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cvfl => "cvfl",
            Algorithm::Vanilla => "vanilla",
        }
    }
}

/// Test metrics of one model version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionMetrics {
    pub version: u32,
    /// Accuracy on each concept group's test split.
    pub group_accuracy: Vec<f64>,
    /// Cross-entropy over the whole test set.
    pub loss: f64,
}

/// Outcome of the update-clustering step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    /// Vehicles whose raw updates were clustered, in cluster-input order.
    pub contributors: Vec<usize>,
    pub assignment: Vec<usize>,
    pub num_clusters: usize,
    /// Agreement with the true concept groups of the contributors.
    pub ari: f64,
    /// Preferred version of every vehicle.
    pub preferences: Vec<u32>,
}

/// One line of `rounds.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub algorithm: Algorithm,
    pub vehicles: usize,
    pub heads: Vec<usize>,
    /// Members attached by the matching.
    pub members_matched: usize,
    /// Matched members whose upload missed the deadline with the V2V share
    /// they actually received.
    pub members_dropped: usize,
    /// Vehicles whose update reached the server this round.
    pub participants: usize,
    /// Summed diversity of the heads.
    pub head_objective: f64,
    /// Summed preference weight of the matched pairs.
    pub match_objective: f64,
    pub rbs_used: usize,
    /// Headline accuracy: each concept group scored with its preferred model.
    pub accuracy: Option<f64>,
    pub loss: Option<f64>,
    pub versions: Vec<VersionMetrics>,
    pub clustering: Option<ClusteringSummary>,
    /// Wall-clock spent in the two solvers, excluded from the JSON form so
    /// that reports stay byte-identical across runs.
    #[serde(skip)]
    pub timings: SolverTimings,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverTimings {
    pub head_selection_s: f64,
    pub matching_s: f64,
}

/// Column order of `summary.csv`.
pub const SUMMARY_COLUMNS: [&str; 9] = [
    "algorithm",
    "round",
    "vehicles",
    "heads",
    "members",
    "participants",
    "rbs_used",
    "accuracy",
    "loss",
];

impl RoundReport {
    /// Cells in [`SUMMARY_COLUMNS`] order. Skipped learning leaves the last
    /// two empty.
    pub fn summary_row(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
        vec![
            self.algorithm.name().to_string(),
            self.round.to_string(),
            self.vehicles.to_string(),
            self.heads.len().to_string(),
            (self.members_matched - self.members_dropped).to_string(),
            self.participants.to_string(),
            self.rbs_used.to_string(),
            opt(self.accuracy),
            opt(self.loss),
        ]
    }
}
