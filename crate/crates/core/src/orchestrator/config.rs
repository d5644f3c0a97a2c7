use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::channel::RadioConfig;
use crate::datasets::{ConceptShiftSpec, DiversityWeights, PartitionSpec};
use crate::error::{config_err, Result};
use crate::learner::TrainConfig;
use crate::mobility::MobilityConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Stationary vehicles, all within V2V range of each other.
    ParkingLot,
    Freeway,
}

/// How vehicle positions evolve between rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FleetMode {
    /// Fresh positions and speeds every round.
    Resample,
    /// Vehicles keep moving at their speed for `round_duration_s` per round.
    Persistent { round_duration_s: f64 },
}

/// The four independent randomness sources of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub fleet: u64,
    pub channel: u64,
    pub data: u64,
    pub train: u64,
}

impl Seeds {
    pub fn from_base(seed: u64) -> Self {
        let s = seed.wrapping_mul(4);
        Seeds {
            fleet: s,
            channel: s.wrapping_add(1),
            data: s.wrapping_add(2),
            train: s.wrapping_add(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    /// Gaussian class clusters; train and test sets share the class means.
    Synthetic {
        classes: usize,
        dim: usize,
        train_samples: usize,
        test_samples: usize,
    },
    /// IDX image/label file pairs (MNIST layout).
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub partition: PartitionSpec,
    pub concept_shift: ConceptShiftSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub vehicles: usize,
    /// Number of communication rounds.
    pub rounds: usize,
    /// Round after which raw updates are clustered (1-based).
    pub clustering_round: usize,
    pub max_clusters: usize,
    /// Fraction of vehicles contributing raw updates to the clustering step.
    pub clustering_fraction: f64,
    /// Collection rounds spent gathering raw updates for clustering.
    pub clustering_collection_rounds: usize,
    /// Members per cluster head.
    pub n_max: usize,
    pub fleet_mode: FleetMode,
    /// Run local training and evaluation. Off for scheduling-only sweeps.
    pub learning: bool,
    pub seeds: Seeds,
    pub mobility: MobilityConfig,
    pub radio: RadioConfig,
    pub data: DataConfig,
    pub hidden_layers: Vec<usize>,
    pub train: TrainConfig,
    pub diversity_weights: DiversityWeights,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vehicles == 0 {
            return Err(config_err("vehicles must be at least 1"));
        }
        if self.rounds == 0 {
            return Err(config_err("rounds must be at least 1"));
        }
        if !(1..=self.rounds).contains(&self.clustering_round) {
            return Err(config_err(format!(
                "clustering_round must lie in [1, rounds = {}], got {}",
                self.rounds, self.clustering_round
            )));
        }
        if self.max_clusters == 0 {
            return Err(config_err("max_clusters must be at least 1"));
        }
        if !(self.clustering_fraction > 0.0 && self.clustering_fraction <= 1.0) {
            return Err(config_err(format!(
                "clustering_fraction must lie in (0, 1], got {}",
                self.clustering_fraction
            )));
        }
        if self.clustering_collection_rounds == 0 {
            return Err(config_err("clustering_collection_rounds must be at least 1"));
        }
        if let FleetMode::Persistent { round_duration_s } = self.fleet_mode {
            if !(round_duration_s >= 0.0 && round_duration_s.is_finite()) {
                return Err(config_err("round_duration_s must be finite and non-negative"));
            }
        }
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return Err(config_err("hidden_layers must list at least one positive width"));
        }
        if self.train.batch_size == 0 || !(self.train.lr >= 0.0) {
            return Err(config_err("train.batch_size must be positive and train.lr non-negative"));
        }
        if let DataSource::Synthetic { classes, dim, train_samples, test_samples } = self.data.source {
            if classes < 2 || dim == 0 || train_samples < classes || test_samples < classes {
                return Err(config_err("synthetic data needs classes >= 2, dim >= 1 and a sample per class"));
            }
            self.data.partition.validate(train_samples)?;
            self.data.concept_shift.validate(classes)?;
        }
        if self.scenario == Scenario::Freeway {
            self.mobility.validate()?;
        }
        self.radio.validate()?;
        self.diversity_weights.validate()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Replaces all four seeds with ones derived from `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seeds = Seeds::from_base(seed);
        self
    }

    /// Stationary fleet, concept shift on two label pairs, two clusters
    /// formed at round 25 of 30.
    pub fn parking_lot() -> Self {
        let radio = RadioConfig {
            total_rbs: 2,
            ..RadioConfig::default()
        };
        ExperimentConfig {
            scenario: Scenario::ParkingLot,
            vehicles: 30,
            rounds: 30,
            clustering_round: 25,
            max_clusters: 2,
            clustering_fraction: 0.6,
            clustering_collection_rounds: 1,
            n_max: 2,
            fleet_mode: FleetMode::Resample,
            learning: true,
            seeds: Seeds::from_base(0),
            mobility: MobilityConfig::freeway(),
            radio,
            data: DataConfig {
                source: DataSource::Synthetic {
                    classes: 10,
                    dim: 20,
                    train_samples: 60_000,
                    test_samples: 10_000,
                },
                partition: PartitionSpec::default(),
                concept_shift: ConceptShiftSpec {
                    groups: vec![vec![(1, 7)], vec![(3, 5)]],
                },
            },
            hidden_layers: vec![64, 64],
            train: TrainConfig::default(),
            diversity_weights: DiversityWeights::default(),
        }
    }

    /// Six-lane, 2 km freeway with the published radio parameters (4 RBs of
    /// 180 kHz, 0.1 W, -114 dBm noise, 160 kbit model, two members per head).
    /// Relationships come from mobility only: one model, no concept shift.
    pub fn freeway() -> Self {
        ExperimentConfig {
            scenario: Scenario::Freeway,
            rounds: 50,
            clustering_round: 25,
            max_clusters: 1,
            radio: RadioConfig::default(),
            data: DataConfig {
                concept_shift: ConceptShiftSpec::none(),
                ..Self::parking_lot().data
            },
            ..Self::parking_lot()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "parking-lot" => Some(Self::parking_lot()),
            "freeway" => Some(Self::freeway()),
            _ => None,
        }
    }

    pub const PRESETS: [&'static str; 2] = ["parking-lot", "freeway"];
}
