use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::config::{DataSource, ExperimentConfig, FleetMode, Scenario};
use super::report::{Algorithm, ClusteringSummary, RoundReport, SolverTimings, VersionMetrics};
use crate::channel::{self, rb_rate, training_time, vehicle_rb_rates};
use crate::datasets::{
    apply_concept_shift, diversity_index, load_idx, partition_shards, swap_labels, DatasetMeta, LabeledDataset,
    SyntheticTask,
};
use crate::error::{config_err, Result};
use crate::learner::{
    adjusted_rand_index, aggregate_updates, evaluate, evaluate_accuracy, fedavg, hierarchical_cluster, local_train,
    spawn_cluster_models, ModelArch, ModelParams, Update,
};
use crate::mobility::{self, spawn_fleet, spawn_parked_fleet, FleetSize, VehicleKinematics};
use crate::rng::{self, sub_seed};
use crate::scheduler::{
    allocate_v2v, compute_zeta, conservative_share, head_deadline, match_vehicles, select_heads, CandidateInfo,
    ClusterAssignment, HeadSelection, MatchInstance,
};

const CLUSTER_STREAM: u64 = 0xC1;
const VANILLA_STREAM: u64 = 0xBA;

/// Training data split over the fleet plus one test split per concept group.
#[derive(Debug, Clone)]
pub struct FederatedData {
    pub vehicles: Vec<LabeledDataset>,
    /// Concept group of every vehicle.
    pub groups: Vec<usize>,
    /// Test split of each group, with that group's labels swapped.
    pub tests: Vec<LabeledDataset>,
}

impl FederatedData {
    pub fn build(config: &ExperimentConfig) -> Result<Self> {
        let seed = config.seeds.data;
        let (mut train, mut test) = match &config.data.source {
            DataSource::Synthetic {
                classes,
                dim,
                train_samples,
                test_samples,
            } => {
                let task = SyntheticTask::new(*classes, *dim, sub_seed(seed, &[0]))?;
                (
                    task.sample(*train_samples, sub_seed(seed, &[1]))?,
                    task.sample(*test_samples, sub_seed(seed, &[2]))?,
                )
            }
            DataSource::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => (load_idx(train_images, train_labels)?, load_idx(test_images, test_labels)?),
        };
        if train.dim != test.dim {
            return Err(config_err(format!(
                "train features have {} dims, test features {}",
                train.dim, test.dim
            )));
        }
        let classes = train.num_classes.max(test.num_classes);
        train.num_classes = classes;
        test.num_classes = classes;

        let partition = partition_shards(&train, config.vehicles, &config.data.partition, sub_seed(seed, &[3]))?;
        let mut vehicles = partition.datasets;
        let shift = &config.data.concept_shift;
        let groups = apply_concept_shift(&mut vehicles, shift)?;
        let n = shift.n_shifts();
        let tests = (0..n)
            .map(|g| {
                let rows: Vec<usize> = (g..test.len()).step_by(n).collect();
                let mut split = test.subset(&rows);
                swap_labels(&mut split, shift.pairs(g));
                split
            })
            .collect();
        Ok(FederatedData { vehicles, groups, tests })
    }

    pub fn num_groups(&self) -> usize {
        self.tests.len()
    }
}

/// Positions, per-RB uplink rates and everything else the server sees at
/// the start of a round.
#[derive(Debug, Clone)]
pub struct RoundSnapshot {
    pub fleet: Vec<VehicleKinematics>,
    pub candidates: Vec<CandidateInfo>,
    /// V2V channel gains between every pair of vehicles.
    pub v2v_gains: Vec<Vec<f64>>,
}

/// The server's decision for a round.
#[derive(Debug, Clone, Default)]
pub struct Schedule {
    pub selection: HeadSelection,
    /// Head vehicle ids, ascending.
    pub heads: Vec<usize>,
    /// `(member, head)` vehicle ids of every matched pair.
    pub matched: Vec<(usize, usize)>,
    /// Matched pairs whose upload fits the deadline with the real V2V share.
    pub uploading: Vec<(usize, usize)>,
    pub match_objective: f64,
    pub timings: SolverTimings,
}

pub struct Simulation {
    config: ExperimentConfig,
    algorithm: Algorithm,
    data: FederatedData,
    models: Vec<ModelParams>,
    /// Preferred model version of every vehicle.
    preferred: Vec<u32>,
    /// Local accuracy of every vehicle on every model version.
    scores: Vec<Vec<f64>>,
    last_upload: Vec<Option<usize>>,
    fleet: Vec<VehicleKinematics>,
    round: usize,
}

impl Simulation {
    pub fn new(config: ExperimentConfig, algorithm: Algorithm) -> Result<Self> {
        config.validate()?;
        let data = FederatedData::build(&config)?;
        let input = data.tests[0].dim;
        let classes = data.tests[0].num_classes;
        let arch = ModelArch::mlp(input, &config.hidden_layers, classes)?;
        let model = ModelParams::init(arch, sub_seed(config.seeds.train, &[0]))?;
        let k = config.vehicles;
        Ok(Simulation {
            algorithm,
            data,
            models: vec![model],
            preferred: vec![0; k],
            scores: vec![vec![1.0]; k],
            last_upload: vec![None; k],
            fleet: Vec::new(),
            round: 0,
            config,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn data(&self) -> &FederatedData {
        &self.data
    }

    pub fn models(&self) -> &[ModelParams] {
        &self.models
    }

    pub fn preferences(&self) -> &[u32] {
        &self.preferred
    }

    /// Rounds completed so far.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn is_finished(&self) -> bool {
        self.round >= self.config.rounds
    }

    fn place_fleet(&mut self, round: usize) -> Result<()> {
        let cfg = &self.config;
        let spawn = |r: usize| -> Result<Vec<VehicleKinematics>> {
            let seed = sub_seed(cfg.seeds.fleet, &[r as u64]);
            match cfg.scenario {
                Scenario::Freeway => spawn_fleet(&cfg.mobility, FleetSize::Count(cfg.vehicles), seed),
                Scenario::ParkingLot => spawn_parked_fleet(&cfg.mobility, cfg.vehicles, seed),
            }
        };
        match cfg.fleet_mode {
            FleetMode::Resample => self.fleet = spawn(round)?,
            FleetMode::Persistent { round_duration_s } => {
                if self.fleet.is_empty() {
                    self.fleet = spawn(1)?;
                } else {
                    mobility::advance(&mut self.fleet, round_duration_s, &cfg.mobility);
                }
            }
        }
        Ok(())
    }

    /// Places the fleet for round `round`, draws the channel and builds the
    /// candidate list.
    pub fn snapshot(&mut self, round: usize) -> Result<RoundSnapshot> {
        self.place_fleet(round)?;
        let cfg = &self.config;
        let radio = &cfg.radio;
        let realization = channel::draw_gains(
            &self.fleet,
            &cfg.mobility,
            radio,
            sub_seed(cfg.seeds.channel, &[round as u64, 0]),
        );
        let v2v_gains = channel::draw_v2v_gains(&self.fleet, radio, sub_seed(cfg.seeds.channel, &[round as u64, 1]));
        let metas: Vec<DatasetMeta> = self
            .data
            .vehicles
            .iter()
            .zip(&self.last_upload)
            .map(|(ds, last)| DatasetMeta {
                size: ds.len(),
                label_entropy: ds.label_entropy(),
                age: (round - last.unwrap_or(0)) as u32,
            })
            .collect();
        let diversity = diversity_index(&metas, &cfg.diversity_weights)?;
        let candidates = (0..cfg.vehicles)
            .map(|k| {
                let t_train = training_time(self.data.vehicles[k].len(), cfg.train.epochs, radio.per_sample_cost_s);
                let standing = mobility::standing_time(&self.fleet[k], &cfg.mobility)?;
                Ok(CandidateInfo::new(
                    k,
                    diversity[k],
                    vehicle_rb_rates(&realization, k, radio),
                    t_train,
                    standing,
                    radio,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RoundSnapshot {
            fleet: self.fleet.clone(),
            candidates,
            v2v_gains,
        })
    }

    /// V2V rate from `v` to `h` over `share` RBs.
    fn v2v_rate(&self, snap: &RoundSnapshot, v: usize, h: usize, share: f64) -> f64 {
        let radio = &self.config.radio;
        let gain = snap.v2v_gains[v][h];
        if share <= 0.0 || gain <= 0.0 {
            return 0.0;
        }
        share * rb_rate(radio.transmit_power_w, gain, radio.noise_w(), radio.rb_bandwidth_hz).unwrap_or(0.0)
    }

    /// Head selection, member matching and the V2V deadline check.
    pub fn schedule(&self, snap: &RoundSnapshot) -> Schedule {
        let cfg = &self.config;
        let radio = &cfg.radio;
        let cands = &snap.candidates;

        let t0 = Instant::now();
        let selection = select_heads(cands, radio.total_rbs);
        let head_selection_s = t0.elapsed().as_secs_f64();

        let mut heads = selection.head_ids();
        heads.sort_unstable();
        let members: Vec<usize> = (0..cfg.vehicles).filter(|k| !selection.is_head(*k)).collect();
        let single_model = self.models.len() == 1;
        let weights: Vec<Vec<f64>> = members
            .iter()
            .map(|&v| {
                heads
                    .iter()
                    .map(|&h| {
                        let version = self.preferred[h];
                        if single_model {
                            1.0
                        } else if self.preferred[v] == version {
                            self.scores[v][version as usize]
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let screen_share = conservative_share(radio.v2v_rbs, cfg.n_max);
        let upload_time = |v: usize, h: usize, share: f64| radio.model_size_bits / self.v2v_rate(snap, v, h, share);
        let t_train: Vec<f64> = members.iter().map(|&v| cands[v].t_train).collect();
        let t_up: Vec<Vec<f64>> = members
            .iter()
            .map(|&v| heads.iter().map(|&h| upload_time(v, h, screen_share)).collect())
            .collect();
        let llt: Vec<Vec<f64>> = members
            .iter()
            .map(|&v| {
                heads
                    .iter()
                    .map(|&h| mobility::link_lifetime(&snap.fleet[v], &snap.fleet[h], &cfg.mobility))
                    .collect()
            })
            .collect();
        let deadlines: Vec<f64> = heads.iter().map(|&h| head_deadline(cands[h].t_train, radio.delta_s)).collect();
        let inst = MatchInstance {
            zeta: compute_zeta(&t_train, &t_up, &llt, &deadlines),
            weights,
            capacity: cfg.n_max,
        };

        let t1 = Instant::now();
        let assignment = match_vehicles(&inst);
        let matching_s = t1.elapsed().as_secs_f64();
        let match_objective = inst.objective(&assignment.pairs);

        let matched: Vec<(usize, usize)> = assignment.pairs.iter().map(|&(v, h)| (members[v], heads[h])).collect();
        let shares = allocate_v2v(&ClusterAssignment { pairs: matched.clone() }, radio.v2v_rbs);
        let uploading = shares
            .iter()
            .filter(|s| {
                let (v, h) = (s.vehicle, s.head);
                let limit = mobility::link_lifetime(&snap.fleet[v], &snap.fleet[h], &cfg.mobility)
                    .min(head_deadline(cands[h].t_train, radio.delta_s));
                cands[v].t_train + upload_time(v, h, s.rbs) <= limit
            })
            .map(|s| (s.vehicle, s.head))
            .collect();

        Schedule {
            selection,
            heads,
            matched,
            uploading,
            match_objective,
            timings: SolverTimings {
                head_selection_s,
                matching_s,
            },
        }
    }

    /// Random feasible vehicles upload directly until the RB pool runs out.
    fn vanilla_schedule(&self, snap: &RoundSnapshot, round: usize) -> HeadSelection {
        let mut order: Vec<&CandidateInfo> = snap.candidates.iter().filter(|c| c.cost.is_some()).collect();
        order.shuffle(&mut rng::derive(self.config.seeds.train, &[round as u64, VANILLA_STREAM]));
        let mut free: Vec<usize> = (0..self.config.radio.total_rbs).collect();
        let mut selection = HeadSelection::default();
        for c in order {
            if c.cost.is_some_and(|cost| cost > free.len()) {
                continue;
            }
            let r_min = c.r_min.expect("feasible candidate has a rate target");
            let usable = free.iter().copied().filter(|&q| q < c.rb_rates.len());
            if let Some(rbs) = channel::greedy_prefix(r_min, &c.rb_rates, usable) {
                free.retain(|q| !rbs.contains(q));
                selection.heads.push(crate::scheduler::HeadAssignment {
                    vehicle_id: c.vehicle_id,
                    rbs,
                });
            }
        }
        selection
    }

    fn train_all(&self, jobs: &[(usize, u32)], round: usize) -> Result<Vec<Update>> {
        let cfg = &self.config;
        jobs.par_iter()
            .map(|&(vehicle, version)| {
                local_train(
                    &self.models[version as usize],
                    &self.data.vehicles[vehicle],
                    &cfg.train,
                    vehicle,
                    sub_seed(cfg.seeds.train, &[round as u64, vehicle as u64]),
                )
            })
            .collect()
    }

    /// Runs the next round and returns its report.
    pub fn step(&mut self) -> Result<RoundReport> {
        if self.is_finished() {
            return Err(config_err("all configured rounds have been run"));
        }
        let round = self.round + 1;
        let snap = self.snapshot(round)?;
        let learning = self.config.learning;
        let len = self.models[0].theta.len();

        let (schedule, participants) = match self.algorithm {
            Algorithm::Cvfl => {
                let schedule = self.schedule(&snap);
                let participants: Vec<usize> = schedule
                    .heads
                    .iter()
                    .copied()
                    .chain(schedule.uploading.iter().map(|&(v, _)| v))
                    .collect();
                if learning {
                    let jobs: Vec<(usize, u32)> = schedule
                        .heads
                        .iter()
                        .map(|&h| (h, self.preferred[h]))
                        .chain(schedule.uploading.iter().map(|&(v, h)| (v, self.preferred[h])))
                        .collect();
                    let updates = self.train_all(&jobs, round)?;
                    let mut per_version: Vec<Vec<Update>> = vec![Vec::new(); self.models.len()];
                    for &h in &schedule.heads {
                        let version = self.preferred[h];
                        let cluster: Vec<Update> = updates
                            .iter()
                            .zip(&jobs)
                            .filter(|(_, &(v, _))| v == h || schedule.uploading.contains(&(v, h)))
                            .map(|(u, _)| u.clone())
                            .collect();
                        per_version[version as usize].push(aggregate_updates(version, len, &cluster, h)?);
                    }
                    for (model, ups) in self.models.iter_mut().zip(&per_version) {
                        *model = fedavg(model, ups)?;
                    }
                }
                (schedule, participants)
            }
            Algorithm::Vanilla => {
                let selection = self.vanilla_schedule(&snap, round);
                let participants = selection.head_ids();
                if learning {
                    let jobs: Vec<(usize, u32)> = participants.iter().map(|&v| (v, 0)).collect();
                    let updates = self.train_all(&jobs, round)?;
                    self.models[0] = fedavg(&self.models[0], &updates)?;
                }
                let schedule = Schedule {
                    selection,
                    ..Schedule::default()
                };
                (schedule, participants)
            }
        };
        for &v in &participants {
            self.last_upload[v] = Some(round);
        }
        self.round = round;

        let clustering = if self.algorithm == Algorithm::Cvfl
            && learning
            && round == self.config.clustering_round
            && self.config.max_clusters >= 2
            && self.models.len() == 1
        {
            self.cluster_updates(round)?
        } else {
            None
        };

        let (accuracy, loss, versions) = if learning {
            let (acc, loss, versions) = self.evaluate()?;
            (Some(acc), Some(loss), versions)
        } else {
            (None, None, Vec::new())
        };
        let is_cvfl = self.algorithm == Algorithm::Cvfl;
        Ok(RoundReport {
            round,
            algorithm: self.algorithm,
            vehicles: self.config.vehicles,
            heads: if is_cvfl { schedule.heads.clone() } else { Vec::new() },
            members_matched: schedule.matched.len(),
            members_dropped: schedule.matched.len() - schedule.uploading.len(),
            participants: participants.len(),
            head_objective: if is_cvfl { schedule.selection.objective(&snap.candidates) } else { 0.0 },
            match_objective: schedule.match_objective,
            rbs_used: schedule.selection.rbs_used(),
            accuracy,
            loss,
            versions,
            clustering,
            timings: schedule.timings,
        })
    }

    /// Clusters raw updates from a seeded fraction of the fleet, spawns one
    /// model per cluster and lets every vehicle pick its best model.
    fn cluster_updates(&mut self, round: usize) -> Result<Option<ClusteringSummary>> {
        let cfg = &self.config;
        let k = cfg.vehicles;
        let per_round = ((cfg.clustering_fraction * k as f64).ceil() as usize).clamp(1, k);
        let mut pool: Vec<usize> = (0..k).collect();
        let mut contributors = Vec::new();
        for c in 0..cfg.clustering_collection_rounds {
            let mut rng = rng::derive(cfg.seeds.train, &[round as u64, CLUSTER_STREAM, c as u64]);
            pool.shuffle(&mut rng);
            let take = per_round.min(pool.len());
            let mut chosen: Vec<usize> = pool.drain(..take).collect();
            chosen.sort_unstable();
            contributors.extend(chosen);
        }
        if contributors.len() < 2 {
            log::warn!("clustering step got {} updates; keeping a single model", contributors.len());
            return Ok(None);
        }
        let base = self.models[0].clone();
        let updates: Vec<Update> = contributors
            .par_iter()
            .map(|&v| {
                local_train(
                    &base,
                    &self.data.vehicles[v],
                    &cfg.train,
                    v,
                    sub_seed(cfg.seeds.train, &[round as u64, CLUSTER_STREAM, v as u64]),
                )
            })
            .collect::<Result<_>>()?;
        let partition = hierarchical_cluster(&updates, cfg.max_clusters);
        let models = spawn_cluster_models(&base, &updates, &partition)?;
        let truth: Vec<usize> = contributors.iter().map(|&v| self.data.groups[v]).collect();
        let ari = adjusted_rand_index(&partition.assignment, &truth);

        let scores: Vec<Vec<f64>> = self
            .data
            .vehicles
            .par_iter()
            .map(|ds| models.iter().map(|m| evaluate_accuracy(m, ds)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        self.preferred = scores.iter().map(|s| argmax(s) as u32).collect();
        self.scores = scores;
        self.models = models;
        log::info!(
            "round {round}: {} updates clustered into {} models (ARI {ari:.3})",
            updates.len(),
            partition.num_clusters
        );
        Ok(Some(ClusteringSummary {
            contributors,
            assignment: partition.assignment,
            num_clusters: partition.num_clusters,
            ari,
            preferences: self.preferred.clone(),
        }))
    }

    /// Model version serving each concept group: the one most of the
    /// group's vehicles prefer, lowest version on ties.
    pub fn serving_versions(&self) -> Vec<u32> {
        (0..self.data.num_groups())
            .map(|g| {
                let mut votes = vec![0usize; self.models.len()];
                for (v, &p) in self.preferred.iter().enumerate() {
                    if self.data.groups[v] == g {
                        votes[p as usize] += 1;
                    }
                }
                let best = votes.iter().copied().max().unwrap_or(0);
                votes.iter().position(|&n| n == best).unwrap_or(0) as u32
            })
            .collect()
    }

    /// Headline accuracy and loss plus per-version metrics.
    pub fn evaluate(&self) -> Result<(f64, f64, Vec<VersionMetrics>)> {
        let tests = &self.data.tests;
        let results: Vec<Vec<(f64, f64)>> = self
            .models
            .par_iter()
            .map(|m| tests.iter().map(|t| evaluate(m, t)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let total: usize = tests.iter().map(LabeledDataset::len).sum();
        let versions: Vec<VersionMetrics> = self
            .models
            .iter()
            .zip(&results)
            .map(|(m, r)| VersionMetrics {
                version: m.version,
                group_accuracy: r.iter().map(|&(a, _)| a).collect(),
                loss: r.iter().zip(tests).map(|(&(_, l), t)| l * t.len() as f64).sum::<f64>() / total as f64,
            })
            .collect();
        let serving = self.serving_versions();
        let n = serving.len() as f64;
        let accuracy = serving.iter().enumerate().map(|(g, &v)| results[v as usize][g].0).sum::<f64>() / n;
        let loss = serving.iter().enumerate().map(|(g, &v)| results[v as usize][g].1).sum::<f64>() / n;
        Ok((accuracy, loss, versions))
    }

    /// Runs every remaining round, handing each report to `on_report`.
    pub fn run(&mut self, mut on_report: impl FnMut(&RoundReport) -> Result<()>) -> Result<()> {
        while !self.is_finished() {
            let report = self.step()?;
            on_report(&report)?;
        }
        Ok(())
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Runs a whole experiment and collects the reports.
pub fn run_experiment(config: ExperimentConfig, algorithm: Algorithm) -> Result<(Vec<RoundReport>, Vec<ModelParams>)> {
    let mut sim = Simulation::new(config, algorithm)?;
    let mut reports = Vec::new();
    sim.run(|r| {
        reports.push(r.clone());
        Ok(())
    })?;
    Ok((reports, sim.models))
}
