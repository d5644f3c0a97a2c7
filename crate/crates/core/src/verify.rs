//! Oracle suites: solvers checked against brute force, gradients against
//! finite differences and clustering against planted groups.
//!
//! The solver under test is a parameter so that a deliberately broken
//! solver can be shown to fail.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::datasets::LabeledDataset;
use crate::learner::{
    adjusted_rand_index, hierarchical_cluster, loss, loss_and_gradient, relu_margin, ModelArch, ModelParams,
    Update,
};
use crate::rng::{self, SimRng};
use crate::scheduler::oracle::{exhaustive_head_selection, exhaustive_matching};
use crate::scheduler::{match_vehicles, select_heads, CandidateInfo, ClusterAssignment, HeadSelection, MatchInstance};

pub type MatchSolver = fn(&MatchInstance) -> ClusterAssignment;
pub type HeadSolver = fn(&[CandidateInfo], usize) -> HeadSelection;

pub const SUITES: [&str; 4] = ["knapsack", "matching", "gradients", "clustering"];

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
    /// Suite-specific figure of merit (mean ratio, max error, ...).
    pub metric: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Random instance with dyadic weights, so objective sums are exact.
pub fn random_match_instance(rng: &mut SimRng) -> MatchInstance {
    let nv = rng.random_range(0..=8);
    let nh = rng.random_range(0..=4);
    let capacity = rng.random_range(0..=3);
    let weights = (0..nv)
        .map(|_| (0..nh).map(|_| rng.random_range(0..=256) as f64 / 256.0).collect())
        .collect();
    let zeta = (0..nv).map(|_| (0..nh).map(|_| rng.random_bool(0.7)).collect()).collect();
    MatchInstance {
        weights,
        zeta,
        capacity,
    }
}

pub fn verify_matching_with(solver: MatchSolver, instances: usize, seed: u64) -> SuiteReport {
    let mut rng = rng::derive(seed, &[0x3A7C]);
    let mut failures = Vec::new();
    for i in 0..instances {
        let inst = random_match_instance(&mut rng);
        let got = solver(&inst);
        let violations = got.violations(&inst);
        if !violations.is_empty() {
            failures.push(format!("instance {i}: {}", violations.join("; ")));
            continue;
        }
        let (best, _) = exhaustive_matching(&inst);
        let value = inst.objective(&got.pairs);
        if value != best {
            failures.push(format!("instance {i}: objective {value}, optimum {best}"));
        }
    }
    SuiteReport {
        name: "matching",
        cases: instances,
        failures,
        metric: 0.0,
    }
}

/// Candidates with random per-RB rates, rate targets and diversities.
pub fn random_head_instance(rng: &mut SimRng) -> (Vec<CandidateInfo>, usize) {
    let total = rng.random_range(1..=4);
    let k = rng.random_range(1..=8);
    let candidates = (0..k)
        .map(|id| {
            let rates: Vec<f64> = (0..total).map(|_| rng.random_range(0.1..1.0)).collect();
            let r_min = rng.random_range(0.05..2.0);
            CandidateInfo::from_rates(id, rng.random_range(0.0..1.0), rates, r_min, total)
        })
        .collect();
    (candidates, total)
}

/// Checks feasibility, the single-item bound and the optimum bound; the
/// metric is the mean greedy/optimal ratio.
pub fn check_head_selection(
    solver: HeadSolver,
    candidates: &[CandidateInfo],
    total_rbs: usize,
) -> std::result::Result<Option<f64>, String> {
    let got = solver(candidates, total_rbs);
    let violations = got.violations(candidates, total_rbs);
    if !violations.is_empty() {
        return Err(violations.join("; "));
    }
    let value = got.objective(candidates);
    let best_single = candidates
        .iter()
        .filter(|c| c.cost.is_some_and(|q| q <= total_rbs))
        .max_by(|a, b| {
            let ra = a.diversity / a.cost.unwrap() as f64;
            let rb = b.diversity / b.cost.unwrap() as f64;
            ra.total_cmp(&rb).then(a.diversity.total_cmp(&b.diversity)).then(b.vehicle_id.cmp(&a.vehicle_id))
        })
        .map_or(0.0, |c| c.diversity);
    if value < best_single {
        return Err(format!("objective {value} below best single item {best_single}"));
    }
    let optimum = exhaustive_head_selection(candidates, total_rbs);
    if value > optimum + 1e-9 {
        return Err(format!("objective {value} above the optimum {optimum}"));
    }
    Ok((optimum > 0.0).then(|| value / optimum))
}

pub fn verify_knapsack_with(solver: HeadSolver, instances: usize, seed: u64) -> SuiteReport {
    let mut rng = rng::derive(seed, &[0x4EAD]);
    let mut failures = Vec::new();
    let mut ratios = Vec::new();
    for i in 0..instances {
        let (cands, total) = random_head_instance(&mut rng);
        match check_head_selection(solver, &cands, total) {
            Ok(ratio) => ratios.extend(ratio),
            Err(e) => failures.push(format!("instance {i}: {e}")),
        }
    }
    let metric = if ratios.is_empty() { 1.0 } else { ratios.iter().sum::<f64>() / ratios.len() as f64 };
    SuiteReport {
        name: "knapsack",
        cases: instances,
        failures,
        metric,
    }
}

/// Largest elementwise relative error between the analytic gradient and
/// central differences.
pub fn gradient_check_error(params: &ModelParams, ds: &LabeledDataset, step: f64) -> f64 {
    let rows: Vec<usize> = (0..ds.len()).collect();
    let (_, grad) = loss_and_gradient(params, ds, &rows).expect("dimensions checked by caller");
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for i in 0..params.theta.len() {
        let t = params.theta[i];
        probe.theta[i] = t + step;
        let up = loss(&probe, ds).expect("same dimensions");
        probe.theta[i] = t - step;
        let down = loss(&probe, ds).expect("same dimensions");
        probe.theta[i] = t;
        let fd = (up - down) / (2.0 * step);
        let scale = grad[i].abs().max(fd.abs()).max(1e-8);
        worst = worst.max((grad[i] - fd).abs() / scale);
    }
    worst
}

/// Smallest hidden pre-activation magnitude a gradient fixture may have, so
/// that central differences never straddle a ReLU kink.
pub const FIXTURE_RELU_MARGIN: f64 = 1e-3;

/// Two-hidden-layer MLP with under 500 parameters and a 10-sample dataset,
/// redrawn until it sits at least [`FIXTURE_RELU_MARGIN`] away from any kink.
pub fn gradient_fixture(seed: u64) -> (ModelParams, LabeledDataset) {
    let arch = ModelArch::mlp(6, &[12, 10], 4).expect("valid widths");
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let labels: Vec<usize> = (0..10).map(|i| i % 4).collect();
    for attempt in 0u64.. {
        let params = ModelParams::init(arch.clone(), rng::sub_seed(seed, &[attempt])).expect("valid arch");
        let mut rng = rng::derive(seed, &[0x6AD, attempt]);
        let features = (0..60).map(|_| normal.sample(&mut rng)).collect();
        let ds = LabeledDataset::new(features, labels.clone(), 6, 4).expect("consistent fixture");
        if relu_margin(&params, &ds).expect("same dimensions") >= FIXTURE_RELU_MARGIN {
            return (params, ds);
        }
    }
    unreachable!("attempt counter is unbounded")
}

pub fn verify_gradients(seeds: usize, seed: u64) -> SuiteReport {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for s in 0..seeds as u64 {
        let (params, ds) = gradient_fixture(rng::sub_seed(seed, &[s]));
        let err = gradient_check_error(&params, &ds, 1e-4);
        worst = worst.max(err);
        if !(err < 1e-4) {
            failures.push(format!("seed {s}: relative error {err:.3e}"));
        }
    }
    SuiteReport {
        name: "gradients",
        cases: seeds,
        failures,
        metric: worst,
    }
}

/// Updates drawn around one random direction per planted group.
pub fn planted_updates(rng: &mut SimRng, groups: usize, per_group: usize, dim: usize, noise: f64) -> (Vec<Update>, Vec<usize>) {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let centers: Vec<Vec<f64>> = (0..groups).map(|_| (0..dim).map(|_| normal.sample(rng)).collect()).collect();
    let mut updates = Vec::new();
    let mut truth = Vec::new();
    for i in 0..groups * per_group {
        let g = i % groups;
        let scale = rng.random_range(0.5..2.0);
        let delta = centers[g].iter().map(|c| scale * (c + noise * normal.sample(rng))).collect();
        updates.push(Update {
            vehicle_id: i,
            model_version: 0,
            delta,
            num_samples: 1,
        });
        truth.push(g);
    }
    (updates, truth)
}

pub fn verify_clustering(instances: usize, seed: u64) -> SuiteReport {
    let mut rng = rng::derive(seed, &[0xC1u64]);
    let mut failures = Vec::new();
    for i in 0..instances {
        let groups = rng.random_range(2..=4);
        let (updates, truth) = planted_updates(&mut rng, groups, 5, 50, 0.1);
        let partition = hierarchical_cluster(&updates, groups);
        let ari = adjusted_rand_index(&partition.assignment, &truth);
        if ari != 1.0 {
            failures.push(format!("instance {i}: ARI {ari:.3} with {groups} planted groups"));
        }
    }
    SuiteReport {
        name: "clustering",
        cases: instances,
        failures,
        metric: 0.0,
    }
}

/// Runs the named suite with the shipped solvers.
pub fn run_suite(name: &str, seed: u64) -> Option<SuiteReport> {
    match name {
        "knapsack" => Some(verify_knapsack_with(select_heads, 200, seed)),
        "matching" => Some(verify_matching_with(match_vehicles, 200, seed)),
        "gradients" => Some(verify_gradients(5, seed)),
        "clustering" => Some(verify_clustering(50, seed)),
        _ => None,
    }
}
