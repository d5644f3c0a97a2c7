use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::report::Algorithm;
use super::sim::Simulation;
use crate::error::{config_err, Result};

/// Grid over RB pool sizes and model sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub total_rbs: Vec<usize>,
    pub model_size_bits: Vec<f64>,
    pub repeats: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            total_rbs: vec![2, 3, 4],
            model_size_bits: vec![160e3, 320e3, 640e3],
            repeats: 5,
        }
    }
}

/// Scheduling statistics of one grid cell over its repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub total_rbs: usize,
    pub model_size_bits: f64,
    pub repeats: usize,
    pub heads_mean: f64,
    pub heads_std: f64,
    pub participants_mean: f64,
    pub participants_std: f64,
}

pub const SWEEP_COLUMNS: [&str; 7] = [
    "total_rbs",
    "model_size_bits",
    "repeats",
    "heads_mean",
    "heads_std",
    "participants_mean",
    "participants_std",
];

impl CellStats {
    pub fn row(&self) -> Vec<String> {
        vec![
            self.total_rbs.to_string(),
            self.model_size_bits.to_string(),
            self.repeats.to_string(),
            format!("{:.4}", self.heads_mean),
            format!("{:.4}", self.heads_std),
            format!("{:.4}", self.participants_mean),
            format!("{:.4}", self.participants_std),
        ]
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Mean heads and participants per round for one run, scheduling only.
pub fn schedule_run(config: ExperimentConfig) -> Result<(f64, f64)> {
    let rounds = config.rounds as f64;
    let mut sim = Simulation::new(ExperimentConfig { learning: false, ..config }, Algorithm::Cvfl)?;
    let (mut heads, mut participants) = (0usize, 0usize);
    sim.run(|r| {
        heads += r.heads.len();
        participants += r.participants;
        Ok(())
    })?;
    Ok((heads as f64 / rounds, participants as f64 / rounds))
}

/// Runs one cell: repeat `i` uses base seed `seed + i`.
pub fn sweep_cell(base: &ExperimentConfig, total_rbs: usize, model_size_bits: f64, repeats: usize, seed: u64) -> Result<CellStats> {
    if repeats == 0 {
        return Err(config_err("repeats must be at least 1"));
    }
    let runs = (0..repeats as u64)
        .into_par_iter()
        .map(|i| {
            let mut cfg = base.clone().with_seed(seed.wrapping_add(i));
            cfg.radio.total_rbs = total_rbs;
            cfg.radio.model_size_bits = model_size_bits;
            cfg.validate()?;
            schedule_run(cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let heads: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let participants: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let (heads_mean, heads_std) = mean_std(&heads);
    let (participants_mean, participants_std) = mean_std(&participants);
    Ok(CellStats {
        total_rbs,
        model_size_bits,
        repeats,
        heads_mean,
        heads_std,
        participants_mean,
        participants_std,
    })
}

/// All cells of the grid, RB-major.
pub fn run_sweep(base: &ExperimentConfig, spec: &SweepSpec, seed: u64) -> Result<Vec<CellStats>> {
    if spec.total_rbs.is_empty() || spec.model_size_bits.is_empty() {
        return Err(config_err("sweep grid has an empty axis"));
    }
    let cells: Vec<(usize, f64)> = spec
        .total_rbs
        .iter()
        .flat_map(|&q| spec.model_size_bits.iter().map(move |&s| (q, s)))
        .collect();
    cells
        .into_par_iter()
        .map(|(q, s)| sweep_cell(base, q, s, spec.repeats, seed))
        .collect()
}
