use serde::{Deserialize, Serialize};

use crate::channel::{self, greedy_prefix, RbCost, RadioConfig};

/// Everything the server knows about a vehicle when picking heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateInfo {
    pub vehicle_id: usize,
    /// Diversity index.
    pub diversity: f64,
    /// Uplink rate on each RB of the pool, bits/s.
    pub rb_rates: Vec<f64>,
    /// Rate needed to meet the upload deadline; `None` when the deadline has
    /// already passed.
    pub r_min: Option<f64>,
    /// RB count when the whole pool is available; `None` if infeasible.
    pub cost: Option<usize>,
    pub chosen_rbs: Vec<usize>,
    pub t_train: f64,
    pub standing_time: f64,
}

impl CandidateInfo {
    pub fn new(
        vehicle_id: usize,
        diversity: f64,
        rb_rates: Vec<f64>,
        t_train: f64,
        standing_time: f64,
        radio: &RadioConfig,
    ) -> Self {
        let budget = channel::budget_from_standing(standing_time, t_train, radio);
        let rbs = &rb_rates[..radio.total_rbs.min(rb_rates.len())];
        let (r_min, cost, chosen_rbs) = match channel::min_rate_and_cost(budget, rbs, radio) {
            RbCost::Feasible { r_min, cost, rbs } => (Some(r_min), Some(cost), rbs),
            RbCost::Infeasible => (channel::min_rate(radio.model_size_bits, budget), None, Vec::new()),
        };
        CandidateInfo {
            vehicle_id,
            diversity,
            rb_rates,
            r_min,
            cost,
            chosen_rbs,
            t_train,
            standing_time,
        }
    }

    /// Candidate with a given rate requirement, cost computed over
    /// `total_rbs` RBs.
    pub fn from_rates(vehicle_id: usize, diversity: f64, rb_rates: Vec<f64>, r_min: f64, total_rbs: usize) -> Self {
        let pool = 0..total_rbs.min(rb_rates.len());
        let chosen = greedy_prefix(r_min, &rb_rates, pool).filter(|rbs| !rbs.is_empty());
        CandidateInfo {
            vehicle_id,
            diversity,
            r_min: Some(r_min),
            cost: chosen.as_ref().map(Vec::len),
            chosen_rbs: chosen.unwrap_or_default(),
            rb_rates,
            t_train: 0.0,
            standing_time: f64::INFINITY,
        }
    }

    fn ratio(&self) -> f64 {
        self.diversity / self.cost.expect("feasible candidate") as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadAssignment {
    pub vehicle_id: usize,
    pub rbs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HeadSelection {
    /// Heads in the order they were selected.
    pub heads: Vec<HeadAssignment>,
}

impl HeadSelection {
    pub fn is_head(&self, vehicle_id: usize) -> bool {
        self.heads.iter().any(|h| h.vehicle_id == vehicle_id)
    }

    pub fn head_ids(&self) -> Vec<usize> {
        self.heads.iter().map(|h| h.vehicle_id).collect()
    }

    pub fn rbs_used(&self) -> usize {
        self.heads.iter().map(|h| h.rbs.len()).sum()
    }

    /// Sum of the heads' diversity indices.
    pub fn objective(&self, candidates: &[CandidateInfo]) -> f64 {
        self.heads
            .iter()
            .map(|h| {
                candidates
                    .iter()
                    .find(|c| c.vehicle_id == h.vehicle_id)
                    .map_or(0.0, |c| c.diversity)
            })
            .sum()
    }

    /// Checks the deadline constraint of every head and that RBs are
    /// disjoint, inside the pool and within budget.
    pub fn violations(&self, candidates: &[CandidateInfo], total_rbs: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut used = vec![false; total_rbs];
        for h in &self.heads {
            let Some(c) = candidates.iter().find(|c| c.vehicle_id == h.vehicle_id) else {
                out.push(format!("head {} is not a candidate", h.vehicle_id));
                continue;
            };
            for &q in &h.rbs {
                if q >= total_rbs {
                    out.push(format!("head {} uses RB {q} outside the pool", h.vehicle_id));
                } else if std::mem::replace(&mut used[q], true) {
                    out.push(format!("RB {q} assigned twice"));
                }
            }
            let rate: f64 = h.rbs.iter().filter(|&&q| q < c.rb_rates.len()).map(|&q| c.rb_rates[q]).sum();
            match c.r_min {
                Some(r_min) if rate >= r_min && !h.rbs.is_empty() => {}
                _ => out.push(format!("head {} misses its upload deadline", h.vehicle_id)),
            }
        }
        if self.rbs_used() > total_rbs {
            out.push(format!("{} RBs used out of {total_rbs}", self.rbs_used()));
        }
        out
    }
}

/// Greedy knapsack over the RB pool: candidates ranked by diversity per RB
/// (ties: higher diversity, then lower id) become heads while their RB
/// requirement, recomputed on the RBs still free, can be met.
pub fn select_heads(candidates: &[CandidateInfo], total_rbs: usize) -> HeadSelection {
    let mut order: Vec<&CandidateInfo> = candidates.iter().filter(|c| c.cost.is_some()).collect();
    order.sort_by(|a, b| {
        b.ratio()
            .total_cmp(&a.ratio())
            .then(b.diversity.total_cmp(&a.diversity))
            .then(a.vehicle_id.cmp(&b.vehicle_id))
    });

    let mut free: Vec<usize> = (0..total_rbs).collect();
    let mut selection = HeadSelection::default();
    for c in order {
        if free.is_empty() {
            break;
        }
        if c.cost.is_some_and(|cost| cost > free.len()) {
            continue;
        }
        let r_min = c.r_min.expect("feasible candidate has a rate target");
        let usable = free.iter().copied().filter(|&q| q < c.rb_rates.len());
        let Some(rbs) = greedy_prefix(r_min, &c.rb_rates, usable).filter(|r| !r.is_empty()) else {
            continue;
        };
        free.retain(|q| !rbs.contains(q));
        selection.heads.push(HeadAssignment {
            vehicle_id: c.vehicle_id,
            rbs,
        });
    }
    selection
}
