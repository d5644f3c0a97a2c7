//! Brute-force reference solvers. Exponential; meant for small instances in
//! tests and the `verify` suites.

use super::{CandidateInfo, MatchInstance};

/// 0/1 knapsack by enumerating every subset. `None` costs mark items that
/// can never be taken. Returns the best value and the chosen items.
pub fn exhaustive_knapsack(values: &[f64], costs: &[Option<usize>], capacity: usize) -> (f64, Vec<usize>) {
    let n = values.len();
    assert!(n < 31, "exhaustive knapsack limited to 30 items");
    let mut best = (0.0, Vec::new());
    for mask in 0u32..(1 << n) {
        let items: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let Some(weight) = items.iter().map(|&i| costs[i]).sum::<Option<usize>>() else {
            continue;
        };
        if weight > capacity {
            continue;
        }
        let value: f64 = items.iter().map(|&i| values[i]).sum();
        if value > best.0 {
            best = (value, items);
        }
    }
    best
}

/// Optimum of the joint head-selection / RB-allocation problem: every way of
/// handing each RB to one candidate (or nobody) is tried, and a candidate
/// counts as a head when its RBs meet its rate target.
pub fn exhaustive_head_selection(candidates: &[CandidateInfo], total_rbs: usize) -> f64 {
    let owners = candidates.len() + 1;
    let combos = (owners as u64).checked_pow(total_rbs as u32).expect("instance too large");
    assert!(combos <= 50_000_000, "instance too large for enumeration");
    let mut best = 0.0f64;
    let mut rate = vec![0.0; candidates.len()];
    for code in 0..combos {
        rate.iter_mut().for_each(|r| *r = 0.0);
        let mut c = code;
        for q in 0..total_rbs {
            let owner = (c % owners as u64) as usize;
            c /= owners as u64;
            if owner > 0 {
                let cand = &candidates[owner - 1];
                rate[owner - 1] += cand.rb_rates.get(q).copied().unwrap_or(0.0);
            }
        }
        let value: f64 = candidates
            .iter()
            .zip(&rate)
            .filter(|(cand, &r)| r > 0.0 && cand.r_min.is_some_and(|m| r >= m))
            .map(|(cand, _)| cand.diversity)
            .sum();
        best = best.max(value);
    }
    best
}

/// Max-weight capacitated matching by depth-first enumeration.
pub fn exhaustive_matching(inst: &MatchInstance) -> (f64, Vec<(usize, usize)>) {
    fn go(
        inst: &MatchInstance,
        v: usize,
        load: &mut [usize],
        pairs: &mut Vec<(usize, usize)>,
        best: &mut (f64, Vec<(usize, usize)>),
    ) {
        if v == inst.num_vehicles() {
            let value = inst.objective(pairs);
            if value > best.0 {
                *best = (value, pairs.clone());
            }
            return;
        }
        go(inst, v + 1, load, pairs, best);
        for h in 0..inst.num_heads() {
            if load[h] < inst.capacity && inst.edge(v, h) > 0.0 {
                load[h] += 1;
                pairs.push((v, h));
                go(inst, v + 1, load, pairs, best);
                pairs.pop();
                load[h] -= 1;
            }
        }
    }
    let mut best = (0.0, Vec::new());
    let mut load = vec![0; inst.num_heads()];
    go(inst, 0, &mut load, &mut Vec::new(), &mut best);
    best
}
