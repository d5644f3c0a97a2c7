//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero on any
//! failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use cvfl::learner::{class_accuracy, fedavg, ModelArch, ModelParams, Update};
use cvfl::mobility::{link_lifetime, standing_time, Direction, MobilityConfig, VehicleKinematics};
use cvfl::orchestrator::{
    run_experiment, sweep_cell, Algorithm, DataSource, ExperimentConfig, RoundReport, Simulation,
};
use cvfl::scheduler::{match_vehicles, select_heads};
use cvfl::verify::{check_head_selection, verify_gradients, verify_knapsack_with, verify_matching_with};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64, detail: String) -> Outcome {
    let secs = elapsed.as_secs_f64();
    if secs < limit_s {
        Ok(format!("{detail}, {secs:.1} s"))
    } else {
        Err(format!("{detail}, but took {secs:.1} s (limit {limit_s} s)"))
    }
}

fn matching_optimality() -> Outcome {
    let start = Instant::now();
    let report = verify_matching_with(match_vehicles, 200, 2024);
    if !report.passed() {
        return Err(report.failures.join("; "));
    }
    within(start.elapsed(), 10.0, "200 instances equal the enumerated optimum".into())
}

fn head_selection_quality() -> Outcome {
    let random = verify_knapsack_with(select_heads, 200, 2024);
    if !random.passed() {
        return Err(random.failures.join("; "));
    }

    // Instances drawn from the simulated freeway channel, 12 candidates each.
    let mut cfg = ExperimentConfig::freeway();
    cfg.vehicles = 12;
    cfg.learning = false;
    cfg.data.source = DataSource::Synthetic {
        classes: 10,
        dim: 20,
        train_samples: 6_000,
        test_samples: 1_000,
    };
    cfg.data.partition.num_shards = 120;
    let mut ratios = Vec::new();
    for total_rbs in 2..=4 {
        let mut c = cfg.clone();
        c.radio.total_rbs = total_rbs;
        c.rounds = 200;
        let mut sim = Simulation::new(c, Algorithm::Cvfl).map_err(|e| e.to_string())?;
        for round in 1..=67 {
            let snap = sim.snapshot(round).map_err(|e| e.to_string())?;
            match check_head_selection(select_heads, &snap.candidates, total_rbs) {
                Ok(r) => ratios.extend(r),
                Err(e) => return Err(format!("{total_rbs} RBs, round {round}: {e}")),
            }
        }
    }
    let simulated = ratios.iter().sum::<f64>() / ratios.len() as f64;
    ensure(
        random.metric >= 0.9 && simulated >= 0.9,
        format!(
            "no violations; mean greedy/optimal {:.4} on random and {simulated:.4} on {} simulated instances",
            random.metric,
            ratios.len()
        ),
    )
}

fn table_structure() -> Outcome {
    let start = Instant::now();
    let base = ExperimentConfig::freeway();
    let sizes = [160e3, 320e3, 640e3];
    let mut heads = [[0.0; 3]; 3];
    let mut worst_ratio: f64 = 0.0;
    for (i, q) in [2, 3, 4].into_iter().enumerate() {
        for (j, &s) in sizes.iter().enumerate() {
            let cell = sweep_cell(&base, q, s, 10, 100).map_err(|e| e.to_string())?;
            heads[i][j] = cell.heads_mean;
            let expected = cell.heads_mean * (1 + base.n_max) as f64;
            worst_ratio = worst_ratio.max((cell.participants_mean / expected - 1.0).abs());
        }
    }
    let monotone = (0..3).all(|j| heads[0][j] < heads[1][j] && heads[1][j] < heads[2][j]);
    let spread = heads
        .iter()
        .map(|row| row.iter().cloned().fold(f64::MIN, f64::max) - row.iter().cloned().fold(f64::MAX, f64::min))
        .fold(0.0, f64::max);
    let detail = format!(
        "heads at 160 kbit {:.2}/{:.2}/{:.2}, max spread {spread:.2}, participants off heads x 3 by at most {:.1}%",
        heads[0][0],
        heads[1][0],
        heads[2][0],
        100.0 * worst_ratio
    );
    if !(monotone && spread < 0.5 && worst_ratio <= 0.15) {
        return Err(detail);
    }
    within(start.elapsed(), 120.0, detail)
}

fn gradient_correctness() -> Outcome {
    let report = verify_gradients(20, 2024);
    ensure(report.passed(), format!("max relative error {:.2e} over 20 networks", report.metric))
}

fn fedavg_identity() -> Outcome {
    let mut base = ModelParams::zeros(ModelArch { widths: vec![1, 1, 1] }).map_err(|e| e.to_string())?;
    base.theta = vec![0.5; 4];
    let update = |id, delta: Vec<f64>, n| Update {
        vehicle_id: id,
        model_version: 0,
        delta,
        num_samples: n,
    };
    let ups = [
        update(0, vec![1.0, 0.0, 0.0, 0.0], 10),
        update(1, vec![0.0, 2.0, 0.0, 0.0], 30),
        update(2, vec![0.0, 0.0, 4.0, -4.0], 60),
    ];
    // weights 0.1, 0.3, 0.6
    let expected = [0.6, 1.1, 2.9, -1.9];
    let got = fedavg(&base, &ups).map_err(|e| e.to_string())?;
    let err = got.theta.iter().zip(expected).map(|(g, e)| (g - e).abs()).fold(0.0, f64::max);
    ensure(err <= 1e-12, format!("max deviation {err:.1e}"))
}

struct ShiftOutcome {
    ari: f64,
    before: f64,
    after: f64,
}

fn shift_run(seed: u64) -> cvfl::Result<ShiftOutcome> {
    let mut cfg = ExperimentConfig::parking_lot().with_seed(seed);
    cfg.vehicles = 20;
    cfg.clustering_fraction = 1.0;
    cfg.max_clusters = 2;
    cfg.clustering_round = 10;
    cfg.rounds = 15;
    cfg.data.partition.min_shards = 20;
    cfg.data.partition.max_shards = 30;
    let swapped = [1, 7, 3, 5];
    let mut sim = Simulation::new(cfg.clone(), Algorithm::Cvfl)?;
    let mean_over_groups = |sim: &Simulation, pick: &dyn Fn(usize) -> usize| -> cvfl::Result<f64> {
        let tests = &sim.data().tests;
        let mut total = 0.0;
        for (g, t) in tests.iter().enumerate() {
            total += class_accuracy(&sim.models()[pick(g)], t, &swapped)?;
        }
        Ok(total / tests.len() as f64)
    };
    let (mut ari, mut before) = (f64::NAN, f64::NAN);
    while !sim.is_finished() {
        let report = sim.step()?;
        if report.round + 1 == cfg.clustering_round {
            before = mean_over_groups(&sim, &|_| 0)?;
        }
        if let Some(c) = &report.clustering {
            ari = c.ari;
        }
    }
    let serving = sim.serving_versions();
    let after = mean_over_groups(&sim, &|g| serving[g] as usize)?;
    Ok(ShiftOutcome { ari, before, after })
}

fn concept_shift_recovery() -> Outcome {
    let start = Instant::now();
    let runs = (0..10u64).into_par_iter().map(shift_run).collect::<cvfl::Result<Vec<_>>>().map_err(|e| e.to_string())?;
    let exact = runs.iter().filter(|r| r.ari == 1.0).count();
    let improved = runs.iter().filter(|r| r.after > r.before).count();
    let mean = |f: fn(&ShiftOutcome) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;
    let detail = format!(
        "ARI 1 on {exact}/10 seeds, swapped-class accuracy up on {improved}/10 (mean {:.3} -> {:.3})",
        mean(|r| r.before),
        mean(|r| r.after)
    );
    if !(exact >= 9 && improved >= 8) {
        return Err(detail);
    }
    within(start.elapsed(), 300.0, detail)
}

fn cvfl_beats_vanilla() -> Outcome {
    let runs = (0..5u64)
        .into_par_iter()
        .flat_map(|seed| [(seed, Algorithm::Cvfl), (seed, Algorithm::Vanilla)])
        .map(|(seed, alg)| {
            let (reports, _) = run_experiment(ExperimentConfig::freeway().with_seed(seed), alg)?;
            let participants = reports.iter().map(|r| r.participants as f64).sum::<f64>() / reports.len() as f64;
            let accuracy = reports.last().and_then(|r| r.accuracy).unwrap_or(f64::NAN);
            Ok((alg, participants, accuracy))
        })
        .collect::<cvfl::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let mean = |alg: Algorithm, f: fn(&(Algorithm, f64, f64)) -> f64| {
        let xs: Vec<f64> = runs.iter().filter(|r| r.0 == alg).map(f).collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    let (cp, vp) = (mean(Algorithm::Cvfl, |r| r.1), mean(Algorithm::Vanilla, |r| r.1));
    let (ca, va) = (mean(Algorithm::Cvfl, |r| r.2), mean(Algorithm::Vanilla, |r| r.2));
    ensure(
        cp > vp && ca - va >= 0.0,
        format!("participants {cp:.2} vs {vp:.2}, final accuracy {ca:.4} vs {va:.4}"),
    )
}

fn jsonl(reports: &[RoundReport]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in reports {
        out.extend(serde_json::to_vec(r).expect("reports serialize"));
        out.push(b'\n');
    }
    out
}

fn determinism() -> Outcome {
    let mut sizes = Vec::new();
    for name in ExperimentConfig::PRESETS {
        let cfg = ExperimentConfig::preset(name).expect("listed preset").with_seed(3);
        let (a, b) = rayon::join(
            || run_experiment(cfg.clone(), Algorithm::Cvfl),
            || run_experiment(cfg.clone(), Algorithm::Cvfl),
        );
        let (a, b) = (jsonl(&a.map_err(|e| e.to_string())?.0), jsonl(&b.map_err(|e| e.to_string())?.0));
        if a != b {
            return Err(format!("{name}: rounds.jsonl differs between runs"));
        }
        sizes.push(format!("{name} {} bytes", a.len()));
    }
    Ok(format!("identical rounds.jsonl ({})", sizes.join(", ")))
}

fn mobility_fixtures() -> Outcome {
    let cfg = MobilityConfig {
        coverage_diameter: 2000.0,
        transmission_range: 300.0,
        ..MobilityConfig::freeway()
    };
    let at = |position: f64, velocity: f64| VehicleKinematics {
        id: 0,
        lane: 0,
        direction: if velocity < 0.0 { Direction::Backward } else { Direction::Forward },
        position,
        speed: velocity.abs(),
    };
    let st = |x, v| standing_time(&at(x, v), &cfg).unwrap_or(f64::NAN);
    let cases = [
        ("T(x=2000, 25 m/s)", st(2000.0, 25.0), 0.0),
        ("T(x=0, 20 m/s)", st(0.0, 20.0), 100.0),
        ("T(x=1500, 25 m/s)", st(1500.0, 25.0), 20.0),
        ("LLT(0@30, 100@20)", link_lifetime(&at(0.0, 30.0), &at(100.0, 20.0), &cfg), 40.0),
        ("LLT(0@20, 200@-20)", link_lifetime(&at(0.0, 20.0), &at(200.0, -20.0), &cfg), 12.5),
    ];
    for (name, got, want) in cases {
        if !((got - want).abs() <= 1e-9) {
            return Err(format!("{name} = {got}, expected {want}"));
        }
    }
    let co_moving = link_lifetime(&at(0.0, 30.0), &at(100.0, 30.0), &cfg);
    ensure(co_moving == f64::INFINITY, format!("{} fixtures exact, co-moving LLT {co_moving}", cases.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("matching optimality", matching_optimality),
        ("head selection feasibility and quality", head_selection_quality),
        ("head and participant structure over RBs and model sizes", table_structure),
        ("gradient correctness", gradient_correctness),
        ("fedavg identity", fedavg_identity),
        ("concept-shift recovery", concept_shift_recovery),
        ("cvfl vs vanilla", cvfl_beats_vanilla),
        ("determinism", determinism),
        ("mobility fixtures", mobility_fixtures),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
