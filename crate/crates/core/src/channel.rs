//! Uplink and V2V channel model, per-RB rates, upload deadlines and the RB
//! cost of each vehicle.
//!
//! Gains combine a log-distance path loss, per-vehicle log-normal shadowing
//! and per-RB Rayleigh fading (exponentially distributed power). Gains are
//! redrawn every round.

use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, domain_err, Result};
use crate::mobility::{self, MobilityConfig, VehicleKinematics};
use crate::rng;

/// Log-distance path loss: `reference_loss_db + 10 * exponent * log10(d / 1 m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    pub exponent: f64,
    pub reference_loss_db: f64,
}

impl Default for PathLoss {
    /// 128.1 dB at 1 km, exponent 3.76.
    fn default() -> Self {
        PathLoss {
            exponent: 3.76,
            reference_loss_db: 128.1 - 10.0 * 3.76 * 3.0,
        }
    }
}

impl PathLoss {
    pub fn loss_db(&self, distance_m: f64) -> f64 {
        self.reference_loss_db + 10.0 * self.exponent * distance_m.max(1.0).log10()
    }

    /// Linear power gain (inverse of the loss).
    pub fn gain(&self, distance_m: f64) -> f64 {
        db_to_linear(-self.loss_db(distance_m))
    }
}

/// Radio parameters as written in the config file (dB units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub rb_bandwidth_hz: f64,
    pub transmit_power_w: f64,
    pub noise_dbm: f64,
    pub shadowing_sigma_db: f64,
    pub antenna_gain_dbi: f64,
    pub bs_antenna_gain_dbi: f64,
    pub antenna_height_m: f64,
    pub bs_height_m: f64,
    pub pathloss: PathLoss,
    pub total_rbs: usize,
    /// RBs available for intra-cluster V2V uploads, per cluster.
    pub v2v_rbs: usize,
    pub model_size_bits: f64,
    pub t_agg_s: f64,
    pub delta_s: f64,
    /// Local training cost in seconds per sample per epoch.
    pub per_sample_cost_s: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            rb_bandwidth_hz: 180e3,
            transmit_power_w: 0.1,
            noise_dbm: -114.0,
            shadowing_sigma_db: 3.0,
            antenna_gain_dbi: 3.0,
            bs_antenna_gain_dbi: 8.0,
            antenna_height_m: 1.5,
            bs_height_m: 25.0,
            pathloss: PathLoss::default(),
            total_rbs: 4,
            v2v_rbs: 4,
            model_size_bits: 160e3,
            t_agg_s: 0.5,
            delta_s: 2.0,
            per_sample_cost_s: 1e-4,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rb_bandwidth_hz", self.rb_bandwidth_hz),
            ("transmit_power_w", self.transmit_power_w),
            ("model_size_bits", self.model_size_bits),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("shadowing_sigma_db", self.shadowing_sigma_db),
            ("t_agg_s", self.t_agg_s),
            ("delta_s", self.delta_s),
            ("per_sample_cost_s", self.per_sample_cost_s),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(config_err(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !self.noise_dbm.is_finite() {
            return Err(config_err("noise_dbm must be finite"));
        }
        Ok(())
    }

    pub fn noise_w(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Per-vehicle, per-RB linear gains toward the gNodeB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    /// `gains[k][q]`
    pub gains: Vec<Vec<f64>>,
    /// Distance of each vehicle to the gNodeB, meters.
    pub distances: Vec<f64>,
}

/// Combines the large- and small-scale factors into one linear gain.
pub fn compose_gain(pathloss: &PathLoss, distance_m: f64, shadow_db: f64, fading: f64, antenna_db: f64) -> f64 {
    pathloss.gain(distance_m) * db_to_linear(shadow_db + antenna_db) * fading
}

pub fn draw_gains(
    fleet: &[VehicleKinematics],
    mobility: &MobilityConfig,
    radio: &RadioConfig,
    seed: u64,
) -> ChannelRealization {
    let mut rng = rng::rng_from(seed);
    let shadow = Normal::new(0.0, radio.shadowing_sigma_db).expect("validated sigma");
    let bs_x = 0.5 * mobility.coverage_diameter;
    let dh = radio.bs_height_m - radio.antenna_height_m;
    let antenna_db = radio.antenna_gain_dbi + radio.bs_antenna_gain_dbi;
    let mut gains = Vec::with_capacity(fleet.len());
    let mut distances = Vec::with_capacity(fleet.len());
    for v in fleet {
        let dx = v.position - bs_x;
        let distance = (dx * dx + dh * dh).sqrt();
        let s: f64 = shadow.sample(&mut rng);
        let row = (0..radio.total_rbs)
            .map(|_| {
                let fading: f64 = Exp1.sample(&mut rng);
                compose_gain(&radio.pathloss, distance, s, fading.max(f64::MIN_POSITIVE), antenna_db)
            })
            .collect();
        gains.push(row);
        distances.push(distance);
    }
    ChannelRealization { gains, distances }
}

/// Symmetric V2V gain matrix, flat across the V2V RB pool.
pub fn draw_v2v_gains(fleet: &[VehicleKinematics], radio: &RadioConfig, seed: u64) -> Vec<Vec<f64>> {
    let n = fleet.len();
    let mut rng = rng::rng_from(seed);
    let shadow = Normal::new(0.0, radio.shadowing_sigma_db).expect("validated sigma");
    let antenna_db = 2.0 * radio.antenna_gain_dbi;
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let distance = (fleet[i].position - fleet[j].position).abs();
            let s: f64 = shadow.sample(&mut rng);
            let fading: f64 = Exp1.sample(&mut rng);
            let gain = compose_gain(&radio.pathloss, distance, s, fading.max(f64::MIN_POSITIVE), antenna_db);
            g[i][j] = gain;
            g[j][i] = gain;
        }
    }
    g
}

/// Shannon rate of one RB: `B * log2(1 + P * G / N0)` in bits/s.
pub fn rb_rate(power_w: f64, gain: f64, noise_w: f64, bandwidth_hz: f64) -> Result<f64> {
    if !(power_w > 0.0 && gain > 0.0 && noise_w > 0.0 && bandwidth_hz > 0.0) {
        return Err(domain_err(format!(
            "rb_rate needs positive inputs (P={power_w}, G={gain}, N0={noise_w}, B={bandwidth_hz})"
        )));
    }
    Ok(bandwidth_hz * (1.0 + power_w * gain / noise_w).log2())
}

/// Uplink rate of vehicle `k` on each RB.
pub fn vehicle_rb_rates(realization: &ChannelRealization, k: usize, radio: &RadioConfig) -> Vec<f64> {
    let n0 = radio.noise_w();
    realization.gains[k]
        .iter()
        .map(|&g| rb_rate(radio.transmit_power_w, g, n0, radio.rb_bandwidth_hz).expect("positive gains"))
        .collect()
}

/// Estimated local training time: per-sample cost times samples times epochs.
pub fn training_time(samples: usize, epochs: usize, per_sample_cost_s: f64) -> f64 {
    per_sample_cost_s * samples as f64 * epochs as f64
}

/// Time left for the upload once training, aggregation and the collection
/// wait are subtracted from the standing time. Non-positive means the
/// vehicle cannot act as a head.
pub fn budget_from_standing(standing_s: f64, t_train_s: f64, radio: &RadioConfig) -> f64 {
    standing_s - t_train_s - radio.t_agg_s - radio.delta_s
}

pub fn upload_budget(
    v: &VehicleKinematics,
    t_train_s: f64,
    radio: &RadioConfig,
    mobility: &MobilityConfig,
) -> Result<f64> {
    let standing = mobility::standing_time(v, mobility)?;
    Ok(budget_from_standing(standing, t_train_s, radio))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RbCost {
    Feasible {
        r_min: f64,
        cost: usize,
        /// RB indices in the order they were taken (best first).
        rbs: Vec<usize>,
    },
    Infeasible,
}

impl RbCost {
    pub fn cost(&self) -> Option<usize> {
        match self {
            RbCost::Feasible { cost, .. } => Some(*cost),
            RbCost::Infeasible => None,
        }
    }
}

/// Rate needed to push `model_size_bits` within `budget_s`.
pub fn min_rate(model_size_bits: f64, budget_s: f64) -> Option<f64> {
    (budget_s > 0.0).then(|| model_size_bits / budget_s)
}

/// Takes RBs from `available` in decreasing rate order (lower index first on
/// ties) until their summed rate reaches `r_min`, always at least one.
/// `None` if all of them together fall short.
pub fn greedy_prefix(r_min: f64, rates: &[f64], available: impl IntoIterator<Item = usize>) -> Option<Vec<usize>> {
    let mut order: Vec<usize> = available.into_iter().collect();
    order.sort_by(|&a, &b| rates[b].total_cmp(&rates[a]).then(a.cmp(&b)));
    let mut acc = 0.0;
    let mut taken = Vec::new();
    for q in order {
        if acc >= r_min && !taken.is_empty() {
            break;
        }
        acc += rates[q];
        taken.push(q);
    }
    (acc >= r_min && !taken.is_empty()).then_some(taken)
}

/// Minimum RB count (and which RBs) for a vehicle to meet its deadline.
pub fn min_rate_and_cost(budget_s: f64, rates: &[f64], radio: &RadioConfig) -> RbCost {
    let Some(r_min) = min_rate(radio.model_size_bits, budget_s) else {
        return RbCost::Infeasible;
    };
    match greedy_prefix(r_min, rates, 0..rates.len()) {
        Some(rbs) if !rbs.is_empty() && rbs.len() <= radio.total_rbs => RbCost::Feasible {
            r_min,
            cost: rbs.len(),
            rbs,
        },
        _ => RbCost::Infeasible,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::{spawn_fleet, FleetSize};
    use proptest::prelude::*;

    const B: f64 = 180e3;

    #[test]
    fn rb_rate_fixtures() {
        assert!((rb_rate(1.0, 1.0, 1.0, B).unwrap() - 180e3).abs() < 1e-6);
        assert!((rb_rate(1.0, 3.0, 1.0, B).unwrap() - 360e3).abs() < 1e-6);
        let r = rb_rate(1.0, 10.0, 1.0, B).unwrap();
        assert!((r / 1e3 - 622.7).abs() < 0.1, "{r}");
        assert!(rb_rate(0.0, 1.0, 1.0, B).is_err());
        assert!(rb_rate(1.0, 1.0, -1.0, B).is_err());
    }

    #[test]
    fn pathloss_reference_point_and_slope() {
        let pl = PathLoss::default();
        assert!((pl.loss_db(1000.0) - 128.1).abs() < 1e-9);
        let ratio = pl.gain(400.0) / pl.gain(200.0);
        assert!((ratio - 2f64.powf(-3.76)).abs() < 1e-12);
        let a = compose_gain(&pl, 150.0, 0.0, 1.0, 0.0);
        let b = compose_gain(&pl, 300.0, 0.0, 1.0, 0.0);
        assert!((b / a - 2f64.powf(-3.76)).abs() < 1e-12);
    }

    #[test]
    fn noise_conversion() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-12);
        assert!((dbm_to_watts(-114.0) / 3.981_071_705_534_97e-15 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gains_positive_and_deterministic() {
        let m = MobilityConfig::freeway();
        let radio = RadioConfig::default();
        let fleet = spawn_fleet(&m, FleetSize::Count(30), 1).unwrap();
        let a = draw_gains(&fleet, &m, &radio, 9);
        let b = draw_gains(&fleet, &m, &radio, 9);
        assert_eq!(a, b);
        assert_eq!(a.gains.len(), 30);
        assert!(a.gains.iter().all(|row| row.len() == 4 && row.iter().all(|&g| g > 0.0)));
        let v = draw_v2v_gains(&fleet, &radio, 9);
        assert!(v.iter().enumerate().all(|(i, r)| r.iter().enumerate().all(|(j, &g)| i == j || g > 0.0)));
        assert_eq!(v[3][7], v[7][3]);
    }

    #[test]
    fn budget_fixtures() {
        let mut radio = RadioConfig::default();
        radio.t_agg_s = 1.0;
        radio.delta_s = 2.0;
        assert_eq!(budget_from_standing(100.0, 3.0, &radio), 94.0);
        assert_eq!(budget_from_standing(5.0, 3.0, &radio), -1.0);
        radio.t_agg_s = 0.0;
        radio.delta_s = 0.0;
        assert_eq!(budget_from_standing(3.0, 3.0, &radio), 0.0);
    }

    #[test]
    fn cost_fixtures() {
        let mut radio = RadioConfig::default();
        radio.model_size_bits = 160e3;
        match min_rate_and_cost(1.0, &[180e3], &radio) {
            RbCost::Feasible { r_min, cost, rbs } => {
                assert_eq!(r_min, 160e3);
                assert_eq!(cost, 1);
                assert_eq!(rbs, vec![0]);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(min_rate_and_cost(-1.0, &[180e3; 4], &radio), RbCost::Infeasible);
        assert_eq!(min_rate_and_cost(0.0, &[180e3; 4], &radio), RbCost::Infeasible);

        // r_min = 640 kbit/s: four 180 kbit/s RBs are needed
        assert_eq!(min_rate_and_cost(0.25, &[180e3; 4], &radio).cost(), Some(4));
        radio.total_rbs = 3;
        assert_eq!(min_rate_and_cost(0.25, &[180e3; 3], &radio), RbCost::Infeasible);
    }

    #[test]
    fn cost_takes_best_rbs_first() {
        let radio = RadioConfig::default();
        let rates = [50e3, 120e3, 90e3, 10e3];
        match min_rate_and_cost(160e3 / 200e3, &rates, &radio) {
            RbCost::Feasible { rbs, .. } => assert_eq!(rbs, vec![1, 2]),
            other => panic!("{other:?}"),
        }
    }

    /// Smallest subset size whose summed rate reaches `r_min`, by enumeration.
    fn brute_min_subset(r_min: f64, rates: &[f64]) -> Option<usize> {
        let n = rates.len();
        (1u32..1 << n)
            .filter(|mask| (0..n).filter(|i| mask & (1 << i) != 0).map(|i| rates[i]).sum::<f64>() >= r_min)
            .map(|mask| mask.count_ones() as usize)
            .min()
    }

    proptest! {
        #[test]
        fn greedy_prefix_is_minimal(rates in prop::collection::vec(1e3f64..1e6, 1..=6), budget in 0.05f64..5.0) {
            let mut radio = RadioConfig::default();
            radio.total_rbs = rates.len();
            let r_min = radio.model_size_bits / budget;
            let got = min_rate_and_cost(budget, &rates, &radio);
            prop_assert_eq!(got.cost(), brute_min_subset(r_min, &rates));
            if let RbCost::Feasible { rbs, .. } = got {
                let worst_chosen = rbs.iter().map(|&q| rates[q]).fold(f64::INFINITY, f64::min);
                for q in (0..rates.len()).filter(|q| !rbs.contains(q)) {
                    prop_assert!(rates[q] <= worst_chosen);
                }
            }
        }

        #[test]
        fn cost_non_increasing_in_budget(rates in prop::collection::vec(1e3f64..1e6, 4), b in 0.05f64..5.0, extra in 0.0f64..5.0) {
            let radio = RadioConfig::default();
            let tight = min_rate_and_cost(b, &rates, &radio).cost().unwrap_or(usize::MAX);
            let loose = min_rate_and_cost(b + extra, &rates, &radio).cost().unwrap_or(usize::MAX);
            prop_assert!(loose <= tight);
        }

        #[test]
        fn rb_rate_increasing(g in 1e-3f64..1e3, dg in 1e-3f64..10.0, b in 1e3f64..1e6, db in 1.0f64..1e5) {
            let base = rb_rate(0.1, g, 1e-3, b).unwrap();
            prop_assert!(rb_rate(0.1, g + dg, 1e-3, b).unwrap() > base);
            prop_assert!(rb_rate(0.1, g, 1e-3, b + db).unwrap() > base);
        }
    }
}
