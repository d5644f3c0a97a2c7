//! Vehicle fleet generation, standing time in coverage and V2V link lifetime.
//!
//! The road is a straight segment of length `coverage_diameter` along a single
//! axis, with the gNodeB at its midpoint. Positions are measured from the
//! segment start; a vehicle travelling in the negative direction enters at
//! `coverage_diameter` and leaves at 0.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, domain_err, Result};
use crate::rng;

const KMH_TO_MS: f64 = 1000.0 / 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+")]
    Forward,
    #[serde(rename = "-")]
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// One lane of the road: its travel direction and speed bounds in km/h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub direction: Direction,
    pub speed_kmh: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityConfig {
    /// Diameter of the gNodeB coverage area, meters.
    pub coverage_diameter: f64,
    /// V2V transmission range, meters.
    pub transmission_range: f64,
    pub lanes: Vec<Lane>,
    /// Poisson intensity in vehicles per meter per lane.
    pub vehicle_density: f64,
}

impl MobilityConfig {
    /// Six-lane freeway: three lanes per direction at 60-80, 80-100 and
    /// 100-120 km/h over a 2 km coverage diameter.
    pub fn freeway() -> Self {
        let bounds = [(60.0, 80.0), (80.0, 100.0), (100.0, 120.0)];
        let lanes = [Direction::Forward, Direction::Backward]
            .iter()
            .flat_map(|&direction| {
                bounds.iter().map(move |&speed_kmh| Lane {
                    direction,
                    speed_kmh,
                })
            })
            .collect();
        MobilityConfig {
            coverage_diameter: 2000.0,
            transmission_range: 300.0,
            lanes,
            vehicle_density: 30.0 / (6.0 * 2000.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coverage_diameter > 0.0) {
            return Err(config_err("coverage_diameter must be positive"));
        }
        if !(self.transmission_range > 0.0) {
            return Err(config_err("transmission_range must be positive"));
        }
        if self.lanes.is_empty() {
            return Err(config_err("at least one lane is required"));
        }
        for (i, lane) in self.lanes.iter().enumerate() {
            let (lo, hi) = lane.speed_kmh;
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(config_err(format!(
                    "lane {i}: speed bounds must satisfy 0 < lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        if !(self.vehicle_density >= 0.0) {
            return Err(config_err("vehicle_density must be non-negative"));
        }
        Ok(())
    }

    /// Speed distribution of a lane, in m/s.
    pub fn lane_speed(&self, lane: usize) -> TruncatedNormal {
        let (lo, hi) = self.lanes[lane].speed_kmh;
        TruncatedNormal::centered(lo * KMH_TO_MS, hi * KMH_TO_MS)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleKinematics {
    pub id: usize,
    pub lane: usize,
    pub direction: Direction,
    /// Meters from the start of the segment.
    pub position: f64,
    /// Meters per second, non-negative.
    pub speed: f64,
}

impl VehicleKinematics {
    /// Signed velocity along the road axis.
    pub fn velocity(&self) -> f64 {
        self.direction.sign() * self.speed
    }

    /// Distance already travelled inside the coverage area.
    pub fn traveled(&self, coverage_diameter: f64) -> f64 {
        match self.direction {
            Direction::Forward => self.position,
            Direction::Backward => coverage_diameter - self.position,
        }
    }
}

/// Gaussian truncated to `[lo, hi]`, sampled by rejection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncatedNormal {
    /// Mean at the midpoint, standard deviation a quarter of the range.
    pub fn centered(lo: f64, hi: f64) -> Self {
        TruncatedNormal {
            mean: 0.5 * (lo + hi),
            sd: 0.25 * (hi - lo),
            lo,
            hi,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sd == 0.0 {
            return self.mean.clamp(self.lo, self.hi);
        }
        let normal = Normal::new(self.mean, self.sd).expect("finite positive sd");
        loop {
            let v = normal.sample(rng);
            if v >= self.lo && v <= self.hi {
                return v;
            }
        }
    }
}

/// How many vehicles to spawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FleetSize {
    /// Exactly this many, each on a uniformly chosen lane at a uniform position.
    Count(usize),
    /// Poisson process per lane at the configured density.
    Poisson,
}

pub fn spawn_fleet(config: &MobilityConfig, size: FleetSize, seed: u64) -> Result<Vec<VehicleKinematics>> {
    config.validate()?;
    let mut rng = rng::rng_from(seed);
    let d = config.coverage_diameter;
    let mut fleet = Vec::new();
    match size {
        FleetSize::Count(count) => {
            for id in 0..count {
                let lane = rng.random_range(0..config.lanes.len());
                let position = rng.random_range(0.0..=d);
                let speed = config.lane_speed(lane).sample(&mut rng);
                fleet.push(VehicleKinematics {
                    id,
                    lane,
                    direction: config.lanes[lane].direction,
                    position,
                    speed,
                });
            }
        }
        FleetSize::Poisson => {
            let lambda = config.vehicle_density * d;
            for lane in 0..config.lanes.len() {
                let n = if lambda > 0.0 {
                    Poisson::new(lambda).map_err(|e| config_err(e.to_string()))?.sample(&mut rng) as usize
                } else {
                    0
                };
                for _ in 0..n {
                    let position = rng.random_range(0.0..=d);
                    let speed = config.lane_speed(lane).sample(&mut rng);
                    fleet.push(VehicleKinematics {
                        id: fleet.len(),
                        lane,
                        direction: config.lanes[lane].direction,
                        position,
                        speed,
                    });
                }
            }
        }
    }
    Ok(fleet)
}

/// Stationary fleet packed into one transmission range around the gNodeB,
/// so every pair of vehicles can reach each other.
pub fn spawn_parked_fleet(config: &MobilityConfig, count: usize, seed: u64) -> Result<Vec<VehicleKinematics>> {
    config.validate()?;
    let mut rng = rng::rng_from(seed);
    let center = 0.5 * config.coverage_diameter;
    let half = 0.5 * config.transmission_range.min(config.coverage_diameter);
    Ok((0..count)
        .map(|id| VehicleKinematics {
            id,
            lane: 0,
            direction: Direction::Forward,
            position: rng.random_range(center - half..=center + half),
            speed: 0.0,
        })
        .collect())
}

/// Moves every vehicle by `dt` seconds. A vehicle that leaves the segment
/// re-enters from the opposite end, standing in for a newly arriving car.
pub fn advance(fleet: &mut [VehicleKinematics], dt: f64, config: &MobilityConfig) {
    let d = config.coverage_diameter;
    for v in fleet {
        v.position = (v.position + v.velocity() * dt).rem_euclid(d);
    }
}

/// Remaining time inside the coverage area: `(D - x) / speed`.
///
/// A stationary vehicle never leaves, so the result is `+inf`.
pub fn standing_time(v: &VehicleKinematics, config: &MobilityConfig) -> Result<f64> {
    let d = config.coverage_diameter;
    let x = v.traveled(d);
    if !(0.0..=d).contains(&x) {
        return Err(domain_err(format!(
            "vehicle {} travelled {x} m, outside coverage [0, {d}]",
            v.id
        )));
    }
    if v.speed == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((d - x) / v.speed)
}

/// Time two vehicles stay within transmission range of each other, assuming
/// both keep their current velocity. Zero when already out of range.
pub fn link_lifetime(k: &VehicleKinematics, h: &VehicleKinematics, config: &MobilityConfig) -> f64 {
    let gap = k.position - h.position;
    let range = config.transmission_range;
    if gap.abs() > range {
        return 0.0;
    }
    let dv = k.velocity() - h.velocity();
    if dv == 0.0 {
        return f64::INFINITY;
    }
    ((-dv * gap + dv.abs() * range) / (dv * dv)).max(0.0)
}
