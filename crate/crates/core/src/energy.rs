//! Battery consumption, charging durations and node time.
//!
//! Consumption is affine in payload: `rate(p) = rate_ref * (base + (1 - base) * p / p_ref)`,
//! anchored so that the reference payload consumes exactly `rate_ref`.
//! Charging is linear in battery percentage.
//!
//! Node time at a station with `k` pads follows a rounds model: drones are
//! sorted by charge duration (longest first) and charged `k` at a time, each
//! round lasting as long as its slowest drone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::swarm::{Drone, DroneId};

/// Slack for percentage comparisons, absorbing summation-order rounding.
pub const PERCENT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("payload {payload_kg} kg exceeds drone capacity {max_payload_kg} kg")]
    PayloadExceedsCapacity { payload_kg: f64, max_payload_kg: f64 },
    #[error("invalid quantity: {0}")]
    InvalidQuantity(String),
}

/// Performance parameters shared by every drone of a fleet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DronePerformance {
    pub speed_kmh: f64,
    #[serde(rename = "full_charge_min")]
    pub full_charge_minutes: f64,
    #[serde(rename = "rate_percent_per_km_at_ref")]
    pub rate_at_ref_percent_per_km: f64,
    pub ref_payload_kg: f64,
    pub base_fraction: f64,
    pub max_payload_kg: f64,
}

impl Default for DronePerformance {
    /// 65 km/h, 60 minutes for a full charge, 1% per 10 km with 5 kg aboard,
    /// 5 kg maximum package weight.
    fn default() -> Self {
        DronePerformance {
            speed_kmh: 65.0,
            full_charge_minutes: 60.0,
            rate_at_ref_percent_per_km: 0.1,
            ref_payload_kg: 5.0,
            base_fraction: 0.5,
            max_payload_kg: 5.0,
        }
    }
}

impl DronePerformance {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let bad = |what: &str| Err(EnergyError::InvalidQuantity(what.to_string()));
        if !(self.speed_kmh > 0.0) {
            return bad("speed_kmh must be positive");
        }
        if !(self.full_charge_minutes > 0.0) {
            return bad("full_charge_min must be positive");
        }
        if !(self.rate_at_ref_percent_per_km > 0.0) {
            return bad("rate_percent_per_km_at_ref must be positive");
        }
        if !(0.0..=1.0).contains(&self.base_fraction) {
            return bad("base_fraction must lie in [0, 1]");
        }
        if !(self.ref_payload_kg > 0.0 && self.ref_payload_kg <= self.max_payload_kg) {
            return bad("need 0 < ref_payload_kg <= max_payload_kg");
        }
        Ok(())
    }

    /// Minutes to fly `km` at cruise speed.
    pub fn travel_minutes(&self, km: f64) -> f64 {
        km / self.speed_kmh * 60.0
    }

    fn rate_unchecked(&self, payload_kg: f64) -> f64 {
        self.rate_at_ref_percent_per_km
            * (self.base_fraction + (1.0 - self.base_fraction) * payload_kg / self.ref_payload_kg)
    }
}

/// Battery percent consumed per km while carrying `payload_kg`.
pub fn consumption_rate(perf: &DronePerformance, payload_kg: f64) -> Result<f64, EnergyError> {
    if !(payload_kg >= 0.0) {
        return Err(EnergyError::InvalidQuantity(format!(
            "payload must be nonnegative, got {payload_kg}"
        )));
    }
    if payload_kg > perf.max_payload_kg {
        return Err(EnergyError::PayloadExceedsCapacity {
            payload_kg,
            max_payload_kg: perf.max_payload_kg,
        });
    }
    Ok(perf.rate_unchecked(payload_kg))
}

/// Battery percent a drone spends flying `km` with `payload_kg`.
pub fn required_percent(
    perf: &DronePerformance,
    payload_kg: f64,
    km: f64,
) -> Result<f64, EnergyError> {
    Ok(consumption_rate(perf, payload_kg)? * km)
}

/// Whether a drone at `battery_percent` can fly `distance_km` and still hold
/// at least `reserve_percent`. Arriving with exactly the reserve counts.
pub fn can_reach(
    perf: &DronePerformance,
    battery_percent: f64,
    payload_kg: f64,
    distance_km: f64,
    reserve_percent: f64,
) -> bool {
    match required_percent(perf, payload_kg, distance_km) {
        Ok(need) => battery_percent - need >= reserve_percent - PERCENT_EPS,
        Err(_) => false,
    }
}

/// One drone's charging request at a station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeDemand {
    pub drone: DroneId,
    #[serde(rename = "from_pct")]
    pub from_percent: f64,
    #[serde(rename = "to_pct")]
    pub to_percent: f64,
}

impl ChargeDemand {
    pub fn new(drone: DroneId, from_percent: f64, to_percent: f64) -> Result<Self, EnergyError> {
        let ok = (0.0..=100.0).contains(&from_percent)
            && (0.0..=100.0).contains(&to_percent)
            && to_percent >= from_percent;
        if !ok {
            return Err(EnergyError::InvalidQuantity(format!(
                "charge demand {from_percent}% -> {to_percent}% for drone {drone}"
            )));
        }
        Ok(ChargeDemand {
            drone,
            from_percent,
            to_percent,
        })
    }
}

/// Linear charging: the full 0-100% span takes `full_charge_minutes`.
pub fn charge_duration(perf: &DronePerformance, demand: &ChargeDemand) -> f64 {
    (demand.to_percent - demand.from_percent) / 100.0 * perf.full_charge_minutes
}

/// Time a (sub-)swarm spends at a station.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NodeTimeBreakdown {
    /// Longest individual charge.
    pub charging_minutes: f64,
    /// Extra time lost to pad contention.
    pub waiting_minutes: f64,
    pub total_minutes: f64,
}

/// Node time for the given individual charge durations.
pub fn node_time_from_durations(durations: &[f64], pad_count: u32) -> NodeTimeBreakdown {
    assert!(pad_count >= 1, "a station has at least one pad");
    if durations.is_empty() {
        return NodeTimeBreakdown::default();
    }
    let mut sorted = durations.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = sorted
        .chunks(pad_count as usize)
        .map(|round| round[0])
        .sum();
    let ct = sorted[0];
    NodeTimeBreakdown {
        charging_minutes: ct,
        waiting_minutes: total - ct,
        total_minutes: total,
    }
}

pub fn node_time(
    perf: &DronePerformance,
    demands: &[ChargeDemand],
    pad_count: u32,
) -> NodeTimeBreakdown {
    let durations: Vec<f64> = demands.iter().map(|d| charge_duration(perf, d)).collect();
    node_time_from_durations(&durations, pad_count)
}

/// Charge targets when cooperation may apply: with more drones than pads,
/// each drone charges only enough to fly `next_leg_km` (plus the reserve);
/// otherwise everyone charges to 100%. A target never sits below the
/// current battery.
pub fn cooperative_targets(
    perf: &DronePerformance,
    drones: &[Drone],
    pad_count: u32,
    next_leg_km: f64,
    reserve_percent: f64,
) -> Result<Vec<ChargeDemand>, EnergyError> {
    if !(next_leg_km >= 0.0) {
        return Err(EnergyError::InvalidQuantity(format!(
            "next leg must be nonnegative, got {next_leg_km}"
        )));
    }
    let legs = vec![Some(next_leg_km); drones.len()];
    cooperative_targets_per_drone(perf, drones, pad_count, &legs, reserve_percent)
}

/// Like [`cooperative_targets`], with a separate next leg per drone;
/// `None` requests a full charge for that drone.
pub fn cooperative_targets_per_drone(
    perf: &DronePerformance,
    drones: &[Drone],
    pad_count: u32,
    next_leg_km: &[Option<f64>],
    reserve_percent: f64,
) -> Result<Vec<ChargeDemand>, EnergyError> {
    assert_eq!(drones.len(), next_leg_km.len());
    let cooperate = drones.len() > pad_count as usize;
    drones
        .iter()
        .zip(next_leg_km)
        .map(|(d, leg)| {
            let need = required_percent(perf, d.payload_kg, leg.unwrap_or(0.0))?;
            let target = match leg {
                Some(_) if cooperate => (need + reserve_percent).min(100.0),
                _ => 100.0,
            };
            let from = d.battery_percent.clamp(0.0, 100.0);
            Ok(ChargeDemand {
                drone: d.id,
                from_percent: from,
                to_percent: target.max(from),
            })
        })
        .collect()
}

/// Every drone charges from its current level to 100%.
pub fn full_charge_demands(drones: &[Drone]) -> Vec<ChargeDemand> {
    drones
        .iter()
        .map(|d| {
            let from = d.battery_percent.clamp(0.0, 100.0);
            ChargeDemand {
                drone: d.id,
                from_percent: from,
                to_percent: 100.0,
            }
        })
        .collect()
}
