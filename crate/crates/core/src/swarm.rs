//! Drones, sub-swarms and the legal ways to disband a swarm.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::DronePerformance;
use crate::network::NodeId;

/// Default safety cap on the number of partitions enumerated at once.
pub const DEFAULT_PARTITION_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DroneId(pub u32);

impl fmt::Display for DroneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwarmError {
    #[error("package {index} weighs {weight_kg} kg, above the {max_payload_kg} kg capacity")]
    PayloadExceedsCapacity {
        index: usize,
        weight_kg: f64,
        max_payload_kg: f64,
    },
    #[error("package {index} has invalid weight {weight_kg} kg")]
    InvalidWeight { index: usize, weight_kg: f64 },
    #[error("a swarm request needs at least 2 packages, got {0}")]
    TooFewPackages(usize),
    #[error("illegal split: {0}")]
    IllegalSplit(String),
    #[error("more than {cap} partitions; raise the cap or lower max_splits")]
    PartitionCapExceeded { cap: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drone {
    pub id: DroneId,
    pub battery_percent: f64,
    pub payload_kg: f64,
}

/// A delivery request: packages to carry from `source` to `destination`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeliveryRequest {
    pub source: NodeId,
    pub destination: NodeId,
    pub package_weights_kg: Vec<f64>,
}

/// Drones travelling together, with their position and elapsed time.
#[derive(Debug, Clone, PartialEq)]
pub struct SubSwarm {
    pub drones: Vec<Drone>,
    pub current_node: NodeId,
    pub clock_minutes: f64,
}

impl SubSwarm {
    pub fn len(&self) -> usize {
        self.drones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.drones.is_empty()
    }

    pub fn ids(&self) -> Vec<DroneId> {
        self.drones.iter().map(|d| d.id).collect()
    }
}

/// One way of disbanding a swarm; parts ordered by smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SwarmPartition {
    pub parts: Vec<Vec<DroneId>>,
}

/// One fully charged drone per package (drone `i` carries package `i`),
/// positioned at the request source at time zero.
pub fn build_swarm(
    request: &DeliveryRequest,
    perf: &DronePerformance,
) -> Result<SubSwarm, SwarmError> {
    let weights = &request.package_weights_kg;
    if weights.len() < 2 {
        return Err(SwarmError::TooFewPackages(weights.len()));
    }
    let drones = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(SwarmError::InvalidWeight {
                    index: i,
                    weight_kg: w,
                });
            }
            if w > perf.max_payload_kg {
                return Err(SwarmError::PayloadExceedsCapacity {
                    index: i,
                    weight_kg: w,
                    max_payload_kg: perf.max_payload_kg,
                });
            }
            Ok(Drone {
                id: DroneId(i as u32),
                battery_percent: 100.0,
                payload_kg: w,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SubSwarm {
        drones,
        current_node: request.source,
        clock_minutes: 0.0,
    })
}

/// Set partitions of `0..n` into at most `max_parts` blocks, each of at
/// least `min_size` elements, as blocks of indices. Blocks are ordered by
/// their smallest element and the list follows restricted-growth-string
/// order, so the single-block partition comes first.
pub fn index_partitions(
    n: usize,
    max_parts: usize,
    min_size: usize,
    cap: usize,
) -> Result<Vec<Vec<Vec<usize>>>, SwarmError> {
    let mut out = Vec::new();
    if n == 0 || max_parts == 0 || n < min_size {
        return Ok(out);
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    rgs(0, n, max_parts, min_size, cap, &mut blocks, &mut out)?;
    Ok(out)
}

fn rgs(
    i: usize,
    n: usize,
    max_parts: usize,
    min_size: usize,
    cap: usize,
    blocks: &mut Vec<Vec<usize>>,
    out: &mut Vec<Vec<Vec<usize>>>,
) -> Result<(), SwarmError> {
    let deficit: usize = blocks
        .iter()
        .map(|b| min_size.saturating_sub(b.len()))
        .sum();
    if deficit > n - i {
        return Ok(());
    }
    if i == n {
        if out.len() == cap {
            return Err(SwarmError::PartitionCapExceeded { cap });
        }
        out.push(blocks.clone());
        return Ok(());
    }
    for b in 0..blocks.len() {
        blocks[b].push(i);
        rgs(i + 1, n, max_parts, min_size, cap, blocks, out)?;
        blocks[b].pop();
    }
    if blocks.len() < max_parts {
        blocks.push(vec![i]);
        rgs(i + 1, n, max_parts, min_size, cap, blocks, out)?;
        blocks.pop();
    }
    Ok(())
}

/// Every way to disband `swarm` into 1..=`max_splits` sub-swarms of at
/// least two drones, the no-split partition first.
pub fn enumerate_partitions(
    swarm: &SubSwarm,
    max_splits: usize,
    cap: usize,
) -> Result<Vec<SwarmPartition>, SwarmError> {
    let mut ids = swarm.ids();
    ids.sort();
    Ok(index_partitions(ids.len(), max_splits, 2, cap)?
        .into_iter()
        .map(|blocks| SwarmPartition {
            parts: blocks
                .into_iter()
                .map(|b| b.into_iter().map(|i| ids[i]).collect())
                .collect(),
        })
        .collect())
}

/// Splits `ids` off `swarm`. Both halves keep the node and clock and must
/// hold at least two drones.
pub fn split_off(swarm: &SubSwarm, ids: &[DroneId]) -> Result<(SubSwarm, SubSwarm), SwarmError> {
    let wanted: BTreeSet<DroneId> = ids.iter().copied().collect();
    if wanted.len() != ids.len() {
        return Err(SwarmError::IllegalSplit("duplicate drone id".into()));
    }
    if let Some(missing) = wanted.iter().find(|id| !swarm.drones.iter().any(|d| d.id == **id)) {
        return Err(SwarmError::IllegalSplit(format!("{missing} is not in the swarm")));
    }
    if wanted.len() < 2 {
        return Err(SwarmError::IllegalSplit(format!(
            "split part has {} drones, need at least 2",
            wanted.len()
        )));
    }
    let rest = swarm.len() - wanted.len();
    if rest < 2 {
        return Err(SwarmError::IllegalSplit(format!(
            "remainder has {rest} drones, need at least 2"
        )));
    }
    let (taken, kept): (Vec<Drone>, Vec<Drone>) = swarm
        .drones
        .iter()
        .cloned()
        .partition(|d| wanted.contains(&d.id));
    let make = |drones| SubSwarm {
        drones,
        current_node: swarm.current_node,
        clock_minutes: swarm.clock_minutes,
    };
    Ok((make(taken), make(kept)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swarm(n: u32) -> SubSwarm {
        SubSwarm {
            drones: (0..n)
                .map(|i| Drone {
                    id: DroneId(i),
                    battery_percent: 100.0 - i as f64,
                    payload_kg: 1.0 + i as f64 * 0.5,
                })
                .collect(),
            current_node: NodeId(3),
            clock_minutes: 12.0,
        }
    }

    fn request(weights: Vec<f64>) -> DeliveryRequest {
        DeliveryRequest {
            source: NodeId(0),
            destination: NodeId(1),
            package_weights_kg: weights,
        }
    }

    #[test]
    fn build_two_drones() {
        let s = build_swarm(&request(vec![3.0, 5.0]), &DronePerformance::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.drones[0].payload_kg, 3.0);
        assert_eq!(s.drones[1].payload_kg, 5.0);
        assert!(s.drones.iter().all(|d| d.battery_percent == 100.0));
        assert_eq!(s.current_node, NodeId(0));
        assert_eq!(s.clock_minutes, 0.0);
    }

    #[test]
    fn build_rejects_heavy_and_tiny_requests() {
        let perf = DronePerformance::default();
        assert!(matches!(
            build_swarm(&request(vec![6.0, 1.0]), &perf),
            Err(SwarmError::PayloadExceedsCapacity { index: 0, .. })
        ));
        assert_eq!(
            build_swarm(&request(vec![1.0]), &perf),
            Err(SwarmError::TooFewPackages(1))
        );
        assert_eq!(build_swarm(&request(vec![5.0; 10]), &perf).unwrap().len(), 10);
    }

    #[test]
    fn partition_counts() {
        assert_eq!(enumerate_partitions(&swarm(4), 2, 1000).unwrap().len(), 4);
        assert_eq!(enumerate_partitions(&swarm(5), 2, 1000).unwrap().len(), 11);
        let p = enumerate_partitions(&swarm(4), 2, 1000).unwrap();
        assert_eq!(p[0].parts, vec![swarm(4).ids()]);
    }

    #[test]
    fn partition_cap() {
        assert_eq!(
            enumerate_partitions(&swarm(6), 3, 5),
            Err(SwarmError::PartitionCapExceeded { cap: 5 })
        );
    }

    #[test]
    fn split_sizes() {
        let s = swarm(5);
        let (a, b) = split_off(&s, &[DroneId(1), DroneId(3)]).unwrap();
        assert_eq!((a.len(), b.len()), (2, 3));
        assert_eq!(a.clock_minutes, b.clock_minutes);
        let s4 = swarm(4);
        assert!(matches!(
            split_off(&s4, &[DroneId(0), DroneId(1), DroneId(2)]),
            Err(SwarmError::IllegalSplit(msg)) if msg.contains("remainder")
        ));
        let (a, b) = split_off(&s4, &[DroneId(0), DroneId(2)]).unwrap();
        assert_eq!((a.len(), b.len()), (2, 2));
        assert_eq!(a.clock_minutes, b.clock_minutes);
        assert!(split_off(&s4, &[DroneId(9), DroneId(0)]).is_err());
        assert!(split_off(&s4, &[DroneId(1)]).is_err());
    }
}
