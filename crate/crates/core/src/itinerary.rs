//! Timed delivery plans and their re-simulation.
//!
//! An [`Itinerary`] is a tree of sub-swarms (the root holds every drone;
//! a split creates children that partition their parent) with a contiguous
//! timeline of legs per sub-swarm. [`validate_itinerary`] replays it against
//! the network and energy model and reports the first broken invariant.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{
    charge_duration, consumption_rate, node_time_from_durations, ChargeDemand, DronePerformance,
    EnergyError,
};
use crate::network::{NodeId, SkywayNetwork};
use crate::swarm::{Drone, DroneId, SubSwarm};

const TIME_EPS: f64 = 1e-6;
const BATTERY_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LegKind {
    Travel,
    Charge,
    Wait,
}

impl fmt::Display for LegKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LegKind::Travel => "travel",
            LegKind::Charge => "charge",
            LegKind::Wait => "wait",
        })
    }
}

/// One segment traversal, charge or wait of one sub-swarm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Leg {
    pub subswarm: usize,
    pub kind: LegKind,
    pub from: NodeId,
    pub to: NodeId,
    #[serde(rename = "start_min")]
    pub start_minutes: f64,
    #[serde(rename = "dur_min")]
    pub duration_minutes: f64,
    /// Per-drone charge targets; present on charge legs only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub charges: Vec<ChargeDemand>,
}

impl Leg {
    pub fn end_minutes(&self) -> f64 {
        self.start_minutes + self.duration_minutes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubSwarmRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub drones: Vec<DroneId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DroneRecord {
    pub id: DroneId,
    pub payload_kg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Itinerary {
    pub algorithm: String,
    pub source: NodeId,
    pub destination: NodeId,
    pub drones: Vec<DroneRecord>,
    pub subswarms: Vec<SubSwarmRecord>,
    /// Grouped by sub-swarm, each group in time order.
    pub legs: Vec<Leg>,
    #[serde(rename = "total_min")]
    pub total_delivery_minutes: f64,
    #[serde(rename = "travel_min")]
    pub travel_minutes: f64,
    #[serde(rename = "charge_min")]
    pub charge_minutes: f64,
    #[serde(rename = "wait_min")]
    pub wait_minutes: f64,
    #[serde(rename = "spread_min")]
    pub arrival_spread_minutes: f64,
    #[serde(rename = "window_min")]
    pub arrival_window_minutes: f64,
    pub reserve_percent: f64,
}

impl Itinerary {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("itinerary serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn legs_of(&self, subswarm: usize) -> impl Iterator<Item = &Leg> {
        self.legs.iter().filter(move |l| l.subswarm == subswarm)
    }

    /// Sub-swarms that never split; these are the ones that deliver.
    pub fn leaves(&self) -> Vec<usize> {
        self.subswarms
            .iter()
            .filter(|s| !self.subswarms.iter().any(|c| c.parent == Some(s.id)))
            .map(|s| s.id)
            .collect()
    }

    /// Time each leaf lands at the destination, before any waiting there.
    pub fn arrivals(&self) -> Vec<(usize, f64)> {
        self.leaves()
            .into_iter()
            .map(|id| {
                let t = self
                    .legs_of(id)
                    .filter(|l| l.kind == LegKind::Travel)
                    .map(Leg::end_minutes)
                    .last()
                    .unwrap_or(0.0);
                (id, t)
            })
            .collect()
    }

    /// Stations where some sub-swarm charged, in leg order.
    pub fn charge_stops(&self) -> Vec<NodeId> {
        self.legs
            .iter()
            .filter(|l| l.kind == LegKind::Charge)
            .map(|l| l.from)
            .collect()
    }
}

/// Accumulates legs while a planner walks sub-swarms through the network.
pub(crate) struct ItineraryBuilder<'a> {
    net: &'a SkywayNetwork,
    perf: &'a DronePerformance,
    algorithm: String,
    source: NodeId,
    destination: NodeId,
    drones: Vec<DroneRecord>,
    subswarms: Vec<SubSwarmRecord>,
    legs: Vec<Vec<Leg>>,
    /// Per leaf: index of the first leg of its final flight.
    final_flights: Vec<(usize, usize)>,
}

impl<'a> ItineraryBuilder<'a> {
    pub fn new(
        net: &'a SkywayNetwork,
        perf: &'a DronePerformance,
        algorithm: impl Into<String>,
        root: &SubSwarm,
        destination: NodeId,
    ) -> Self {
        ItineraryBuilder {
            net,
            perf,
            algorithm: algorithm.into(),
            source: root.current_node,
            destination,
            drones: root
                .drones
                .iter()
                .map(|d| DroneRecord {
                    id: d.id,
                    payload_kg: d.payload_kg,
                })
                .collect(),
            subswarms: vec![SubSwarmRecord {
                id: 0,
                parent: None,
                drones: root.ids(),
            }],
            legs: vec![Vec::new()],
            final_flights: Vec::new(),
        }
    }

    pub fn child(&mut self, parent: usize, swarm: &SubSwarm) -> usize {
        let id = self.subswarms.len();
        self.subswarms.push(SubSwarmRecord {
            id,
            parent: Some(parent),
            drones: swarm.ids(),
        });
        self.legs.push(Vec::new());
        id
    }

    /// Flies `path` edge by edge, draining batteries.
    pub fn fly(&mut self, id: usize, swarm: &mut SubSwarm, path: &[NodeId]) -> Result<(), EnergyError> {
        debug_assert_eq!(path.first(), Some(&swarm.current_node));
        for w in path.windows(2) {
            let km = self.net.edge_km(w[0], w[1]).expect("planned path follows edges");
            let dur = self.perf.travel_minutes(km);
            self.legs[id].push(Leg {
                subswarm: id,
                kind: LegKind::Travel,
                from: w[0],
                to: w[1],
                start_minutes: swarm.clock_minutes,
                duration_minutes: dur,
                charges: Vec::new(),
            });
            swarm.clock_minutes += dur;
            for d in &mut swarm.drones {
                d.battery_percent -= consumption_rate(self.perf, d.payload_kg)? * km;
            }
            swarm.current_node = w[1];
        }
        Ok(())
    }

    /// Same as [`fly`](Self::fly), remembering the flight as the leaf's last.
    pub fn fly_final(&mut self, id: usize, swarm: &mut SubSwarm, path: &[NodeId]) -> Result<(), EnergyError> {
        self.final_flights.push((id, self.legs[id].len()));
        self.fly(id, swarm, path)
    }

    /// Charges at the current node: a charge leg lasting the longest
    /// individual charge, then a wait leg for pad contention.
    pub fn charge(&mut self, id: usize, swarm: &mut SubSwarm, demands: Vec<ChargeDemand>) {
        let node = swarm.current_node;
        let durations: Vec<f64> = demands.iter().map(|d| charge_duration(self.perf, d)).collect();
        let nt = node_time_from_durations(&durations, self.net.pads(node));
        for d in &mut swarm.drones {
            if let Some(c) = demands.iter().find(|c| c.drone == d.id) {
                d.battery_percent = c.to_percent;
            }
        }
        self.legs[id].push(Leg {
            subswarm: id,
            kind: LegKind::Charge,
            from: node,
            to: node,
            start_minutes: swarm.clock_minutes,
            duration_minutes: nt.charging_minutes,
            charges: demands,
        });
        swarm.clock_minutes += nt.charging_minutes;
        self.legs[id].push(Leg {
            subswarm: id,
            kind: LegKind::Wait,
            from: node,
            to: node,
            start_minutes: swarm.clock_minutes,
            duration_minutes: nt.waiting_minutes,
            charges: Vec::new(),
        });
        swarm.clock_minutes += nt.waiting_minutes;
    }

    fn arrival(&self, id: usize) -> f64 {
        self.legs[id].last().map_or(0.0, Leg::end_minutes)
    }

    /// Enforces the arrival window: a leaf landing more than `window`
    /// before the last one waits at its final departure node; then every
    /// early leaf waits at the destination for the last.
    pub fn apply_window(&mut self, window: f64) {
        let last = self
            .final_flights
            .iter()
            .map(|&(id, _)| self.arrival(id))
            .fold(f64::NEG_INFINITY, f64::max);
        for &(id, start) in &self.final_flights.clone() {
            let arrival = self.arrival(id);
            let delay = last - window - arrival;
            if delay > 0.0 {
                let legs = &mut self.legs[id];
                let at = legs[start].from;
                let t0 = legs[start].start_minutes;
                for leg in legs[start..].iter_mut() {
                    leg.start_minutes += delay;
                }
                legs.insert(
                    start,
                    Leg {
                        subswarm: id,
                        kind: LegKind::Wait,
                        from: at,
                        to: at,
                        start_minutes: t0,
                        duration_minutes: delay,
                        charges: Vec::new(),
                    },
                );
            }
        }
        for &(id, _) in &self.final_flights.clone() {
            let arrival = self.arrival(id);
            if arrival < last {
                self.legs[id].push(Leg {
                    subswarm: id,
                    kind: LegKind::Wait,
                    from: self.destination,
                    to: self.destination,
                    start_minutes: arrival,
                    duration_minutes: last - arrival,
                    charges: Vec::new(),
                });
            }
        }
    }

    pub fn finish(self, window: f64, reserve_percent: f64) -> Itinerary {
        let mut legs: Vec<Leg> = self.legs.into_iter().flatten().collect();
        legs.sort_by_key(|l| l.subswarm);
        let mut it = Itinerary {
            algorithm: self.algorithm,
            source: self.source,
            destination: self.destination,
            drones: self.drones,
            subswarms: self.subswarms,
            legs,
            total_delivery_minutes: 0.0,
            travel_minutes: 0.0,
            charge_minutes: 0.0,
            wait_minutes: 0.0,
            arrival_spread_minutes: 0.0,
            arrival_window_minutes: window,
            reserve_percent,
        };
        let arrivals = it.arrivals();
        let (critical, last) = arrivals
            .iter()
            .copied()
            .fold((0, f64::NEG_INFINITY), |best, (id, t)| if t > best.1 { (id, t) } else { best });
        let first = arrivals.iter().map(|a| a.1).fold(f64::INFINITY, f64::min);
        let (travel, charge, wait) = chain_components(&it, critical);
        it.total_delivery_minutes = last;
        it.arrival_spread_minutes = last - first;
        it.travel_minutes = travel;
        it.charge_minutes = charge;
        it.wait_minutes = wait;
        it
    }
}

/// Travel, charge and wait minutes along `leaf` and its ancestors, up to
/// the leaf's arrival at the destination.
fn chain_components(it: &Itinerary, leaf: usize) -> (f64, f64, f64) {
    let mut chain = vec![leaf];
    while let Some(p) = it.subswarms[*chain.last().unwrap()].parent {
        chain.push(p);
    }
    let (mut t, mut c, mut w) = (0.0, 0.0, 0.0);
    for &id in chain.iter().rev() {
        let legs: Vec<&Leg> = it.legs_of(id).collect();
        let last_travel = legs.iter().rposition(|l| l.kind == LegKind::Travel);
        let cut = if id == leaf {
            last_travel.map_or(0, |i| i + 1)
        } else {
            legs.len()
        };
        for leg in &legs[..cut] {
            match leg.kind {
                LegKind::Travel => t += leg.duration_minutes,
                LegKind::Charge => c += leg.duration_minutes,
                LegKind::Wait => w += leg.duration_minutes,
            }
        }
    }
    (t, c, w)
}

/// The invariant an itinerary breaks, named for reporting.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("battery invariant violated: {0}")]
    Battery(String),
    #[error("window invariant violated: spread {spread} min exceeds window {window} min")]
    Window { spread: f64, window: f64 },
    #[error("additivity invariant violated: {0}")]
    Additivity(String),
    #[error("subswarm size invariant violated: sub-swarm {id} has {size} drones")]
    SubSwarmSize { id: usize, size: usize },
    #[error("conservation invariant violated: {0}")]
    Conservation(String),
    #[error("continuity invariant violated: {0}")]
    Continuity(String),
    #[error("adjacency invariant violated: {0}")]
    Adjacency(String),
    #[error("duration invariant violated: {0}")]
    Duration(String),
    #[error("node time invariant violated: {0}")]
    NodeTime(String),
    #[error("totals invariant violated: {0}")]
    Totals(String),
}

impl Violation {
    pub fn name(&self) -> &'static str {
        match self {
            Violation::Battery(_) => "battery",
            Violation::Window { .. } => "window",
            Violation::Additivity(_) => "additivity",
            Violation::SubSwarmSize { .. } => "subswarm_size",
            Violation::Conservation(_) => "conservation",
            Violation::Continuity(_) => "continuity",
            Violation::Adjacency(_) => "adjacency",
            Violation::Duration(_) => "duration",
            Violation::NodeTime(_) => "node_time",
            Violation::Totals(_) => "totals",
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Replays `it` against the network and energy model.
pub fn validate_itinerary(
    net: &SkywayNetwork,
    perf: &DronePerformance,
    it: &Itinerary,
) -> Result<(), Violation> {
    use Violation::*;

    // Structure: the root holds every drone, children partition parents.
    let all: Vec<DroneId> = it.drones.iter().map(|d| d.id).collect();
    {
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != all.len() {
            return Err(Conservation("duplicate drone ids".into()));
        }
    }
    for (i, s) in it.subswarms.iter().enumerate() {
        if s.id != i {
            return Err(Conservation(format!("sub-swarm at index {i} has id {}", s.id)));
        }
        if s.drones.len() < 2 {
            return Err(SubSwarmSize {
                id: s.id,
                size: s.drones.len(),
            });
        }
        match s.parent {
            None if i != 0 => return Err(Conservation(format!("sub-swarm {i} has no parent"))),
            Some(p) if p >= i => {
                return Err(Conservation(format!("sub-swarm {i} has later parent {p}")))
            }
            _ => {}
        }
    }
    let Some(root) = it.subswarms.first() else {
        return Err(Conservation("no sub-swarms".into()));
    };
    let same_set = |a: &[DroneId], b: &[DroneId]| {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort();
        b.sort();
        a == b
    };
    if !same_set(&root.drones, &all) {
        return Err(Conservation("root sub-swarm does not carry every drone".into()));
    }
    for s in &it.subswarms {
        let kids: Vec<DroneId> = it
            .subswarms
            .iter()
            .filter(|c| c.parent == Some(s.id))
            .flat_map(|c| c.drones.iter().copied())
            .collect();
        if !kids.is_empty() && !same_set(&kids, &s.drones) {
            return Err(Conservation(format!(
                "children of sub-swarm {} do not partition its drones",
                s.id
            )));
        }
    }
    for d in &it.drones {
        if consumption_rate(perf, d.payload_kg).is_err() {
            return Err(Battery(format!("drone {} payload {} kg unflyable", d.id, d.payload_kg)));
        }
    }

    // Timelines, with a per-drone battery replay.
    let payload = |id: DroneId| it.drones.iter().find(|d| d.id == id).unwrap().payload_kg;
    let mut battery: Vec<Option<f64>> = vec![None; it.drones.len()];
    let slot = |id: DroneId| all.iter().position(|&x| x == id).unwrap();
    for &id in &all {
        battery[slot(id)] = Some(100.0);
    }
    let mut end_state: Vec<(NodeId, f64)> = vec![(it.source, 0.0); it.subswarms.len()];
    let reserve = it.reserve_percent;
    for s in &it.subswarms {
        let (mut node, mut clock) = match s.parent {
            None => (it.source, 0.0),
            Some(p) => end_state[p],
        };
        let legs: Vec<&Leg> = it.legs_of(s.id).collect();
        let has_children = it.subswarms.iter().any(|c| c.parent == Some(s.id));
        if legs.is_empty() && !has_children {
            return Err(Continuity(format!("sub-swarm {} has no legs", s.id)));
        }
        let mut k = 0;
        while k < legs.len() {
            let leg = legs[k];
            if leg.from != node {
                return Err(Continuity(format!(
                    "sub-swarm {} leg {k} starts at {} but swarm is at {node}",
                    s.id, leg.from
                )));
            }
            if !close(leg.start_minutes, clock, TIME_EPS) {
                return Err(Continuity(format!(
                    "sub-swarm {} leg {k} starts at {} min, expected {clock}",
                    s.id, leg.start_minutes
                )));
            }
            if !(leg.duration_minutes >= 0.0) {
                return Err(Duration(format!("negative duration on sub-swarm {} leg {k}", s.id)));
            }
            match leg.kind {
                LegKind::Travel => {
                    let Some(km) = net.edge_km(leg.from, leg.to) else {
                        return Err(Adjacency(format!("{} and {} are not adjacent", leg.from, leg.to)));
                    };
                    if !close(leg.duration_minutes, perf.travel_minutes(km), 1e-9) {
                        return Err(Duration(format!(
                            "travel {}->{} takes {} min, expected {}",
                            leg.from,
                            leg.to,
                            leg.duration_minutes,
                            perf.travel_minutes(km)
                        )));
                    }
                    for &d in &s.drones {
                        let b = battery[slot(d)].as_mut().unwrap();
                        *b -= consumption_rate(perf, payload(d)).unwrap() * km;
                        if *b < reserve - BATTERY_EPS {
                            return Err(Battery(format!(
                                "drone {d} at {b:.6}% after {}->{} (reserve {reserve}%)",
                                leg.from, leg.to
                            )));
                        }
                    }
                    node = leg.to;
                }
                LegKind::Charge => {
                    if leg.to != leg.from {
                        return Err(Adjacency("charge leg moves".into()));
                    }
                    if !same_set(&leg.charges.iter().map(|c| c.drone).collect::<Vec<_>>(), &s.drones) {
                        return Err(NodeTime(format!(
                            "charge at {} does not list exactly the sub-swarm's drones",
                            leg.from
                        )));
                    }
                    let mut durations = Vec::new();
                    for c in &leg.charges {
                        let b = battery[slot(c.drone)].as_mut().unwrap();
                        if !close(c.from_percent, *b, BATTERY_EPS) || c.from_percent < 0.0 {
                            return Err(Battery(format!(
                                "drone {} charges from {}% but holds {b:.6}%",
                                c.drone, c.from_percent
                            )));
                        }
                        if !(c.to_percent >= c.from_percent && c.to_percent <= 100.0 + BATTERY_EPS) {
                            return Err(Battery(format!(
                                "drone {} charge target {}% outside [{}, 100]",
                                c.drone, c.to_percent, c.from_percent
                            )));
                        }
                        *b = c.to_percent;
                        durations.push(charge_duration(perf, c));
                    }
                    let nt = node_time_from_durations(&durations, net.pads(leg.from));
                    if !close(leg.duration_minutes, nt.charging_minutes, 1e-9) {
                        return Err(NodeTime(format!(
                            "charge at {} lasts {} min, longest charge is {}",
                            leg.from, leg.duration_minutes, nt.charging_minutes
                        )));
                    }
                    let wait = legs.get(k + 1).filter(|l| l.kind == LegKind::Wait && l.from == leg.from);
                    let Some(wait) = wait else {
                        return Err(NodeTime(format!("charge at {} lacks its pad wait leg", leg.from)));
                    };
                    if !close(wait.duration_minutes, nt.waiting_minutes, 1e-9) {
                        return Err(NodeTime(format!(
                            "pad wait at {} lasts {} min, rounds model gives {}",
                            leg.from, wait.duration_minutes, nt.waiting_minutes
                        )));
                    }
                }
                LegKind::Wait => {
                    if leg.to != leg.from {
                        return Err(Adjacency("wait leg moves".into()));
                    }
                }
            }
            clock = leg.end_minutes();
            k += 1;
        }
        end_state[s.id] = (node, clock);
    }

    let leaves = it.leaves();
    for &l in &leaves {
        if end_state[l].0 != it.destination {
            return Err(Conservation(format!(
                "sub-swarm {l} ends at {} instead of the destination",
                end_state[l].0
            )));
        }
    }

    let arrivals = it.arrivals();
    let last = arrivals.iter().map(|a| a.1).fold(f64::NEG_INFINITY, f64::max);
    let first = arrivals.iter().map(|a| a.1).fold(f64::INFINITY, f64::min);
    if !close(it.total_delivery_minutes, last, TIME_EPS) {
        return Err(Totals(format!(
            "total {} min but last arrival at {last}",
            it.total_delivery_minutes
        )));
    }
    if !close(it.arrival_spread_minutes, last - first, TIME_EPS) {
        return Err(Totals(format!(
            "spread {} min but arrivals span {}",
            it.arrival_spread_minutes,
            last - first
        )));
    }
    if last - first > it.arrival_window_minutes + TIME_EPS {
        return Err(Window {
            spread: last - first,
            window: it.arrival_window_minutes,
        });
    }
    let sum = it.travel_minutes + it.charge_minutes + it.wait_minutes;
    if !close(sum, it.total_delivery_minutes, 1e-9) {
        return Err(Additivity(format!(
            "travel {} + charge {} + wait {} != total {}",
            it.travel_minutes, it.charge_minutes, it.wait_minutes, it.total_delivery_minutes
        )));
    }
    Ok(())
}

/// Fresh, fully charged copies of `drones`.
pub(crate) fn recharged(drones: &[Drone]) -> Vec<Drone> {
    drones
        .iter()
        .map(|d| Drone {
            battery_percent: 100.0,
            ..d.clone()
        })
        .collect()
}
