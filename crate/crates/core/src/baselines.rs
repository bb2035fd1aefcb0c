//! Comparison algorithms: Dijkstra over delivery-cost edges and an
//! exhaustive per-path oracle.

use crate::energy::{can_reach, consumption_rate, full_charge_demands, node_time, DronePerformance};
use crate::itinerary::{Itinerary, ItineraryBuilder};
use crate::network::{enumerate_simple_paths, NetworkError, NodeId, SkywayNetwork};
use crate::planner::{PlanError, PlannerConfig};
use crate::swarm::{DeliveryRequest, Drone, SubSwarm};

fn check_request(
    net: &SkywayNetwork,
    swarm: &SubSwarm,
    request: &DeliveryRequest,
    perf: &DronePerformance,
    config: &PlannerConfig,
) -> Result<(), PlanError> {
    config.validate()?;
    perf.validate()?;
    net.check(request.source)?;
    net.check(request.destination)?;
    if request.source == request.destination {
        return Err(PlanError::InvalidRequest("source equals destination".into()));
    }
    if swarm.current_node != request.source {
        return Err(PlanError::InvalidRequest(format!(
            "swarm is at {}, request starts at {}",
            swarm.current_node, request.source
        )));
    }
    for d in &swarm.drones {
        consumption_rate(perf, d.payload_kg)?;
    }
    Ok(())
}

/// Delivery cost of every directed segment for one swarm: travel time plus
/// the node time of recharging the whole swarm to 100% at the head node.
/// Arriving at the destination costs travel only. `None` marks segments
/// some drone cannot fly on a full battery.
#[derive(Debug, Clone, PartialEq)]
pub struct CostEdgeWeights {
    /// Per node, outgoing `(head, cost)` in ascending head order.
    pub out: Vec<Vec<(NodeId, Option<f64>)>>,
}

impl CostEdgeWeights {
    pub fn new(
        net: &SkywayNetwork,
        drones: &[Drone],
        destination: NodeId,
        perf: &DronePerformance,
        reserve_percent: f64,
    ) -> Result<Self, PlanError> {
        let mut out = Vec::with_capacity(net.node_count());
        for u in net.nodes() {
            let mut row = Vec::new();
            for &(v, km) in net.neighbors(u) {
                let ok = drones
                    .iter()
                    .all(|d| can_reach(perf, 100.0, d.payload_kg, km, reserve_percent));
                let cost = if !ok {
                    None
                } else if v == destination {
                    Some(perf.travel_minutes(km))
                } else {
                    let mut arrival = drones.to_vec();
                    for d in &mut arrival {
                        d.battery_percent = 100.0 - consumption_rate(perf, d.payload_kg)? * km;
                    }
                    let nt = node_time(perf, &full_charge_demands(&arrival), net.pads(v));
                    Some(perf.travel_minutes(km) + nt.total_minutes)
                };
                row.push((v, cost));
            }
            out.push(row);
        }
        Ok(CostEdgeWeights { out })
    }
}

/// Least-cost route under [`CostEdgeWeights`], replayed with a full
/// recharge at every intermediate station.
pub fn dijkstra_baseline(
    net: &SkywayNetwork,
    swarm: &SubSwarm,
    request: &DeliveryRequest,
    perf: &DronePerformance,
    config: &PlannerConfig,
) -> Result<Itinerary, PlanError> {
    check_request(net, swarm, request, perf, config)?;
    let (src, dest) = (request.source, request.destination);
    let w = CostEdgeWeights::new(net, &swarm.drones, dest, perf, config.reserve_percent)?;
    let n = net.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<NodeId>> = vec![None; n];
    let mut done = vec![false; n];
    dist[src.index()] = 0.0;
    loop {
        // Smallest tentative cost, lower id on ties.
        let Some(u) = (0..n)
            .filter(|&i| !done[i] && dist[i].is_finite())
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)))
        else {
            break;
        };
        done[u] = true;
        if u == dest.index() {
            break;
        }
        for &(v, cost) in &w.out[u] {
            let Some(cost) = cost else { continue };
            let nd = dist[u] + cost;
            if !done[v.index()] && nd < dist[v.index()] {
                dist[v.index()] = nd;
                parent[v.index()] = Some(NodeId(u as u32));
            }
        }
    }
    if !done[dest.index()] {
        return Err(PlanError::NoFeasiblePath);
    }
    let mut path = vec![dest];
    while let Some(p) = parent[path.last().unwrap().index()] {
        path.push(p);
    }
    path.reverse();
    let stops: Vec<usize> = (1..path.len() - 1).collect();
    replay(net, swarm, perf, config, "dijkstra", &path, &stops)
}

/// Flies `path` charging to 100% at the given positions along it.
fn replay(
    net: &SkywayNetwork,
    swarm: &SubSwarm,
    perf: &DronePerformance,
    config: &PlannerConfig,
    algorithm: &str,
    path: &[NodeId],
    stops: &[usize],
) -> Result<Itinerary, PlanError> {
    let dest = *path.last().unwrap();
    let mut s = swarm.clone();
    let mut b = ItineraryBuilder::new(net, perf, algorithm, &s, dest);
    let mut at = 0;
    for &i in stops {
        b.fly(0, &mut s, &path[at..=i])?;
        let demands = full_charge_demands(&s.drones);
        b.charge(0, &mut s, demands);
        at = i;
    }
    b.fly_final(0, &mut s, &path[at..])?;
    b.apply_window(config.arrival_window_minutes);
    Ok(b.finish(config.arrival_window_minutes, config.reserve_percent))
}

/// Best total along one path and the charging positions achieving it.
///
/// Charging always refills to 100%, so the swarm state right after a
/// charge depends only on where it happened; a dynamic program over the
/// last charging position covers every subset of stops.
fn best_on_path(
    net: &SkywayNetwork,
    swarm: &SubSwarm,
    perf: &DronePerformance,
    reserve: f64,
    path: &[NodeId],
) -> Result<Option<(f64, Vec<usize>)>, PlanError> {
    let k = path.len() - 1;
    let rates = swarm
        .drones
        .iter()
        .map(|d| consumption_rate(perf, d.payload_kg))
        .collect::<Result<Vec<_>, _>>()?;
    let legs: Vec<f64> = path
        .windows(2)
        .map(|w| net.edge_km(w[0], w[1]).expect("paths follow edges"))
        .collect();
    // best[i]: clock after charging at position i, and the previous stop.
    let mut best: Vec<Option<(f64, usize)>> = vec![None; k + 1];
    best[0] = Some((swarm.clock_minutes, usize::MAX));
    let mut finish: Option<(f64, usize)> = None;
    for i in 0..k {
        let Some((t0, _)) = best[i] else { continue };
        let mut batt: Vec<f64> = if i == 0 {
            swarm.drones.iter().map(|d| d.battery_percent).collect()
        } else {
            vec![100.0; rates.len()]
        };
        let mut t = t0;
        for j in i + 1..=k {
            let km = legs[j - 1];
            for (b, r) in batt.iter_mut().zip(&rates) {
                *b -= r * km;
            }
            if batt.iter().any(|&b| b < reserve - crate::energy::PERCENT_EPS) {
                break;
            }
            t += perf.travel_minutes(km);
            if j == k {
                if finish.map_or(true, |f| t < f.0) {
                    finish = Some((t, i));
                }
            } else {
                let arrival: Vec<Drone> = swarm
                    .drones
                    .iter()
                    .zip(&batt)
                    .map(|(d, &b)| Drone {
                        battery_percent: b,
                        ..d.clone()
                    })
                    .collect();
                let nt = node_time(perf, &full_charge_demands(&arrival), net.pads(path[j]));
                let t2 = t + nt.charging_minutes + nt.waiting_minutes;
                if best[j].map_or(true, |b| t2 < b.0) {
                    best[j] = Some((t2, i));
                }
            }
        }
    }
    let Some((total, mut prev)) = finish else {
        return Ok(None);
    };
    let mut stops = Vec::new();
    while prev != 0 {
        stops.push(prev);
        prev = best[prev].unwrap().1;
    }
    stops.reverse();
    Ok(Some((total, stops)))
}

/// Exhaustive search: the whole swarm follows each simple path with the
/// best choice of full-recharge stops; the fastest path wins, the first
/// one found on ties. Refuses when there are more than `max_paths` paths.
pub fn brute_force_oracle(
    net: &SkywayNetwork,
    swarm: &SubSwarm,
    request: &DeliveryRequest,
    perf: &DronePerformance,
    config: &PlannerConfig,
    max_paths: usize,
) -> Result<Itinerary, PlanError> {
    check_request(net, swarm, request, perf, config)?;
    let paths = match enumerate_simple_paths(net, request.source, request.destination, max_paths) {
        Ok(p) => p,
        Err(NetworkError::PathBudgetExceeded { budget, .. }) => {
            return Err(PlanError::PathBudgetExceeded { budget })
        }
        Err(e) => return Err(e.into()),
    };
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    for (pi, p) in paths.iter().enumerate() {
        if let Some((total, stops)) = best_on_path(net, swarm, perf, config.reserve_percent, p.nodes())? {
            if best.as_ref().map_or(true, |b| total < b.0) {
                best = Some((total, pi, stops));
            }
        }
    }
    let (_, pi, stops) = best.ok_or(PlanError::NoFeasiblePath)?;
    replay(net, swarm, perf, config, "brute_force", paths[pi].nodes(), &stops)
}
