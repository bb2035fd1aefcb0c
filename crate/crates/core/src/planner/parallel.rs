use std::cell::RefCell;
use std::collections::{HashMap, VecDeque};
use std::rc::Rc;

use crate::energy::{
    cooperative_targets, cooperative_targets_per_drone, full_charge_demands, node_time,
    DronePerformance,
};
use crate::itinerary::{recharged, Itinerary, ItineraryBuilder};
use crate::network::{NodeId, SkywayNetwork};
use crate::swarm::{index_partitions, split_off, DeliveryRequest, Drone, DroneId, SubSwarm};

use super::{Action, CandidateScore, Ctx, Decision, PlanError, PlanObserver, PlannerConfig};

type Mask = u64;

#[derive(Debug, Clone)]
enum Choice {
    Direct,
    Split { departing: Mask },
    /// Parts as drone-index masks with their station and distance.
    Move { parts: Vec<(Mask, NodeId, f64)> },
}

/// Lexicographic score of a partition-to-station assignment.
#[derive(Debug, Clone, PartialEq)]
struct Key {
    makespan: f64,
    sum: f64,
    nodes: Vec<NodeId>,
}

impl Key {
    fn less(&self, other: &Key) -> bool {
        self.makespan
            .total_cmp(&other.makespan)
            .then(self.sum.total_cmp(&other.sum))
            .then_with(|| self.nodes.cmp(&other.nodes))
            .is_lt()
    }
}

fn members(mask: Mask, drones: &[Drone]) -> Vec<Drone> {
    drones
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, d)| d.clone())
        .collect()
}

fn ids_of(mask: Mask, drones: &[Drone]) -> Vec<DroneId> {
    members(mask, drones).into_iter().map(|d| d.id).collect()
}

struct Planner<'a> {
    ctx: Ctx<'a>,
    partitions: RefCell<HashMap<usize, Rc<Vec<Vec<Mask>>>>>,
}

impl<'a> Planner<'a> {
    fn partitions(&self, n: usize) -> Result<Rc<Vec<Vec<Mask>>>, PlanError> {
        if let Some(p) = self.partitions.borrow().get(&n) {
            return Ok(p.clone());
        }
        let blocks = index_partitions(n, self.ctx.cfg.max_splits, 2, self.ctx.cfg.partition_cap)?;
        let masks: Vec<Vec<Mask>> = blocks
            .into_iter()
            .map(|p| {
                p.into_iter()
                    .map(|b| b.into_iter().fold(0, |m, i| m | 1 << i))
                    .collect()
            })
            .collect();
        let rc = Rc::new(masks);
        self.partitions.borrow_mut().insert(n, rc.clone());
        Ok(rc)
    }

    /// Time a part adds by flying `km` to `c` and charging there, or
    /// `None` if one of its drones cannot make it.
    fn part_cost(&self, part: &[Drone], c: NodeId, km: f64) -> Result<Option<f64>, PlanError> {
        let ctx = &self.ctx;
        if !part.iter().all(|d| ctx.reaches(d, km)) {
            return Ok(None);
        }
        let arrival = ctx.arrive(part, km);
        let pads = ctx.net.pads(c);
        let demands = if ctx.cfg.cooperative && part.len() > pads as usize {
            let onward = ctx.dist_to_dest(c);
            if recharged(part).iter().all(|d| ctx.reaches(d, onward)) {
                cooperative_targets(ctx.perf, &arrival, pads, onward, ctx.cfg.reserve_percent)?
            } else {
                full_charge_demands(&arrival)
            }
        } else {
            full_charge_demands(&arrival)
        };
        Ok(Some(
            ctx.perf.travel_minutes(km) + node_time(ctx.perf, &demands, pads).total_minutes,
        ))
    }

    /// Best partition and distinct-station assignment over `cands`.
    fn best_combination(
        &self,
        drones: &[Drone],
        cands: &[(NodeId, f64)],
        record: bool,
    ) -> Result<(Option<(Key, Vec<(Mask, NodeId, f64)>)>, Vec<CandidateScore>), PlanError> {
        let partitions = self.partitions(drones.len())?;
        let mut costs: HashMap<Mask, Vec<Option<f64>>> = HashMap::new();
        let mut best: Option<(Key, Vec<(Mask, NodeId, f64)>)> = None;
        let mut scored = Vec::new();
        for parts in partitions.iter() {
            if parts.len() > cands.len() {
                continue;
            }
            for &mask in parts {
                if !costs.contains_key(&mask) {
                    let part = members(mask, drones);
                    let row = cands
                        .iter()
                        .map(|&(c, km)| self.part_cost(&part, c, km))
                        .collect::<Result<Vec<_>, _>>()?;
                    costs.insert(mask, row);
                }
            }
            let rows: Vec<&Vec<Option<f64>>> = parts.iter().map(|m| &costs[m]).collect();
            let bound = if record { None } else { best.as_ref().map(|b| b.0.clone()) };
            let mut local: Option<(Key, Vec<usize>)> = None;
            let mut used = vec![false; cands.len()];
            let mut picks = Vec::with_capacity(parts.len());
            assign(&rows, cands, 0, 0.0, 0.0, &mut used, &mut picks, bound.as_ref(), &mut local);
            if let Some((key, picks)) = local {
                if record {
                    scored.push(CandidateScore {
                        parts: parts.iter().map(|&m| ids_of(m, drones)).collect(),
                        nodes: key.nodes.clone(),
                        makespan_minutes: key.makespan,
                        sum_minutes: key.sum,
                    });
                }
                if best.as_ref().map_or(true, |b| key.less(&b.0)) {
                    let chosen = parts
                        .iter()
                        .zip(&picks)
                        .map(|(&m, &ci)| (m, cands[ci].0, cands[ci].1))
                        .collect();
                    best = Some((key, chosen));
                }
            }
        }
        Ok((best, scored))
    }

    fn choose(
        &self,
        swarm: &SubSwarm,
        visited: &[bool],
        record: bool,
    ) -> Result<(Choice, Vec<CandidateScore>), PlanError> {
        let ctx = &self.ctx;
        let node = swarm.current_node;
        let direct_km = ctx.dist_to_dest(node);
        let reach: Mask = swarm
            .drones
            .iter()
            .enumerate()
            .filter(|(_, d)| ctx.reaches(d, direct_km))
            .fold(0, |m, (i, _)| m | 1 << i);
        let n = swarm.len();
        let r = reach.count_ones() as usize;
        if r == n {
            return Ok((Choice::Direct, Vec::new()));
        }
        if r >= 2 && n - r >= 2 {
            return Ok((Choice::Split { departing: reach }, Vec::new()));
        }
        let all = ctx.router.candidates(node, ctx.cfg.lookahead, ctx.dest);
        let fresh: Vec<(NodeId, f64)> = all
            .iter()
            .copied()
            .filter(|(c, _)| !visited[c.index()])
            .collect();
        let (best, scored) = self.best_combination(&swarm.drones, &fresh, record)?;
        if let Some((_, parts)) = best {
            return Ok((Choice::Move { parts }, scored));
        }
        // Only visited stations left: the whole sub-swarm heads for the
        // one nearest the destination, so revisits cannot cycle.
        let revisit = all
            .iter()
            .filter(|&&(_, km)| swarm.drones.iter().all(|d| ctx.reaches(d, km)))
            .min_by(|a, b| {
                ctx.dist_to_dest(a.0)
                    .total_cmp(&ctx.dist_to_dest(b.0))
                    .then(a.0.cmp(&b.0))
            });
        match revisit {
            Some(&(c, km)) => {
                let everyone = (0..n).fold(0, |m, i| m | 1 << i);
                Ok((Choice::Move { parts: vec![(everyone, c, km)] }, scored))
            }
            None => Err(PlanError::NoFeasibleCandidate { node }),
        }
    }
}

/// Branch and bound over injective part-to-station assignments, stations
/// tried in ascending id order.
#[allow(clippy::too_many_arguments)]
fn assign(
    rows: &[&Vec<Option<f64>>],
    cands: &[(NodeId, f64)],
    part: usize,
    cur_max: f64,
    cur_sum: f64,
    used: &mut Vec<bool>,
    picks: &mut Vec<usize>,
    bound: Option<&Key>,
    local: &mut Option<(Key, Vec<usize>)>,
) {
    if part == rows.len() {
        let key = Key {
            makespan: cur_max,
            sum: cur_sum,
            nodes: picks.iter().map(|&i| cands[i].0).collect(),
        };
        let beats_bound = bound.map_or(true, |b| key.less(b));
        let beats_local = local.as_ref().map_or(true, |l| key.less(&l.0));
        if beats_bound && beats_local {
            *local = Some((key, picks.clone()));
        }
        return;
    }
    for ci in 0..cands.len() {
        if used[ci] {
            continue;
        }
        let Some(cost) = rows[part][ci] else { continue };
        let new_max = cur_max.max(cost);
        let new_sum = cur_sum + cost;
        let dominated = |k: &Key| new_max > k.makespan || (new_max >= k.makespan && new_sum > k.sum);
        if bound.map_or(false, dominated) || local.as_ref().map_or(false, |l| dominated(&l.0)) {
            continue;
        }
        used[ci] = true;
        picks.push(ci);
        assign(rows, cands, part + 1, new_max, new_sum, used, picks, bound, local);
        picks.pop();
        used[ci] = false;
    }
}

struct Active {
    id: usize,
    swarm: SubSwarm,
    visited: Vec<bool>,
    stops: usize,
    planned: Option<Choice>,
}

/// Lets the swarm disband into sub-swarms that travel and charge
/// independently and regroup at the destination.
pub fn compose_parallel(
    net: &SkywayNetwork,
    swarm: &SubSwarm,
    request: &DeliveryRequest,
    perf: &DronePerformance,
    config: &PlannerConfig,
) -> Result<Itinerary, PlanError> {
    compose_parallel_traced(net, swarm, request, perf, config, &mut ())
}

pub fn compose_parallel_traced(
    net: &SkywayNetwork,
    swarm: &SubSwarm,
    request: &DeliveryRequest,
    perf: &DronePerformance,
    config: &PlannerConfig,
    observer: &mut dyn PlanObserver,
) -> Result<Itinerary, PlanError> {
    if swarm.len() > Mask::BITS as usize {
        return Err(PlanError::InvalidRequest(format!(
            "at most {} drones per swarm",
            Mask::BITS
        )));
    }
    let planner = Planner {
        ctx: Ctx::new(net, swarm, request, perf, config)?,
        partitions: RefCell::new(HashMap::new()),
    };
    let ctx = &planner.ctx;
    let record = observer.enabled();
    let mut builder = ItineraryBuilder::new(net, perf, "parallel", swarm, ctx.dest);
    let mut visited = vec![false; net.node_count()];
    visited[swarm.current_node.index()] = true;
    let mut queue = VecDeque::from([Active {
        id: 0,
        swarm: swarm.clone(),
        visited,
        stops: 0,
        planned: None,
    }]);
    let mut step = 0;

    while let Some(mut a) = queue.pop_front() {
        let (choice, candidates) = match a.planned.take() {
            Some(c) => (c, Vec::new()),
            None => planner.choose(&a.swarm, &a.visited, record)?,
        };
        if record {
            let drones = &a.swarm.drones;
            let action = match &choice {
                Choice::Direct => Action::Direct,
                Choice::Split { departing } => Action::SplitToDestination {
                    departing: ids_of(*departing, drones),
                    staying: ids_of(!*departing, drones),
                },
                Choice::Move { parts } => Action::Move {
                    parts: parts.iter().map(|&(m, c, _)| (ids_of(m, drones), c)).collect(),
                },
            };
            let mut active = vec![a.id];
            active.extend(queue.iter().map(|q| q.id));
            observer.on_decision(&Decision {
                step,
                subswarm: a.id,
                node: a.swarm.current_node,
                clock_minutes: a.swarm.clock_minutes,
                active,
                candidates,
                action,
            });
        }
        step += 1;
        let here = a.swarm.current_node;
        let tree = ctx.router.tree(here);
        match choice {
            Choice::Direct => {
                let path = tree.path_nodes(ctx.dest).to_vec();
                builder.fly_final(a.id, &mut a.swarm, &path)?;
            }
            Choice::Split { departing } => {
                let (mut go, mut stay) = split_off(&a.swarm, &ids_of(departing, &a.swarm.drones))?;
                let go_id = builder.child(a.id, &go);
                let stay_id = builder.child(a.id, &stay);
                let path = tree.path_nodes(ctx.dest).to_vec();
                builder.fly_final(go_id, &mut go, &path)?;
                if stay.drones.iter().any(|d| d.battery_percent < 100.0) {
                    let demands = full_charge_demands(&stay.drones);
                    builder.charge(stay_id, &mut stay, demands);
                }
                queue.push_front(Active {
                    id: stay_id,
                    swarm: stay,
                    visited: a.visited,
                    stops: a.stops,
                    planned: None,
                });
            }
            Choice::Move { parts } => {
                let stops = a.stops + 1;
                if stops > ctx.max_stops {
                    return Err(PlanError::StopLimitExceeded { limit: ctx.max_stops });
                }
                let single = parts.len() == 1;
                let mut spawned = Vec::new();
                for (mask, c, _) in parts {
                    let mut part = SubSwarm {
                        drones: members(mask, &a.swarm.drones),
                        current_node: here,
                        clock_minutes: a.swarm.clock_minutes,
                    };
                    let id = if single { a.id } else { builder.child(a.id, &part) };
                    let path = tree.path_nodes(c).to_vec();
                    builder.fly(id, &mut part, &path)?;
                    let mut seen = a.visited.clone();
                    for v in &path {
                        seen[v.index()] = true;
                    }
                    let mut planned = None;
                    let demands = if config.cooperative {
                        let full = SubSwarm {
                            drones: recharged(&part.drones),
                            ..part.clone()
                        };
                        let (next, _) = planner.choose(&full, &seen, false)?;
                        let legs = onward_legs(ctx, &next, &part);
                        planned = Some(next);
                        cooperative_targets_per_drone(
                            perf,
                            &part.drones,
                            net.pads(c),
                            &legs,
                            config.reserve_percent,
                        )?
                    } else {
                        full_charge_demands(&part.drones)
                    };
                    builder.charge(id, &mut part, demands);
                    spawned.push(Active {
                        id,
                        swarm: part,
                        visited: seen,
                        stops,
                        planned,
                    });
                }
                for s in spawned.into_iter().rev() {
                    queue.push_front(s);
                }
            }
        }
    }
    builder.apply_window(config.arrival_window_minutes);
    Ok(builder.finish(config.arrival_window_minutes, config.reserve_percent))
}

/// Per-drone length of the leg `next` will fly from the sub-swarm's
/// station; `None` where the drone will charge fully anyway.
fn onward_legs(ctx: &Ctx<'_>, next: &Choice, part: &SubSwarm) -> Vec<Option<f64>> {
    let direct = ctx.dist_to_dest(part.current_node);
    (0..part.len())
        .map(|i| match next {
            Choice::Direct => Some(direct),
            Choice::Split { departing } => (departing >> i & 1 == 1).then_some(direct),
            Choice::Move { parts } => parts
                .iter()
                .find(|(m, _, _)| m >> i & 1 == 1)
                .map(|&(_, _, km)| km),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{compose_sequential, Trace};
    use crate::swarm::build_swarm;

    fn n(v: u32) -> NodeId {
        NodeId(v)
    }

    /// Source 0, destination `k + 1`, `k` one-pad stations in between,
    /// every segment 600 km.
    fn fan(k: u32) -> SkywayNetwork {
        let d = k + 1;
        let mut edges = Vec::new();
        for s in 1..=k {
            edges.push((n(0), n(s), 600.0));
            edges.push((n(s), n(d), 600.0));
        }
        SkywayNetwork::new(vec![1; d as usize + 1], edges).unwrap()
    }

    fn request(dest: u32, drones: usize) -> DeliveryRequest {
        DeliveryRequest {
            source: n(0),
            destination: n(dest),
            package_weights_kg: vec![5.0; drones],
        }
    }

    fn plan(net: &SkywayNetwork, r: &DeliveryRequest, x: usize) -> Itinerary {
        let perf = DronePerformance::default();
        let s = build_swarm(r, &perf).unwrap();
        let cfg = PlannerConfig {
            max_splits: x,
            lookahead: 0,
            ..PlannerConfig::default()
        };
        compose_parallel(net, &s, r, &perf, &cfg).unwrap()
    }

    #[test]
    fn diamond_split_halves_rounds() {
        let net = fan(2);
        let r = request(3, 4);
        let perf = DronePerformance::default();
        let s = build_swarm(&r, &perf).unwrap();
        let seq = compose_sequential(&net, &s, &r, &perf, &PlannerConfig::default()).unwrap();
        let par = plan(&net, &r, 2);
        let leg = 600.0 / 65.0 * 60.0;
        // 60% to refill at 0.6 min per percent: 36 min per drone.
        assert!((seq.total_delivery_minutes - (2.0 * leg + 4.0 * 36.0)).abs() < 1e-9);
        assert!((par.total_delivery_minutes - (2.0 * leg + 2.0 * 36.0)).abs() < 1e-9);
        assert_eq!(par.subswarms.len(), 3);
        let mut stops = par.charge_stops();
        stops.sort();
        assert_eq!(stops, vec![n(1), n(2)]);
    }

    #[test]
    fn three_way_split_when_allowed() {
        let net = fan(3);
        let r = request(4, 6);
        let two = plan(&net, &r, 2);
        let three = plan(&net, &r, 3);
        let leg = 600.0 / 65.0 * 60.0;
        assert!((two.total_delivery_minutes - (2.0 * leg + 3.0 * 36.0)).abs() < 1e-9);
        assert!((three.total_delivery_minutes - (2.0 * leg + 2.0 * 36.0)).abs() < 1e-9);
        assert_eq!(three.subswarms.len(), 4);
    }

    #[test]
    fn trace_names_the_partition() {
        let net = fan(2);
        let r = request(3, 4);
        let perf = DronePerformance::default();
        let s = build_swarm(&r, &perf).unwrap();
        let cfg = PlannerConfig {
            lookahead: 0,
            ..PlannerConfig::default()
        };
        let mut trace = Trace::default();
        let traced = compose_parallel_traced(&net, &s, &r, &perf, &cfg, &mut trace).unwrap();
        assert_eq!(traced, compose_parallel(&net, &s, &r, &perf, &cfg).unwrap());
        let first = &trace.decisions[0];
        let Action::Move { parts } = &first.action else {
            panic!("expected a move, got {:?}", first.action)
        };
        assert_eq!(parts.len(), 2);
        assert!(parts.iter().all(|(ids, _)| ids.len() == 2));
        // one candidate per partition that fits on the two stations
        assert_eq!(first.candidates.len(), 4);
    }

    #[test]
    fn direct_flight_matches_sequential() {
        let net = fan(2);
        let perf = DronePerformance::default();
        let r = DeliveryRequest {
            source: n(0),
            destination: n(1),
            package_weights_kg: vec![2.0, 3.0, 4.0],
        };
        let s = build_swarm(&r, &perf).unwrap();
        let cfg = PlannerConfig::default();
        let a = compose_parallel(&net, &s, &r, &perf, &cfg).unwrap();
        let b = compose_sequential(&net, &s, &r, &perf, &cfg).unwrap();
        assert_eq!(a.total_delivery_minutes, b.total_delivery_minutes);
        assert_eq!(a.legs, b.legs);
    }

    #[test]
    fn window_delays_early_arrivals() {
        // Two stations, one much closer to the destination.
        let net = SkywayNetwork::new(
            vec![1, 1, 1, 1],
            vec![
                (n(0), n(1), 600.0),
                (n(0), n(2), 600.0),
                (n(1), n(3), 600.0),
                (n(2), n(3), 200.0),
            ],
        )
        .unwrap();
        let r = request(3, 4);
        let perf = DronePerformance::default();
        let s = build_swarm(&r, &perf).unwrap();
        for w in [0.0, 30.0, 1000.0] {
            let cfg = PlannerConfig {
                lookahead: 0,
                arrival_window_minutes: w,
                ..PlannerConfig::default()
            };
            let it = compose_parallel(&net, &s, &r, &perf, &cfg).unwrap();
            assert!(it.arrival_spread_minutes <= w + 1e-9, "w={w}");
            crate::itinerary::validate_itinerary(&net, &perf, &it).unwrap();
        }
    }
}
