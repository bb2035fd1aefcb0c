use std::cmp::Ordering;

use crate::energy::{cooperative_targets, full_charge_demands, node_time, DronePerformance};
use crate::itinerary::{recharged, Itinerary, ItineraryBuilder};
use crate::network::{NodeId, SkywayNetwork};
use crate::swarm::{DeliveryRequest, Drone, SubSwarm};

use super::{Action, CandidateScore, Ctx, Decision, PlanError, PlanObserver, PlannerConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Hop {
    Destination,
    Stop(NodeId),
}

pub(crate) struct HopChoice {
    pub hop: Hop,
    pub leg_km: f64,
    pub candidates: Vec<CandidateScore>,
}

/// Next move of a whole swarm at `node` holding `drones`.
///
/// Candidates are lookahead stations every drone can reach. The winner
/// minimises travel time plus node time, ties going to the station nearer
/// the destination, then the smaller id. Stations already visited are
/// skipped unless nothing else is feasible, in which case the nearest to
/// the destination wins.
pub(crate) fn choose_hop(
    ctx: &Ctx<'_>,
    node: NodeId,
    drones: &[Drone],
    visited: &[bool],
    cooperative_scoring: bool,
    record: bool,
) -> Result<HopChoice, PlanError> {
    let tree = ctx.router.tree(node);
    let direct_km = tree.distance(ctx.dest);
    if drones.iter().all(|d| ctx.reaches(d, direct_km)) {
        return Ok(HopChoice {
            hop: Hop::Destination,
            leg_km: direct_km,
            candidates: Vec::new(),
        });
    }
    let feasible: Vec<(NodeId, f64)> = ctx
        .router
        .candidates(node, ctx.cfg.lookahead, ctx.dest)
        .into_iter()
        .filter(|&(_, km)| drones.iter().all(|d| ctx.reaches(d, km)))
        .collect();
    let fresh: Vec<(NodeId, f64)> = feasible
        .iter()
        .copied()
        .filter(|(c, _)| !visited[c.index()])
        .collect();
    // Once every feasible station has been visited, head for the one
    // nearest the destination so revisits cannot cycle.
    let fallback = fresh.is_empty();
    let pool = if fallback { feasible } else { fresh };

    let ids: Vec<_> = drones.iter().map(|d| d.id).collect();
    let mut best: Option<(f64, f64, NodeId, f64)> = None;
    let mut candidates = Vec::new();
    for &(c, km) in &pool {
        let arrival = ctx.arrive(drones, km);
        let pads = ctx.net.pads(c);
        let demands = match cooperative_scoring && drones.len() > pads as usize {
            true => {
                let mut seen = visited.to_vec();
                for v in tree.path_nodes(c) {
                    seen[v.index()] = true;
                }
                let next = choose_hop(ctx, c, &recharged(drones), &seen, false, false).ok();
                match next {
                    Some(h) => cooperative_targets(ctx.perf, &arrival, pads, h.leg_km, ctx.cfg.reserve_percent)?,
                    None => full_charge_demands(&arrival),
                }
            }
            false => full_charge_demands(&arrival),
        };
        let score = ctx.perf.travel_minutes(km) + node_time(ctx.perf, &demands, pads).total_minutes;
        let to_dest = ctx.dist_to_dest(c);
        if record {
            candidates.push(CandidateScore {
                parts: vec![ids.clone()],
                nodes: vec![c],
                makespan_minutes: score,
                sum_minutes: score,
            });
        }
        let better = match best {
            None => true,
            Some((s, t, n, _)) => {
                let by_score = if fallback { Ordering::Equal } else { score.total_cmp(&s) };
                by_score.then(to_dest.total_cmp(&t)).then(c.cmp(&n)) == Ordering::Less
            }
        };
        if better {
            best = Some((score, to_dest, c, km));
        }
    }
    match best {
        Some((_, _, c, km)) => Ok(HopChoice {
            hop: Hop::Stop(c),
            leg_km: km,
            candidates,
        }),
        None => Err(PlanError::NoFeasibleCandidate { node }),
    }
}

/// Keeps the swarm together from source to destination.
pub fn compose_sequential(
    net: &SkywayNetwork,
    swarm: &SubSwarm,
    request: &DeliveryRequest,
    perf: &DronePerformance,
    config: &PlannerConfig,
) -> Result<Itinerary, PlanError> {
    compose_sequential_traced(net, swarm, request, perf, config, &mut ())
}

pub fn compose_sequential_traced(
    net: &SkywayNetwork,
    swarm: &SubSwarm,
    request: &DeliveryRequest,
    perf: &DronePerformance,
    config: &PlannerConfig,
    observer: &mut dyn PlanObserver,
) -> Result<Itinerary, PlanError> {
    let ctx = Ctx::new(net, swarm, request, perf, config)?;
    let record = observer.enabled();
    let mut s = swarm.clone();
    let mut builder = ItineraryBuilder::new(net, perf, "sequential", &s, ctx.dest);
    let mut visited = vec![false; net.node_count()];
    visited[s.current_node.index()] = true;
    let mut planned: Option<HopChoice> = None;
    let mut stops = 0;
    let mut step = 0;
    loop {
        let choice = match planned.take() {
            Some(c) => c,
            None => choose_hop(&ctx, s.current_node, &s.drones, &visited, config.cooperative, record)?,
        };
        if record {
            let action = match choice.hop {
                Hop::Destination => Action::Direct,
                Hop::Stop(c) => Action::Move {
                    parts: vec![(s.ids(), c)],
                },
            };
            observer.on_decision(&Decision {
                step,
                subswarm: 0,
                node: s.current_node,
                clock_minutes: s.clock_minutes,
                active: vec![0],
                candidates: choice.candidates.clone(),
                action,
            });
        }
        step += 1;
        let tree = ctx.router.tree(s.current_node);
        match choice.hop {
            Hop::Destination => {
                let path = tree.path_nodes(ctx.dest).to_vec();
                builder.fly_final(0, &mut s, &path)?;
                break;
            }
            Hop::Stop(c) => {
                stops += 1;
                if stops > ctx.max_stops {
                    return Err(PlanError::StopLimitExceeded { limit: ctx.max_stops });
                }
                let path = tree.path_nodes(c).to_vec();
                builder.fly(0, &mut s, &path)?;
                for v in &path {
                    visited[v.index()] = true;
                }
                let demands = if config.cooperative {
                    // Decide the next leg now, as if fully charged, and
                    // charge just enough for it.
                    let next = choose_hop(&ctx, c, &recharged(&s.drones), &visited, true, record)?;
                    let d = cooperative_targets(
                        perf,
                        &s.drones,
                        net.pads(c),
                        next.leg_km,
                        config.reserve_percent,
                    )?;
                    planned = Some(next);
                    d
                } else {
                    full_charge_demands(&s.drones)
                };
                builder.charge(0, &mut s, demands);
            }
        }
    }
    builder.apply_window(config.arrival_window_minutes);
    Ok(builder.finish(config.arrival_window_minutes, config.reserve_percent))
}
