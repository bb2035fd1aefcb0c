#![allow(dead_code)]

use sdaas::{
    consumption_rate, generate_random_network, DeliveryRequest, DronePerformance, GeneratorParams,
    Itinerary, LegKind, NodeId, SkywayNetwork,
};

pub fn net(nodes: usize, density: f64, pads_max: u32, km: (f64, f64), seed: u64) -> SkywayNetwork {
    generate_random_network(&GeneratorParams {
        nodes,
        edge_density: density,
        pads_min: 1,
        pads_max,
        km_min: km.0,
        km_max: km.1,
        seed,
    })
    .unwrap()
}

pub fn request(source: u32, destination: u32, weights: &[f64]) -> DeliveryRequest {
    DeliveryRequest {
        source: NodeId(source),
        destination: NodeId(destination),
        package_weights_kg: weights.to_vec(),
    }
}

/// Replays every drone along the chain of sub-swarms that carried it and
/// checks the plan-level invariants from scratch.
pub fn recheck(
    net: &SkywayNetwork,
    perf: &DronePerformance,
    request: &DeliveryRequest,
    it: &Itinerary,
    window: f64,
    reserve: f64,
) -> Result<(), String> {
    let n = request.package_weights_kg.len();
    if it.drones.len() != n {
        return Err(format!("{} drones for {n} packages", it.drones.len()));
    }
    for s in &it.subswarms {
        if s.drones.len() < 2 {
            return Err(format!("sub-swarm {} has {} drones", s.id, s.drones.len()));
        }
    }
    let leaves = it.leaves();
    let mut delivered: Vec<u32> = leaves
        .iter()
        .flat_map(|&l| it.subswarms[l].drones.iter().map(|d| d.0))
        .collect();
    delivered.sort();
    if delivered != (0..n as u32).collect::<Vec<_>>() {
        return Err(format!("delivered drones {delivered:?}"));
    }

    for (k, rec) in it.drones.iter().enumerate() {
        if rec.payload_kg != request.package_weights_kg[k] {
            return Err(format!("drone {k} carries the wrong package"));
        }
        let leaf = *leaves
            .iter()
            .find(|&&l| it.subswarms[l].drones.contains(&rec.id))
            .unwrap();
        let mut chain = vec![leaf];
        while let Some(p) = it.subswarms[*chain.last().unwrap()].parent {
            chain.push(p);
        }
        chain.reverse();
        let rate = consumption_rate(perf, rec.payload_kg).unwrap();
        let mut battery = 100.0;
        let mut at = request.source;
        let mut clock = 0.0;
        for &s in &chain {
            for leg in it.legs.iter().filter(|l| l.subswarm == s) {
                if leg.from != at || (leg.start_minutes - clock).abs() > 1e-6 {
                    return Err(format!("drone {k} jumps at sub-swarm {s}"));
                }
                match leg.kind {
                    LegKind::Travel => {
                        let km = net.edge_km(leg.from, leg.to).ok_or("not an edge")?;
                        battery -= rate * km;
                        if battery < reserve - 1e-6 {
                            return Err(format!("drone {k} at {battery}% after {}->{}", leg.from, leg.to));
                        }
                        at = leg.to;
                    }
                    LegKind::Charge => {
                        let c = leg.charges.iter().find(|c| c.drone == rec.id).ok_or("uncharged")?;
                        if (c.from_percent - battery).abs() > 1e-6 || c.to_percent > 100.0 + 1e-9 {
                            return Err(format!("drone {k} charge {c:?} at {battery}%"));
                        }
                        battery = c.to_percent;
                    }
                    LegKind::Wait => {}
                }
                clock = leg.start_minutes + leg.duration_minutes;
            }
        }
        if at != request.destination {
            return Err(format!("drone {k} ends at {at}"));
        }
    }

    let arrivals: Vec<f64> = leaves
        .iter()
        .map(|&l| {
            it.legs
                .iter()
                .filter(|g| g.subswarm == l && g.kind == LegKind::Travel)
                .map(|g| g.start_minutes + g.duration_minutes)
                .last()
                .unwrap_or(0.0)
        })
        .collect();
    let last = arrivals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first = arrivals.iter().copied().fold(f64::INFINITY, f64::min);
    if last - first > window + 1e-6 {
        return Err(format!("spread {} over window {window}", last - first));
    }
    if (it.total_delivery_minutes - last).abs() > 1e-6 {
        return Err(format!("total {} vs last arrival {last}", it.total_delivery_minutes));
    }
    let parts = it.travel_minutes + it.charge_minutes + it.wait_minutes;
    if (parts - it.total_delivery_minutes).abs() > 1e-6 * (1.0 + parts) {
        return Err(format!("components {parts} vs total {}", it.total_delivery_minutes));
    }
    Ok(())
}
