mod common;

use proptest::prelude::*;
use sdaas::planner::Action;
use sdaas::{
    build_swarm, compose_parallel, compose_parallel_traced, compose_sequential,
    compose_sequential_traced, dijkstra_baseline, shortest_path, validate_itinerary,
    DronePerformance, LegKind, NodeId, PlanError, PlannerConfig, SkywayNetwork, Trace,
};

use common::{recheck, request};

fn line(km: f64, pads_mid: u32) -> SkywayNetwork {
    SkywayNetwork::new(
        vec![1, pads_mid, 1],
        vec![(NodeId(0), NodeId(1), km), (NodeId(1), NodeId(2), km)],
    )
    .unwrap()
}

#[test]
fn five_full_drones_share_two_pads() {
    let net = line(650.0, 2);
    let req = request(0, 2, &[5.0; 5]);
    let perf = DronePerformance::default();
    let swarm = build_swarm(&req, &perf).unwrap();
    let it = compose_sequential(&net, &swarm, &req, &perf, &PlannerConfig::default()).unwrap();
    // 650 km at 65 km/h is 600 min; each drone lands with 35% and charges
    // 65% in 39 min; five drones on two pads take three rounds.
    let leg = 650.0 / 65.0 * 60.0;
    assert_eq!(leg, 600.0);
    let charge = 65.0 / 100.0 * 60.0;
    assert!((it.travel_minutes - 2.0 * leg).abs() < 1e-9);
    assert!((it.charge_minutes - charge).abs() < 1e-9);
    assert!((it.wait_minutes - 2.0 * charge).abs() < 1e-9);
    assert!((it.total_delivery_minutes - 1317.0).abs() < 1e-9);
    assert_eq!(it.charge_stops(), vec![NodeId(1)]);
    recheck(&net, &perf, &req, &it, 60.0, 0.0).unwrap();
}

#[test]
fn reachable_destination_is_one_flight() {
    let net = common::net(12, 0.3, 4, (50.0, 400.0), 3);
    let perf = DronePerformance::default();
    let req = request(0, 7, &[5.0, 4.0, 1.0]);
    let (_, km) = shortest_path(&net, NodeId(0), NodeId(7)).unwrap();
    assert!(km * 0.1 <= 100.0);
    let swarm = build_swarm(&req, &perf).unwrap();
    let cfg = PlannerConfig::default();
    let seq = compose_sequential(&net, &swarm, &req, &perf, &cfg).unwrap();
    let par = compose_parallel(&net, &swarm, &req, &perf, &cfg).unwrap();
    for it in [&seq, &par] {
        assert!((it.total_delivery_minutes - km / 65.0 * 60.0).abs() < 1e-9);
        assert!(it.legs.iter().all(|l| l.kind == LegKind::Travel));
    }
    assert_eq!(seq.total_delivery_minutes, par.total_delivery_minutes);
    assert_eq!(seq.legs, par.legs);

    let mut trace = Trace::default();
    compose_sequential_traced(&net, &swarm, &req, &perf, &cfg, &mut trace).unwrap();
    assert_eq!(trace.decisions.len(), 1);
    assert_eq!(trace.decisions[0].action, Action::Direct);
}

#[test]
fn single_segment_takes_distance_over_speed() {
    let net = SkywayNetwork::new(vec![2, 3], vec![(NodeId(0), NodeId(1), 130.0)]).unwrap();
    let perf = DronePerformance::default();
    for w in [[0.0, 0.0], [5.0, 5.0], [2.5, 4.0]] {
        let req = request(1, 0, &w);
        let swarm = build_swarm(&req, &perf).unwrap();
        let it = compose_sequential(&net, &swarm, &req, &perf, &PlannerConfig::default()).unwrap();
        assert_eq!(it.total_delivery_minutes, 120.0);
    }
}

#[test]
fn unreachable_segment_is_reported() {
    let net = line(1200.0, 2);
    let perf = DronePerformance::default();
    let req = request(0, 2, &[5.0, 5.0]);
    let swarm = build_swarm(&req, &perf).unwrap();
    let err = compose_sequential(&net, &swarm, &req, &perf, &PlannerConfig::default()).unwrap_err();
    assert!(matches!(err, PlanError::NoFeasibleCandidate { .. }), "{err}");
    assert!(matches!(
        dijkstra_baseline(&net, &swarm, &req, &perf, &PlannerConfig::default()),
        Err(PlanError::NoFeasiblePath)
    ));
}

fn scenario() -> impl Strategy<Value = (SkywayNetwork, sdaas::DeliveryRequest)> {
    (
        4usize..22,
        0.05f64..0.4,
        1u32..=4,
        prop_oneof![Just((50.0, 400.0)), Just((200.0, 700.0))],
        any::<u64>(),
        prop::collection::vec(0.0f64..=5.0, 2..=8),
        any::<(u32, u32)>(),
    )
        .prop_map(|(n, dens, pads, km, seed, weights, (a, b))| {
            let net = common::net(n, dens, pads, km, seed);
            let s = a % n as u32;
            let d = (s + 1 + b % (n as u32 - 1)) % n as u32;
            (net, request(s, d, &weights))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_plan_satisfies_the_invariants(
        (net, req) in scenario(), l in 0usize..=2, x in 1usize..=4, coop: bool,
        window in prop_oneof![Just(0.0), Just(30.0), Just(60.0), Just(600.0)],
        reserve in prop_oneof![Just(0.0), Just(5.0)],
    ) {
        let perf = DronePerformance::default();
        let swarm = build_swarm(&req, &perf).unwrap();
        let cfg = PlannerConfig {
            lookahead: l,
            max_splits: x,
            cooperative: coop,
            arrival_window_minutes: window,
            reserve_percent: reserve,
            ..PlannerConfig::default()
        };
        let plans = [
            compose_sequential(&net, &swarm, &req, &perf, &cfg),
            compose_parallel(&net, &swarm, &req, &perf, &cfg),
            dijkstra_baseline(&net, &swarm, &req, &perf, &cfg),
        ];
        for plan in plans {
            match plan {
                Ok(it) => {
                    prop_assert_eq!(validate_itinerary(&net, &perf, &it), Ok(()));
                    let r = recheck(&net, &perf, &req, &it, window, reserve);
                    prop_assert!(r.is_ok(), "{}: {:?}", it.algorithm, r);
                }
                // Long segments can exceed the range of a laden drone.
                Err(PlanError::NoFeasibleCandidate { .. } | PlanError::NoFeasiblePath) => {}
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }

    #[test]
    fn planning_is_deterministic_and_observation_free(
        (net, req) in scenario(), l in 0usize..=2, x in 1usize..=3, coop: bool,
    ) {
        let perf = DronePerformance::default();
        let swarm = build_swarm(&req, &perf).unwrap();
        let cfg = PlannerConfig { lookahead: l, max_splits: x, cooperative: coop, ..PlannerConfig::default() };
        let a = compose_sequential(&net, &swarm, &req, &perf, &cfg);
        let mut t = Trace::default();
        let b = compose_sequential_traced(&net, &swarm, &req, &perf, &cfg, &mut t);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a, compose_sequential(&net, &swarm, &req, &perf, &cfg));
        let a = compose_parallel(&net, &swarm, &req, &perf, &cfg);
        let mut t = Trace::default();
        let b = compose_parallel_traced(&net, &swarm, &req, &perf, &cfg, &mut t);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a, compose_parallel(&net, &swarm, &req, &perf, &cfg));
    }

    #[test]
    fn direct_flights_agree((net, req) in scenario(), l in 0usize..=2, x in 1usize..=4) {
        let perf = DronePerformance::default();
        let (_, km) = shortest_path(&net, req.source, req.destination).unwrap();
        let heaviest = req.package_weights_kg.iter().copied().fold(0.0, f64::max);
        prop_assume!(sdaas::can_reach(&perf, 100.0, heaviest, km, 0.0));
        let swarm = build_swarm(&req, &perf).unwrap();
        let cfg = PlannerConfig { lookahead: l, max_splits: x, ..PlannerConfig::default() };
        let seq = compose_sequential(&net, &swarm, &req, &perf, &cfg).unwrap();
        let par = compose_parallel(&net, &swarm, &req, &perf, &cfg).unwrap();
        prop_assert_eq!(seq.total_delivery_minutes, par.total_delivery_minutes);
        prop_assert!((seq.total_delivery_minutes - km / 65.0 * 60.0).abs() < 1e-9);
    }
}
