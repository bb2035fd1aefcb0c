//! Swarm-based drone delivery on skyway networks.
//!
//! A swarm of drones, one package each, flies from a source station to a
//! destination over a graph of flight segments. Stations have a limited
//! number of charging pads. The composers here decide where the swarm (or
//! its sub-swarms) stops to charge and how long it waits for pads.
//!
//! ```
//! use sdaas::{build_swarm, compose_sequential, DeliveryRequest, DronePerformance, NodeId,
//!             PlannerConfig, SkywayNetwork};
//!
//! let net = SkywayNetwork::new(
//!     vec![1, 2, 1],
//!     vec![(NodeId(0), NodeId(1), 650.0), (NodeId(1), NodeId(2), 650.0)],
//! )
//! .unwrap();
//! let request = DeliveryRequest {
//!     source: NodeId(0),
//!     destination: NodeId(2),
//!     package_weights_kg: vec![5.0, 5.0],
//! };
//! let perf = DronePerformance::default();
//! let swarm = build_swarm(&request, &perf).unwrap();
//! let plan = compose_sequential(&net, &swarm, &request, &perf, &PlannerConfig::default()).unwrap();
//! assert_eq!(plan.charge_stops(), vec![NodeId(1)]);
//! ```

pub mod baselines;
pub mod energy;
pub mod harness;
pub mod itinerary;
pub mod network;
pub mod planner;
pub mod swarm;

pub use baselines::{brute_force_oracle, dijkstra_baseline, CostEdgeWeights};
pub use energy::{
    can_reach, charge_duration, consumption_rate, cooperative_targets, node_time,
    node_time_from_durations, ChargeDemand, DronePerformance, EnergyError, NodeTimeBreakdown,
};
pub use harness::{
    generate_requests, run_experiment, summarize, ExperimentConfig, HarnessError, ResultRow,
};
pub use itinerary::{validate_itinerary, Itinerary, Leg, LegKind, Violation};
pub use network::{
    enumerate_simple_paths, generate_random_network, neighbors_within_lookahead, shortest_path,
    GeneratorParams, NetworkError, NodeId, Path, SkywayNetwork, ValidationError,
};
pub use planner::{
    compose_parallel, compose_parallel_traced, compose_sequential, compose_sequential_traced,
    PlanError, PlanObserver, PlannerConfig, Trace,
};
pub use swarm::{build_swarm, enumerate_partitions, DeliveryRequest, Drone, DroneId, SubSwarm, SwarmError};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/energy.md")]
    mod energy {}
    #[doc = include_str!("../../../book/src/swarms.md")]
    mod swarms {}
    #[doc = include_str!("../../../book/src/sequential.md")]
    mod sequential {}
    #[doc = include_str!("../../../book/src/parallel.md")]
    mod parallel {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
