//! Swarm delivery composition.
//!
//! Two greedy composers share one step: from the current station, fly
//! straight to the destination when every drone can make it, otherwise
//! pick the next station(s) among the lookahead candidates by travel time
//! plus node time.
//!
//! * [`compose_sequential`] keeps the swarm together.
//! * [`compose_parallel`] lets the swarm disband into sub-swarms of at
//!   least two drones that charge at different stations and meet at the
//!   destination within the arrival window.

use std::cell::RefCell;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{can_reach, DronePerformance, EnergyError};
use crate::network::{lookahead_from_tree, NetworkError, NodeId, ShortestPathTree, SkywayNetwork};
use crate::swarm::{DeliveryRequest, Drone, DroneId, SubSwarm, SwarmError, DEFAULT_PARTITION_CAP};

mod parallel;
mod sequential;

pub use parallel::{compose_parallel, compose_parallel_traced};
pub use sequential::{compose_sequential, compose_sequential_traced};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Swarm(#[from] SwarmError),
    #[error("no feasible candidate station from {node}")]
    NoFeasibleCandidate { node: NodeId },
    #[error("gave up after {limit} charging stops")]
    StopLimitExceeded { limit: usize },
    #[error("no feasible path: some segment exceeds the range of a laden drone")]
    NoFeasiblePath,
    #[error("path budget of {budget} simple paths exceeded")]
    PathBudgetExceeded { budget: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid planner config: {0}")]
    InvalidConfig(String),
}

impl PlanError {
    /// Short stable name, used as a row status in experiment output.
    pub fn name(&self) -> &'static str {
        match self {
            PlanError::Network(NetworkError::UnknownNode(_)) => "UnknownNode",
            PlanError::Network(_) => "NetworkError",
            PlanError::Energy(EnergyError::PayloadExceedsCapacity { .. }) => "PayloadExceedsCapacity",
            PlanError::Energy(_) => "EnergyError",
            PlanError::Swarm(SwarmError::PayloadExceedsCapacity { .. }) => "PayloadExceedsCapacity",
            PlanError::Swarm(SwarmError::TooFewPackages(_)) => "TooFewPackages",
            PlanError::Swarm(SwarmError::IllegalSplit(_)) => "IllegalSplit",
            PlanError::Swarm(SwarmError::PartitionCapExceeded { .. }) => "PartitionCapExceeded",
            PlanError::Swarm(_) => "SwarmError",
            PlanError::NoFeasibleCandidate { .. } => "NoFeasibleCandidate",
            PlanError::StopLimitExceeded { .. } => "StopLimitExceeded",
            PlanError::NoFeasiblePath => "NoFeasiblePath",
            PlanError::PathBudgetExceeded { .. } => "PathBudgetExceeded",
            PlanError::InvalidRequest(_) => "InvalidRequest",
            PlanError::InvalidConfig(_) => "InvalidConfig",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Extra hop levels searched for the next station; 0 = direct neighbors.
    pub lookahead: usize,
    /// Maximum number of sub-swarms a swarm may disband into at once.
    pub max_splits: usize,
    /// Allowed gap between the first and last arrival at the destination.
    pub arrival_window_minutes: f64,
    /// Charge only for the next leg when drones outnumber pads.
    pub cooperative: bool,
    pub reserve_percent: f64,
    pub partition_cap: usize,
    /// Charging stops allowed per sub-swarm lineage; `None` = 2 × nodes + 10.
    pub max_stops: Option<usize>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            lookahead: 1,
            max_splits: 2,
            arrival_window_minutes: 60.0,
            cooperative: false,
            reserve_percent: 0.0,
            partition_cap: DEFAULT_PARTITION_CAP,
            max_stops: None,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.max_splits < 1 {
            return Err(PlanError::InvalidConfig("max_splits must be at least 1".into()));
        }
        if !(self.arrival_window_minutes >= 0.0) {
            return Err(PlanError::InvalidConfig("arrival window must be nonnegative".into()));
        }
        if !(0.0..100.0).contains(&self.reserve_percent) {
            return Err(PlanError::InvalidConfig("reserve must lie in [0, 100)".into()));
        }
        if self.partition_cap == 0 {
            return Err(PlanError::InvalidConfig("partition cap must be positive".into()));
        }
        Ok(())
    }
}

/// Score of one candidate move: stations per part and the resulting
/// time added (slowest part, then the sum over parts).
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub parts: Vec<Vec<DroneId>>,
    pub nodes: Vec<NodeId>,
    pub makespan_minutes: f64,
    pub sum_minutes: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// The whole (sub-)swarm flies to the destination.
    Direct,
    /// The drones able to reach the destination leave; the rest stay.
    SplitToDestination {
        departing: Vec<DroneId>,
        staying: Vec<DroneId>,
    },
    /// Each part flies to its station and charges.
    Move { parts: Vec<(Vec<DroneId>, NodeId)> },
}

/// One planning decision, as seen by a [`PlanObserver`].
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub step: usize,
    pub subswarm: usize,
    pub node: NodeId,
    pub clock_minutes: f64,
    /// Sub-swarms still en route when the decision was taken.
    pub active: Vec<usize>,
    pub candidates: Vec<CandidateScore>,
    pub action: Action,
}

/// Receives every decision a composer takes. Observation has no effect on
/// the plan.
pub trait PlanObserver {
    fn enabled(&self) -> bool {
        true
    }
    fn on_decision(&mut self, decision: &Decision);
}

impl PlanObserver for () {
    fn enabled(&self) -> bool {
        false
    }
    fn on_decision(&mut self, _: &Decision) {}
}

/// Records every decision.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub decisions: Vec<Decision>,
}

impl PlanObserver for Trace {
    fn on_decision(&mut self, decision: &Decision) {
        self.decisions.push(decision.clone());
    }
}

/// Lazily computed shortest-path trees, one per source station.
pub(crate) struct Router<'a> {
    pub net: &'a SkywayNetwork,
    trees: RefCell<Vec<Option<Rc<ShortestPathTree>>>>,
}

impl<'a> Router<'a> {
    pub fn new(net: &'a SkywayNetwork) -> Self {
        Router {
            net,
            trees: RefCell::new(vec![None; net.node_count()]),
        }
    }

    pub fn tree(&self, from: NodeId) -> Rc<ShortestPathTree> {
        let mut trees = self.trees.borrow_mut();
        trees[from.index()]
            .get_or_insert_with(|| {
                Rc::new(ShortestPathTree::new(self.net, from).expect("router nodes are known"))
            })
            .clone()
    }

    /// Lookahead candidates from `from`, excluding `exclude`.
    pub fn candidates(&self, from: NodeId, lookahead: usize, exclude: NodeId) -> Vec<(NodeId, f64)> {
        let tree = self.tree(from);
        let mut c = lookahead_from_tree(self.net, &tree, lookahead);
        c.retain(|&(v, _)| v != exclude);
        c
    }
}

/// State shared by one planning run.
pub(crate) struct Ctx<'a> {
    pub net: &'a SkywayNetwork,
    pub perf: &'a DronePerformance,
    pub cfg: &'a PlannerConfig,
    pub dest: NodeId,
    pub router: Router<'a>,
    pub max_stops: usize,
}

impl<'a> Ctx<'a> {
    pub fn new(
        net: &'a SkywayNetwork,
        swarm: &SubSwarm,
        request: &DeliveryRequest,
        perf: &'a DronePerformance,
        cfg: &'a PlannerConfig,
    ) -> Result<Self, PlanError> {
        cfg.validate()?;
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
        if swarm.len() < 2 {
            return Err(SwarmError::TooFewPackages(swarm.len()).into());
        }
        for d in &swarm.drones {
            crate::energy::consumption_rate(perf, d.payload_kg)?;
        }
        Ok(Ctx {
            net,
            perf,
            cfg,
            dest: request.destination,
            router: Router::new(net),
            max_stops: cfg.max_stops.unwrap_or(2 * net.node_count() + 10),
        })
    }

    pub fn reaches(&self, d: &Drone, km: f64) -> bool {
        can_reach(self.perf, d.battery_percent, d.payload_kg, km, self.cfg.reserve_percent)
    }

    pub fn dist_to_dest(&self, from: NodeId) -> f64 {
        self.router.tree(from).distance(self.dest)
    }

    /// Batteries on arrival after flying `km`.
    pub fn arrive(&self, drones: &[Drone], km: f64) -> Vec<Drone> {
        drones
            .iter()
            .map(|d| Drone {
                battery_percent: d.battery_percent
                    - crate::energy::consumption_rate(self.perf, d.payload_kg).unwrap_or(f64::INFINITY) * km,
                ..d.clone()
            })
            .collect()
    }
}
