//! Request generation and the experiment runner.
//!
//! Rows are grouped by hop count: the number of nodes on the shortest
//! path between source and destination, endpoints included.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{brute_force_oracle, dijkstra_baseline};
use crate::energy::DronePerformance;
use crate::itinerary::{validate_itinerary, Itinerary};
use crate::network::{
    generate_random_network, load_network, GeneratorParams, NetworkError, ShortestPathTree,
    SkywayNetwork,
};
use crate::planner::{compose_parallel, compose_sequential, PlanError, PlannerConfig};
use crate::swarm::build_swarm;
pub use crate::swarm::DeliveryRequest;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn default_min_packages() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestParams {
    pub count: usize,
    pub seed: u64,
    #[serde(default = "default_min_packages")]
    pub min_packages: usize,
    pub max_packages: usize,
    pub max_weight_kg: f64,
}

impl Default for RequestParams {
    fn default() -> Self {
        RequestParams {
            count: 200,
            seed: 7,
            min_packages: 2,
            max_packages: 10,
            max_weight_kg: 5.0,
        }
    }
}

/// `count` requests with distinct uniform endpoints, 2..=`max_packages`
/// packages each and weights uniform in (0, `max_weight_kg`].
pub fn generate_requests(
    net: &SkywayNetwork,
    count: usize,
    seed: u64,
    max_packages: usize,
    max_weight_kg: f64,
) -> Result<Vec<DeliveryRequest>, HarnessError> {
    generate_requests_with(
        net,
        &RequestParams {
            count,
            seed,
            min_packages: 2,
            max_packages,
            max_weight_kg,
        },
    )
}

pub fn generate_requests_with(
    net: &SkywayNetwork,
    p: &RequestParams,
) -> Result<Vec<DeliveryRequest>, HarnessError> {
    let bad = |m: &str| Err(HarnessError::InvalidParameter(m.to_string()));
    let n = net.node_count();
    if p.count == 0 {
        return bad("request count must be at least 1");
    }
    if n < 2 {
        return bad("need at least two nodes");
    }
    if p.min_packages < 2 || p.max_packages < p.min_packages {
        return bad("need 2 <= min_packages <= max_packages");
    }
    if !(p.max_weight_kg > 0.0) || !p.max_weight_kg.is_finite() {
        return bad("max_weight_kg must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    Ok((0..p.count)
        .map(|_| {
            let s = rng.gen_range(0..n);
            let mut d = rng.gen_range(0..n - 1);
            if d >= s {
                d += 1;
            }
            let k = rng.gen_range(p.min_packages..=p.max_packages);
            let package_weights_kg = (0..k)
                .map(|_| p.max_weight_kg - rng.gen_range(0.0..p.max_weight_kg))
                .collect();
            DeliveryRequest {
                source: crate::network::NodeId(s as u32),
                destination: crate::network::NodeId(d as u32),
                package_weights_kg,
            }
        })
        .collect())
}

/// A network document on disk or generator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkSource {
    File { file: PathBuf },
    Generated(GeneratorParams),
}

impl NetworkSource {
    pub fn load(&self) -> Result<SkywayNetwork, HarnessError> {
        Ok(match self {
            NetworkSource::File { file } => load_network(std::fs::File::open(file)?)?,
            NetworkSource::Generated(p) => generate_random_network(p)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DroneConfig {
    pub speed_kmh: f64,
    pub full_charge_min: f64,
    pub rate_percent_per_km_at_ref: f64,
    pub ref_payload_kg: f64,
    pub base_fraction: f64,
    pub max_payload_kg: f64,
    pub reserve_percent: f64,
}

impl Default for DroneConfig {
    fn default() -> Self {
        let p = DronePerformance::default();
        DroneConfig {
            speed_kmh: p.speed_kmh,
            full_charge_min: p.full_charge_minutes,
            rate_percent_per_km_at_ref: p.rate_at_ref_percent_per_km,
            ref_payload_kg: p.ref_payload_kg,
            base_fraction: p.base_fraction,
            max_payload_kg: p.max_payload_kg,
            reserve_percent: 0.0,
        }
    }
}

impl DroneConfig {
    pub fn performance(&self) -> DronePerformance {
        DronePerformance {
            speed_kmh: self.speed_kmh,
            full_charge_minutes: self.full_charge_min,
            rate_at_ref_percent_per_km: self.rate_percent_per_km_at_ref,
            ref_payload_kg: self.ref_payload_kg,
            base_fraction: self.base_fraction,
            max_payload_kg: self.max_payload_kg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerGrid {
    pub sequential: bool,
    pub parallel: bool,
    pub lookaheads: Vec<usize>,
    /// Used by the parallel composer only.
    pub max_splits: Vec<usize>,
    pub cooperative: Vec<bool>,
    pub window_min: f64,
}

impl Default for PlannerGrid {
    fn default() -> Self {
        PlannerGrid {
            sequential: true,
            parallel: true,
            lookaheads: vec![1],
            max_splits: vec![2],
            cooperative: vec![false],
            window_min: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSwitches {
    pub dijkstra: bool,
    pub brute_force: bool,
    pub path_budget: usize,
}

impl Default for BaselineSwitches {
    fn default() -> Self {
        BaselineSwitches {
            dijkstra: true,
            brute_force: false,
            path_budget: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkSource,
    #[serde(default)]
    pub drone: DroneConfig,
    pub requests: RequestParams,
    #[serde(default)]
    pub planners: PlannerGrid,
    #[serde(default)]
    pub baselines: BaselineSwitches,
    /// Record planner wall-clock in `plan_us`; off keeps output reproducible.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sequential,
    Parallel,
    Dijkstra,
    BruteForce,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Sequential => "sequential",
            Algorithm::Parallel => "parallel",
            Algorithm::Dijkstra => "dijkstra",
            Algorithm::BruteForce => "brute_force",
        }
    }
}

/// One column of the experiment grid.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variant {
    pub algorithm: Algorithm,
    pub lookahead: Option<usize>,
    pub max_splits: Option<usize>,
    pub cooperative: Option<bool>,
}

impl Variant {
    pub fn of(algorithm: Algorithm) -> Self {
        Variant {
            algorithm,
            lookahead: None,
            max_splits: None,
            cooperative: None,
        }
    }

    fn planner_config(&self, window: f64, reserve: f64) -> PlannerConfig {
        PlannerConfig {
            lookahead: self.lookahead.unwrap_or(0),
            max_splits: self.max_splits.unwrap_or(1),
            arrival_window_minutes: window,
            cooperative: self.cooperative.unwrap_or(false),
            reserve_percent: reserve,
            ..PlannerConfig::default()
        }
    }
}

/// Variants in output order.
pub fn variants(cfg: &ExperimentConfig) -> Vec<Variant> {
    let g = &cfg.planners;
    let mut out = Vec::new();
    if g.sequential {
        for &l in &g.lookaheads {
            for &c in &g.cooperative {
                out.push(Variant {
                    algorithm: Algorithm::Sequential,
                    lookahead: Some(l),
                    max_splits: None,
                    cooperative: Some(c),
                });
            }
        }
    }
    if g.parallel {
        for &l in &g.lookaheads {
            for &x in &g.max_splits {
                for &c in &g.cooperative {
                    out.push(Variant {
                        algorithm: Algorithm::Parallel,
                        lookahead: Some(l),
                        max_splits: Some(x),
                        cooperative: Some(c),
                    });
                }
            }
        }
    }
    if cfg.baselines.dijkstra {
        out.push(Variant::of(Algorithm::Dijkstra));
    }
    if cfg.baselines.brute_force {
        out.push(Variant::of(Algorithm::BruteForce));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub request_id: usize,
    pub algorithm: Algorithm,
    pub lookahead: Option<usize>,
    pub max_splits: Option<usize>,
    pub cooperative: Option<bool>,
    pub hops: usize,
    pub total_min: Option<f64>,
    pub travel_min: Option<f64>,
    pub charge_min: Option<f64>,
    pub wait_min: Option<f64>,
    pub spread_min: Option<f64>,
    pub plan_us: u64,
    /// `ok`, or the name of the error or violated invariant.
    pub status: String,
}

impl ResultRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn variant(&self) -> Variant {
        Variant {
            algorithm: self.algorithm,
            lookahead: self.lookahead,
            max_splits: self.max_splits,
            cooperative: self.cooperative,
        }
    }
}

/// Runs one variant on one request.
pub fn plan_one(
    net: &SkywayNetwork,
    request: &DeliveryRequest,
    perf: &DronePerformance,
    variant: &Variant,
    config: &PlannerConfig,
    path_budget: usize,
) -> Result<Itinerary, PlanError> {
    let swarm = build_swarm(request, perf)?;
    match variant.algorithm {
        Algorithm::Sequential => compose_sequential(net, &swarm, request, perf, config),
        Algorithm::Parallel => compose_parallel(net, &swarm, request, perf, config),
        Algorithm::Dijkstra => dijkstra_baseline(net, &swarm, request, perf, config),
        Algorithm::BruteForce => brute_force_oracle(net, &swarm, request, perf, config, path_budget),
    }
}

/// Every request under every variant, ordered by request then variant.
/// A failed plan or an itinerary breaking an invariant yields a row with
/// no times and a status naming the problem.
pub fn run_requests(
    net: &SkywayNetwork,
    requests: &[DeliveryRequest],
    cfg: &ExperimentConfig,
) -> Vec<ResultRow> {
    let perf = cfg.drone.performance();
    let vs = variants(cfg);
    let mut rows = Vec::with_capacity(requests.len() * vs.len());
    for (id, r) in requests.iter().enumerate() {
        let hops = match ShortestPathTree::new(net, r.source) {
            Ok(t) if net.contains(r.destination) => t.path_nodes(r.destination).len(),
            _ => 0,
        };
        for v in &vs {
            let pc = v.planner_config(cfg.planners.window_min, cfg.drone.reserve_percent);
            let start = Instant::now();
            let result = plan_one(net, r, &perf, v, &pc, cfg.baselines.path_budget);
            let us = start.elapsed().as_micros() as u64;
            let mut row = ResultRow {
                request_id: id,
                algorithm: v.algorithm,
                lookahead: v.lookahead,
                max_splits: v.max_splits,
                cooperative: v.cooperative,
                hops,
                total_min: None,
                travel_min: None,
                charge_min: None,
                wait_min: None,
                spread_min: None,
                plan_us: if cfg.timing { us } else { 0 },
                status: "ok".into(),
            };
            match result {
                Ok(it) => match validate_itinerary(net, &perf, &it) {
                    Ok(()) => {
                        row.total_min = Some(it.total_delivery_minutes);
                        row.travel_min = Some(it.travel_minutes);
                        row.charge_min = Some(it.charge_minutes);
                        row.wait_min = Some(it.wait_minutes);
                        row.spread_min = Some(it.arrival_spread_minutes);
                    }
                    Err(v) => row.status = format!("{}_violation", v.name()),
                },
                Err(e) => row.status = e.name().into(),
            }
            rows.push(row);
        }
    }
    rows
}

/// Loads or generates the network, draws the requests and runs the grid.
pub fn run_experiment(
    cfg: &ExperimentConfig,
) -> Result<(SkywayNetwork, Vec<DeliveryRequest>, Vec<ResultRow>), HarnessError> {
    let net = cfg.network.load()?;
    let requests = generate_requests_with(&net, &cfg.requests)?;
    let rows = run_requests(&net, &requests, cfg);
    Ok((net, requests, rows))
}

pub fn write_raw_csv(rows: &[ResultRow], sink: impl Write) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub lookahead: Option<usize>,
    pub max_splits: Option<usize>,
    pub cooperative: Option<bool>,
    pub hops: usize,
    pub count: usize,
    pub failed: usize,
    pub mean_total_min: Option<f64>,
    pub mean_travel_min: Option<f64>,
    pub mean_charge_min: Option<f64>,
    pub mean_wait_min: Option<f64>,
    pub mean_spread_min: Option<f64>,
    pub mean_plan_us: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

impl SummaryRow {
    pub fn variant_key(&self) -> Variant {
        Variant {
            algorithm: self.algorithm,
            lookahead: self.lookahead,
            max_splits: self.max_splits,
            cooperative: self.cooperative,
        }
    }
}

/// One row per (variant, hop bucket); failed rows are counted but left
/// out of the means.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Variant, usize), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.variant(), r.hops)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((v, hops), rs)| {
            let ok: Vec<&&ResultRow> = rs.iter().filter(|r| r.ok()).collect();
            let m = |f: fn(&ResultRow) -> Option<f64>| mean(ok.iter().filter_map(|r| f(r)));
            SummaryRow {
                algorithm: v.algorithm,
                lookahead: v.lookahead,
                max_splits: v.max_splits,
                cooperative: v.cooperative,
                hops,
                count: rs.len(),
                failed: rs.len() - ok.len(),
                mean_total_min: m(|r| r.total_min),
                mean_travel_min: m(|r| r.travel_min),
                mean_charge_min: m(|r| r.charge_min),
                mean_wait_min: m(|r| r.wait_min),
                mean_spread_min: m(|r| r.spread_min),
                mean_plan_us: mean(ok.iter().map(|r| r.plan_us as f64)),
            }
        })
        .collect()
}

pub fn write_summary_csv(rows: &[SummaryRow], sink: impl Write) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
