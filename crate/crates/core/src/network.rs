//! Skyway network: an undirected graph whose nodes are recharging stations
//! and whose edges are flight-permitted sky segments.
//!
//! The network is immutable after construction. All queries are read-only,
//! so a single value can be shared by any number of concurrent planners.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense node index in `[0, node_count)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

/// An undirected sky segment. Stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    pub km: f64,
}

/// Invariant that a network document or construction violated.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("network has no nodes")]
    Empty,
    #[error("node ids are not dense: expected id {expected}, found {found}")]
    NonDenseIds { expected: u32, found: u32 },
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge between {0} and {1}")]
    DuplicateEdge(NodeId, NodeId),
    #[error("edge {a}-{b} has nonpositive distance {km} km")]
    NonPositiveDistance { a: NodeId, b: NodeId, km: f64 },
    #[error("node {0} has pad_count < 1")]
    PadCountZero(NodeId),
    #[error("edge references unknown node {0}")]
    UnknownEndpoint(NodeId),
    #[error("network is disconnected: node {0} unreachable from n0")]
    Disconnected(NodeId),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid network: {0}")]
    Validation(#[from] ValidationError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("path budget of {budget} exceeded")]
    PathBudgetExceeded { budget: usize, found: Vec<Path> },
    #[error("i/o error: {0}")]
    Io(String),
}

/// A simple path: consecutive nodes adjacent, no node repeated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path(pub Vec<NodeId>);

impl Path {
    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    /// Number of nodes on the path, endpoints included.
    pub fn node_count(&self) -> usize {
        self.0.len()
    }

    pub fn first(&self) -> NodeId {
        self.0[0]
    }

    pub fn last(&self) -> NodeId {
        *self.0.last().expect("paths are nonempty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkywayNetwork {
    pads: Vec<u32>,
    edges: Vec<Edge>,
    adj: Vec<Vec<(NodeId, f64)>>,
}

impl SkywayNetwork {
    /// Builds a network from per-node pad counts (index = node id) and an
    /// undirected edge list, checking every structural invariant.
    pub fn new(
        pads: Vec<u32>,
        edges: impl IntoIterator<Item = (NodeId, NodeId, f64)>,
    ) -> Result<Self, ValidationError> {
        if pads.is_empty() {
            return Err(ValidationError::Empty);
        }
        if let Some(i) = pads.iter().position(|&p| p == 0) {
            return Err(ValidationError::PadCountZero(NodeId(i as u32)));
        }
        let n = pads.len();
        let mut norm = Vec::new();
        for (a, b, km) in edges {
            for v in [a, b] {
                if v.index() >= n {
                    return Err(ValidationError::UnknownEndpoint(v));
                }
            }
            if a == b {
                return Err(ValidationError::SelfLoop(a));
            }
            if !(km > 0.0) || !km.is_finite() {
                return Err(ValidationError::NonPositiveDistance { a, b, km });
            }
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            norm.push(Edge { a, b, km });
        }
        norm.sort_by_key(|e| (e.a, e.b));
        for w in norm.windows(2) {
            if w[0].a == w[1].a && w[0].b == w[1].b {
                return Err(ValidationError::DuplicateEdge(w[0].a, w[0].b));
            }
        }
        let mut adj = vec![Vec::new(); n];
        for e in &norm {
            adj[e.a.index()].push((e.b, e.km));
            adj[e.b.index()].push((e.a, e.km));
        }
        for list in &mut adj {
            list.sort_by_key(|&(v, _)| v);
        }
        let net = SkywayNetwork {
            pads,
            edges: norm,
            adj,
        };
        if let Some(v) = net.first_unreachable() {
            return Err(ValidationError::Disconnected(v));
        }
        Ok(net)
    }

    fn first_unreachable(&self) -> Option<NodeId> {
        let mut seen = vec![false; self.node_count()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adj[u] {
                if !seen[v.index()] {
                    seen[v.index()] = true;
                    queue.push_back(v.index());
                }
            }
        }
        seen.iter().position(|s| !s).map(|i| NodeId(i as u32))
    }

    pub fn node_count(&self) -> usize {
        self.pads.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.pads.len() as u32).map(NodeId)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v.index() < self.pads.len()
    }

    pub fn check(&self, v: NodeId) -> Result<(), NetworkError> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(NetworkError::UnknownNode(v))
        }
    }

    /// Recharging pads at `v`. Panics on an unknown node.
    pub fn pads(&self, v: NodeId) -> u32 {
        self.pads[v.index()]
    }

    /// Neighbors of `v` in ascending id order, with segment lengths.
    pub fn neighbors(&self, v: NodeId) -> &[(NodeId, f64)] {
        &self.adj[v.index()]
    }

    /// Length of the segment `a`-`b`, if they are adjacent.
    pub fn edge_km(&self, a: NodeId, b: NodeId) -> Option<f64> {
        if !self.contains(a) || !self.contains(b) {
            return None;
        }
        let list = &self.adj[a.index()];
        list.binary_search_by_key(&b, |&(v, _)| v)
            .ok()
            .map(|i| list[i].1)
    }

    /// Sum of segment lengths along `path`, or `None` if two consecutive
    /// nodes are not adjacent.
    pub fn path_km(&self, path: &[NodeId]) -> Option<f64> {
        path.windows(2)
            .try_fold(0.0, |acc, w| self.edge_km(w[0], w[1]).map(|km| acc + km))
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    node: NodeId,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths. Among equal-length routes the
/// lexicographically smallest node sequence is kept.
#[derive(Debug, Clone)]
pub struct ShortestPathTree {
    source: NodeId,
    dist: Vec<f64>,
    paths: Vec<Vec<NodeId>>,
}

impl ShortestPathTree {
    pub fn new(net: &SkywayNetwork, source: NodeId) -> Result<Self, NetworkError> {
        net.check(source)?;
        let n = net.node_count();
        let mut dist = vec![f64::INFINITY; n];
        let mut settled = vec![false; n];
        let mut paths: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        let mut heap = BinaryHeap::new();
        dist[source.index()] = 0.0;
        heap.push(HeapItem {
            dist: 0.0,
            node: source,
        });
        while let Some(HeapItem { dist: d, node: v }) = heap.pop() {
            if settled[v.index()] || d > dist[v.index()] {
                continue;
            }
            settled[v.index()] = true;
            // Parent choice is deferred to settle time: every tying
            // predecessor is settled by now and has its final path.
            if v == source {
                paths[v.index()] = vec![source];
            } else {
                let mut best: Option<Vec<NodeId>> = None;
                for &(u, km) in net.neighbors(v) {
                    if settled[u.index()] && u != v && dist[u.index()] + km == d {
                        let mut cand = paths[u.index()].clone();
                        cand.push(v);
                        if best.as_ref().map_or(true, |b| cand < *b) {
                            best = Some(cand);
                        }
                    }
                }
                paths[v.index()] = best.expect("settled node has a settled predecessor");
            }
            for &(w, km) in net.neighbors(v) {
                let nd = d + km;
                if !settled[w.index()] && nd < dist[w.index()] {
                    dist[w.index()] = nd;
                    heap.push(HeapItem { dist: nd, node: w });
                }
            }
        }
        Ok(ShortestPathTree {
            source,
            dist,
            paths,
        })
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn distance(&self, to: NodeId) -> f64 {
        self.dist[to.index()]
    }

    pub fn path(&self, to: NodeId) -> Path {
        Path(self.paths[to.index()].clone())
    }

    pub fn path_nodes(&self, to: NodeId) -> &[NodeId] {
        &self.paths[to.index()]
    }
}

/// Minimum-distance simple path from `from` to `to` and its length in km.
pub fn shortest_path(
    net: &SkywayNetwork,
    from: NodeId,
    to: NodeId,
) -> Result<(Path, f64), NetworkError> {
    net.check(to)?;
    let tree = ShortestPathTree::new(net, from)?;
    Ok((tree.path(to), tree.distance(to)))
}

/// Hop distances from `from` by breadth-first search; `None` beyond `max_hops`.
fn hop_levels(net: &SkywayNetwork, from: NodeId, max_hops: usize) -> Vec<Option<usize>> {
    let mut hops = vec![None; net.node_count()];
    hops[from.index()] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        let h = hops[u.index()].unwrap();
        if h == max_hops {
            continue;
        }
        for &(v, _) in net.neighbors(u) {
            if hops[v.index()].is_none() {
                hops[v.index()] = Some(h + 1);
                queue.push_back(v);
            }
        }
    }
    hops
}

/// Next-stop candidates: every node at hop distance `1..=lookahead + 1`
/// from `from`, paired with its shortest-path distance, ascending by id.
/// A lookahead of 0 yields the direct neighbors.
pub fn neighbors_within_lookahead(
    net: &SkywayNetwork,
    from: NodeId,
    lookahead: usize,
) -> Result<Vec<(NodeId, f64)>, NetworkError> {
    let tree = ShortestPathTree::new(net, from)?;
    Ok(lookahead_from_tree(net, &tree, lookahead))
}

pub(crate) fn lookahead_from_tree(
    net: &SkywayNetwork,
    tree: &ShortestPathTree,
    lookahead: usize,
) -> Vec<(NodeId, f64)> {
    let hops = hop_levels(net, tree.source(), lookahead + 1);
    net.nodes()
        .filter(|v| matches!(hops[v.index()], Some(h) if h >= 1))
        .map(|v| (v, tree.distance(v)))
        .collect()
}

/// Whether `to` can be reached from `from` through nodes off the current
/// path. Branches failing this hold no path, so the search skips them.
fn reaches_avoiding(
    net: &SkywayNetwork,
    from: NodeId,
    to: NodeId,
    on_path: &[bool],
    seen: &mut [bool],
    queue: &mut VecDeque<NodeId>,
) -> bool {
    seen.iter_mut().for_each(|s| *s = false);
    queue.clear();
    seen[from.index()] = true;
    queue.push_back(from);
    while let Some(u) = queue.pop_front() {
        for &(v, _) in net.neighbors(u) {
            if v == to {
                return true;
            }
            if !seen[v.index()] && !on_path[v.index()] {
                seen[v.index()] = true;
                queue.push_back(v);
            }
        }
    }
    false
}

/// Every simple path from `from` to `to`, depth-first with ascending
/// neighbor ids. More than `max_paths` results is an error that carries
/// the first `max_paths` paths found.
pub fn enumerate_simple_paths(
    net: &SkywayNetwork,
    from: NodeId,
    to: NodeId,
    max_paths: usize,
) -> Result<Vec<Path>, NetworkError> {
    net.check(from)?;
    net.check(to)?;
    if max_paths == 0 {
        return Err(NetworkError::InvalidParameter("max_paths must be positive".into()));
    }
    if from == to {
        return Ok(vec![Path(vec![from])]);
    }
    let mut found = Vec::new();
    let mut on_path = vec![false; net.node_count()];
    let mut seen = vec![false; net.node_count()];
    let mut queue = VecDeque::new();
    let mut stack: Vec<NodeId> = vec![from];
    // Per depth: index of the next neighbor to try.
    let mut cursor: Vec<usize> = vec![0];
    on_path[from.index()] = true;
    while let Some(&top) = stack.last() {
        let depth = stack.len() - 1;
        let nbrs = net.neighbors(top);
        if cursor[depth] >= nbrs.len() {
            on_path[top.index()] = false;
            stack.pop();
            cursor.pop();
            continue;
        }
        let (next, _) = nbrs[cursor[depth]];
        cursor[depth] += 1;
        if on_path[next.index()] {
            continue;
        }
        if next == to {
            if found.len() == max_paths {
                return Err(NetworkError::PathBudgetExceeded {
                    budget: max_paths,
                    found,
                });
            }
            let mut p = stack.clone();
            p.push(to);
            found.push(Path(p));
            continue;
        }
        on_path[next.index()] = true;
        if !reaches_avoiding(net, next, to, &on_path, &mut seen, &mut queue) {
            on_path[next.index()] = false;
            continue;
        }
        stack.push(next);
        cursor.push(0);
    }
    Ok(found)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: u32,
    pads: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    a: u32,
    b: u32,
    km: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    nodes: Vec<NodeDoc>,
    edges: Vec<EdgeDoc>,
}

fn parse_error(e: serde_json::Error) -> NetworkError {
    NetworkError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

impl SkywayNetwork {
    pub fn from_json_str(s: &str) -> Result<Self, NetworkError> {
        let doc: NetworkDoc = serde_json::from_str(s).map_err(parse_error)?;
        Self::from_doc(doc)
    }

    fn from_doc(mut doc: NetworkDoc) -> Result<Self, NetworkError> {
        doc.nodes.sort_by_key(|n| n.id);
        for (i, node) in doc.nodes.iter().enumerate() {
            if node.id != i as u32 {
                return Err(ValidationError::NonDenseIds {
                    expected: i as u32,
                    found: node.id,
                }
                .into());
            }
        }
        let pads = doc.nodes.iter().map(|n| n.pads).collect();
        let edges = doc
            .edges
            .iter()
            .map(|e| (NodeId(e.a), NodeId(e.b), e.km));
        Ok(SkywayNetwork::new(pads, edges)?)
    }

    pub fn to_json_string(&self) -> String {
        let doc = NetworkDoc {
            nodes: self
                .pads
                .iter()
                .enumerate()
                .map(|(i, &pads)| NodeDoc { id: i as u32, pads })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeDoc {
                    a: e.a.0,
                    b: e.b.0,
                    km: e.km,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("network document serializes")
    }
}

/// Reads the JSON network document from `source`.
pub fn load_network(mut source: impl Read) -> Result<SkywayNetwork, NetworkError> {
    let mut buf = String::new();
    source
        .read_to_string(&mut buf)
        .map_err(|e| NetworkError::Io(e.to_string()))?;
    SkywayNetwork::from_json_str(&buf)
}

/// Writes the JSON network document to `sink`.
pub fn save_network(net: &SkywayNetwork, mut sink: impl Write) -> Result<(), NetworkError> {
    sink.write_all(net.to_json_string().as_bytes())
        .map_err(|e| NetworkError::Io(e.to_string()))
}

/// Parameters for [`generate_random_network`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub nodes: usize,
    /// Target fraction of all node pairs joined by a segment. The spanning
    /// tree is always kept, so the real density is at least `2 / nodes`.
    pub edge_density: f64,
    pub pads_min: u32,
    pub pads_max: u32,
    pub km_min: f64,
    pub km_max: f64,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            nodes: 30,
            edge_density: 0.12,
            pads_min: 1,
            pads_max: 4,
            km_min: 50.0,
            km_max: 400.0,
            seed: 1,
        }
    }
}

/// Random connected network: a random recursive spanning tree plus extra
/// segments up to the requested density, joining nodes that are close in
/// the tree, like neighbouring rooftops. Pads and distances are uniform in
/// their ranges. Same seed, same network.
pub fn generate_random_network(params: &GeneratorParams) -> Result<SkywayNetwork, NetworkError> {
    let GeneratorParams {
        nodes: n,
        edge_density,
        pads_min,
        pads_max,
        km_min,
        km_max,
        seed,
    } = *params;
    if n < 2 {
        return Err(NetworkError::InvalidParameter("node_count must be at least 2".into()));
    }
    if !(0.0..=1.0).contains(&edge_density) {
        return Err(NetworkError::InvalidParameter("edge_density must lie in [0, 1]".into()));
    }
    if pads_min < 1 || pads_min > pads_max {
        return Err(NetworkError::InvalidParameter(format!(
            "pad range [{pads_min}, {pads_max}] is empty or below 1"
        )));
    }
    if !(km_min > 0.0) || !(km_min <= km_max) || !km_max.is_finite() {
        return Err(NetworkError::InvalidParameter(format!(
            "distance range [{km_min}, {km_max}] is empty or nonpositive"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_pairs = n * (n - 1) / 2;
    let target = ((edge_density * max_pairs as f64).round() as usize).clamp(n - 1, max_pairs);

    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut rng);
    let mut pairs = Vec::with_capacity(target);
    let mut tree: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 1..n {
        let (a, b) = (order[i] as usize, order[rng.gen_range(0..i)] as usize);
        tree[a].push(b);
        tree[b].push(a);
        pairs.push((a.min(b) as u32, a.max(b) as u32));
    }
    // Extra segments close the shortest cycles first: pairs two tree hops
    // apart, then three, and so on, each ring in random order.
    let mut rings: Vec<Vec<(u32, u32)>> = Vec::new();
    for a in 0..n {
        let mut hops = vec![usize::MAX; n];
        hops[a] = 0;
        let mut queue = VecDeque::from([a]);
        while let Some(u) = queue.pop_front() {
            for &v in &tree[u] {
                if hops[v] == usize::MAX {
                    hops[v] = hops[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for b in a + 1..n {
            if hops[b] >= 2 {
                if rings.len() < hops[b] - 1 {
                    rings.resize(hops[b] - 1, Vec::new());
                }
                rings[hops[b] - 2].push((a as u32, b as u32));
            }
        }
    }
    for mut ring in rings {
        if pairs.len() >= target {
            break;
        }
        ring.shuffle(&mut rng);
        let take = (target - pairs.len()).min(ring.len());
        pairs.extend_from_slice(&ring[..take]);
    }
    let pads: Vec<u32> = (0..n).map(|_| rng.gen_range(pads_min..=pads_max)).collect();
    let edges: Vec<(NodeId, NodeId, f64)> = pairs
        .into_iter()
        .map(|(a, b)| {
            let km = if km_min == km_max {
                km_min
            } else {
                rng.gen_range(km_min..=km_max)
            };
            (NodeId(a), NodeId(b), km)
        })
        .collect();
    Ok(SkywayNetwork::new(pads, edges)?)
}
