use std::collections::VecDeque;

use proptest::prelude::*;
use sdaas::network::{load_network, save_network};
use sdaas::{
    enumerate_simple_paths, generate_random_network, neighbors_within_lookahead, shortest_path,
    GeneratorParams, NetworkError, NodeId, SkywayNetwork,
};

fn small(nodes: usize, density: f64, seed: u64) -> SkywayNetwork {
    generate_random_network(&GeneratorParams {
        nodes,
        edge_density: density,
        seed,
        ..GeneratorParams::default()
    })
    .unwrap()
}

/// Exhaustive DFS over simple paths, independent of the library search.
fn all_paths(net: &SkywayNetwork, from: NodeId, to: NodeId) -> Vec<(Vec<NodeId>, f64)> {
    fn go(
        net: &SkywayNetwork,
        at: NodeId,
        to: NodeId,
        path: &mut Vec<NodeId>,
        km: f64,
        out: &mut Vec<(Vec<NodeId>, f64)>,
    ) {
        if at == to {
            out.push((path.clone(), km));
            return;
        }
        for e in net.edges() {
            let next = if e.a == at {
                e.b
            } else if e.b == at {
                e.a
            } else {
                continue;
            };
            if path.contains(&next) {
                continue;
            }
            path.push(next);
            go(net, next, to, path, km + e.km, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    go(net, from, to, &mut vec![from], 0.0, &mut out);
    out
}

fn bfs_hops(net: &SkywayNetwork, from: NodeId) -> Vec<usize> {
    let n = net.node_count();
    let mut hops = vec![usize::MAX; n];
    hops[from.index()] = 0;
    let mut q = VecDeque::from([from]);
    while let Some(u) = q.pop_front() {
        for e in net.edges() {
            let v = if e.a == u {
                e.b
            } else if e.b == u {
                e.a
            } else {
                continue;
            };
            if hops[v.index()] == usize::MAX {
                hops[v.index()] = hops[u.index()] + 1;
                q.push_back(v);
            }
        }
    }
    hops
}

/// Floyd-Warshall distances.
fn all_pairs(net: &SkywayNetwork) -> Vec<Vec<f64>> {
    let n = net.node_count();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for e in net.edges() {
        d[e.a.index()][e.b.index()] = e.km;
        d[e.b.index()][e.a.index()] = e.km;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

#[test]
fn shortest_path_matches_exhaustive_enumeration() {
    for seed in 1..=5 {
        let net = small(10, 0.3, seed);
        for a in 0..10u32 {
            for b in 0..10u32 {
                let (a, b) = (NodeId(a), NodeId(b));
                let (path, km) = shortest_path(&net, a, b).unwrap();
                if a == b {
                    assert_eq!(path.nodes(), &[a]);
                    assert_eq!(km, 0.0);
                    continue;
                }
                let best = all_paths(&net, a, b)
                    .into_iter()
                    .map(|(_, k)| k)
                    .fold(f64::INFINITY, f64::min);
                assert!((km - best).abs() < 1e-9, "{a}->{b}: {km} vs {best}");
                let along = net.path_km(path.nodes()).unwrap();
                assert!((along - km).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn lookahead_matches_bfs_levels() {
    for seed in 1..=5 {
        let net = small(10, 0.2, seed);
        let dist = all_pairs(&net);
        for from in net.nodes() {
            let hops = bfs_hops(&net, from);
            for l in 0..=3 {
                let got = neighbors_within_lookahead(&net, from, l).unwrap();
                let want: Vec<NodeId> = net
                    .nodes()
                    .filter(|v| (1..=l + 1).contains(&hops[v.index()]))
                    .collect();
                let ids: Vec<NodeId> = got.iter().map(|&(v, _)| v).collect();
                assert_eq!(ids, want, "seed {seed} from {from} l {l}");
                for (v, km) in got {
                    assert!((km - dist[from.index()][v.index()]).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn complete_graph_path_counts() {
    let mut edges = Vec::new();
    for a in 0..5u32 {
        for b in a + 1..5 {
            edges.push((NodeId(a), NodeId(b), 1.0 + (a + b) as f64));
        }
    }
    let k5 = SkywayNetwork::new(vec![1; 5], edges).unwrap();
    let paths = enumerate_simple_paths(&k5, NodeId(0), NodeId(1), 1000).unwrap();
    // Intermediate sequences drawn from the other 3 nodes, length 0 to 3.
    let perms: usize = (0..=3).map(|k| (3 - k + 1..=3).product::<usize>()).sum();
    assert_eq!(paths.len(), perms);
    assert_eq!(paths.len(), all_paths(&k5, NodeId(0), NodeId(1)).len());

    match enumerate_simple_paths(&k5, NodeId(0), NodeId(1), 10) {
        Err(NetworkError::PathBudgetExceeded { budget, found }) => {
            assert_eq!(budget, 10);
            assert_eq!(found.len(), 10);
            assert_eq!(found[..], paths[..10]);
        }
        other => panic!("expected budget error, got {other:?}"),
    }
}

#[test]
fn enumeration_order_is_dfs_by_ascending_id() {
    for seed in 1..=3 {
        let net = small(9, 0.3, seed);
        let paths = enumerate_simple_paths(&net, NodeId(0), NodeId(8), 1_000_000).unwrap();
        let mut want: Vec<Vec<NodeId>> =
            all_paths(&net, NodeId(0), NodeId(8)).into_iter().map(|p| p.0).collect();
        // DFS by ascending neighbor id visits paths in lexicographic order.
        want.sort();
        let got: Vec<Vec<NodeId>> = paths.into_iter().map(|p| p.0).collect();
        assert_eq!(got, want);
    }
}

#[test]
fn large_generated_network_is_connected_and_round_trips() {
    let net = generate_random_network(&GeneratorParams {
        nodes: 200,
        edge_density: 0.02,
        seed: 42,
        ..GeneratorParams::default()
    })
    .unwrap();
    assert!(bfs_hops(&net, NodeId(0)).iter().all(|&h| h != usize::MAX));
    let mut buf = Vec::new();
    save_network(&net, &mut buf).unwrap();
    assert_eq!(load_network(&buf[..]).unwrap(), net);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn distances_are_symmetric_and_metric(
        nodes in 3usize..14, density in 0.05f64..0.6, seed in 0u64..10_000,
    ) {
        let net = small(nodes, density, seed);
        let n = nodes as u32;
        let d = |a: u32, b: u32| shortest_path(&net, NodeId(a), NodeId(b)).unwrap().1;
        for a in 0..n {
            for b in 0..n {
                prop_assert!((d(a, b) - d(b, a)).abs() < 1e-9);
                for c in 0..n {
                    prop_assert!(d(a, b) <= d(a, c) + d(c, b) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn lookahead_sets_are_nested(
        nodes in 2usize..20, density in 0.05f64..0.5, seed in 0u64..10_000, l in 0usize..4,
    ) {
        let net = small(nodes, density, seed);
        for from in net.nodes() {
            let inner = neighbors_within_lookahead(&net, from, l).unwrap();
            let outer = neighbors_within_lookahead(&net, from, l + 1).unwrap();
            prop_assert!(inner.iter().all(|x| outer.contains(x)));
            prop_assert!(inner.iter().all(|&(v, _)| v != from));
        }
    }

    #[test]
    fn enumeration_contains_shortest_path(
        nodes in 2usize..11, density in 0.05f64..0.5, seed in 0u64..10_000,
        a in 0u32..11, b in 0u32..11,
    ) {
        let net = small(nodes, density, seed);
        let (a, b) = (NodeId(a % nodes as u32), NodeId(b % nodes as u32));
        let (sp, km) = shortest_path(&net, a, b).unwrap();
        let paths = enumerate_simple_paths(&net, a, b, 1_000_000).unwrap();
        prop_assert!(paths.contains(&sp));
        let best = paths
            .iter()
            .map(|p| net.path_km(p.nodes()).unwrap())
            .fold(f64::INFINITY, f64::min);
        prop_assert!((best - km).abs() < 1e-9);
    }

    #[test]
    fn generated_networks_round_trip(
        nodes in 2usize..60, density in 0.0f64..0.4, seed in any::<u64>(),
        pads in (1u32..4, 0u32..4), km in (1.0f64..100.0, 0.0f64..300.0),
    ) {
        let params = GeneratorParams {
            nodes,
            edge_density: density,
            pads_min: pads.0,
            pads_max: pads.0 + pads.1,
            km_min: km.0,
            km_max: km.0 + km.1,
            seed,
        };
        let net = generate_random_network(&params).unwrap();
        prop_assert_eq!(&net, &generate_random_network(&params).unwrap());
        prop_assert!(net.nodes().all(|v| (pads.0..=pads.0 + pads.1).contains(&net.pads(v))));
        prop_assert!(net.edges().iter().all(|e| e.km >= km.0 && e.km <= km.0 + km.1));
        let mut buf = Vec::new();
        save_network(&net, &mut buf).unwrap();
        prop_assert_eq!(load_network(&buf[..]).unwrap(), net);
    }
}
