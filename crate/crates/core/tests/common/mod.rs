#![allow(dead_code)]

use ftc_core::graph::{DiGraph, GraphModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random strongly connected digraph; sparse enough that the diameter is
/// usually above one.
pub fn random_graph(n: usize, seed: u64) -> DiGraph {
    let p = (2.5 / n as f64).clamp(0.15, 0.9);
    DiGraph::generate(n, GraphModel::ErdosRenyi { p }, seed).unwrap()
}

pub fn uniform_states(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0000_0000_0001);
    (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
}

/// All-pairs hop distances by Floyd-Warshall; `dist[a][b]` is the length of
/// the shortest path from `a` to `b` along sender-to-receiver edges.
pub fn floyd_warshall(g: &DiGraph) -> Vec<Vec<Option<usize>>> {
    let n = g.node_count();
    let mut dist = vec![vec![None; n]; n];
    for (i, row) in dist.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for i in 0..n {
        for &j in g.in_neighbors(i) {
            if i != j {
                dist[j][i] = Some(1);
            }
        }
    }
    for m in 0..n {
        for a in 0..n {
            for b in 0..n {
                if let (Some(x), Some(y)) = (dist[a][m], dist[m][b]) {
                    if dist[a][b].is_none_or(|cur| x + y < cur) {
                        dist[a][b] = Some(x + y);
                    }
                }
            }
        }
    }
    dist
}

pub fn fw_diameter(g: &DiGraph) -> Option<usize> {
    let dist = floyd_warshall(g);
    let mut best = 0;
    for row in &dist {
        for d in row {
            best = best.max((*d)?);
        }
    }
    Some(best)
}
