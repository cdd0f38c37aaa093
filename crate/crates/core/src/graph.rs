//! Directed communication graphs.
//!
//! Edge convention: the pair `(i, j)` is an edge when node `j` can send to
//! node `i`. Consequently `in_neighbors(i)` lists the senders whose values
//! node `i` reads each round, and every node is its own in-neighbor.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Attempts allowed when rejection-sampling a strongly connected random graph.
pub const MAX_GENERATION_ATTEMPTS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    Empty,
    #[error("edge probability {0} outside (0, 1]")]
    InvalidProbability(f64),
    #[error("no strongly connected graph after {attempts} attempts (n = {n}, p = {p}); p is too small for n")]
    RejectionBudgetExhausted { n: usize, p: f64, attempts: usize },
    #[error("node {node} out of range for graph with {n} nodes")]
    InvalidNode { node: usize, n: usize },
    #[error("graph is not strongly connected")]
    NotStronglyConnected,
    #[error("diameter bound {bound} is smaller than the true diameter {diameter}")]
    BoundBelowDiameter { bound: usize, diameter: usize },
    #[error("malformed graph record: {0}")]
    Record(String),
}

/// Random or structured topology family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphModel {
    /// Each ordered off-diagonal pair is an edge independently with probability `p`.
    ErdosRenyi { p: f64 },
    /// Directed cycle `0 -> 1 -> ... -> n-1 -> 0`.
    Ring,
    Complete,
}

impl std::fmt::Display for GraphModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GraphModel::ErdosRenyi { p } => write!(f, "erdos_renyi({p})"),
            GraphModel::Ring => write!(f, "ring"),
            GraphModel::Complete => write!(f, "complete"),
        }
    }
}

/// Strongly connected digraph with mandatory self-loops.
///
/// Immutable once built; the diameter is computed at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct DiGraph {
    n: usize,
    in_adj: Vec<Vec<usize>>,
    out_adj: Vec<Vec<usize>>,
    diameter: usize,
    diameter_bound: usize,
    model: Option<GraphModel>,
    seed: Option<u64>,
}

impl DiGraph {
    /// Builds a graph from `(receiver, sender)` pairs. Self-loops are added
    /// for every node; duplicate pairs are ignored.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut in_sets: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
        for (i, j) in edges {
            for node in [i, j] {
                if node >= n {
                    return Err(GraphError::InvalidNode { node, n });
                }
            }
            in_sets[i].insert(j);
        }
        let in_adj: Vec<Vec<usize>> = in_sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let mut out_adj = vec![Vec::new(); n];
        for (i, senders) in in_adj.iter().enumerate() {
            for &j in senders {
                out_adj[j].push(i);
            }
        }
        // Receivers were pushed in ascending i, so out lists are already sorted.
        let diameter = directed_diameter(&out_adj).ok_or(GraphError::NotStronglyConnected)?;
        Ok(DiGraph {
            n,
            in_adj,
            out_adj,
            diameter,
            diameter_bound: diameter,
            model: None,
            seed: None,
        })
    }

    /// Generates a graph for `(n, model, seed)`; identical inputs give identical graphs.
    pub fn generate(n: usize, model: GraphModel, seed: u64) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut g = match model {
            GraphModel::Ring => DiGraph::from_edges(n, (0..n).map(|i| ((i + 1) % n, i)))?,
            GraphModel::Complete => {
                DiGraph::from_edges(n, (0..n).flat_map(|i| (0..n).map(move |j| (i, j))))?
            }
            GraphModel::ErdosRenyi { p } => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(GraphError::InvalidProbability(p));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut found = None;
                for _ in 0..MAX_GENERATION_ATTEMPTS {
                    let mut edges = Vec::new();
                    for i in 0..n {
                        for j in 0..n {
                            if i != j && rng.random_bool(p) {
                                edges.push((i, j));
                            }
                        }
                    }
                    match DiGraph::from_edges(n, edges) {
                        Ok(g) => {
                            found = Some(g);
                            break;
                        }
                        Err(GraphError::NotStronglyConnected) => continue,
                        Err(e) => return Err(e),
                    }
                }
                found.ok_or(GraphError::RejectionBudgetExhausted {
                    n,
                    p,
                    attempts: MAX_GENERATION_ATTEMPTS,
                })?
            }
        };
        g.model = Some(model);
        g.seed = Some(seed);
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Senders to node `i` in ascending order, including `i` itself.
    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_adj[i]
    }

    /// Receivers of node `j` in ascending order, including `j` itself.
    pub fn out_neighbors(&self, j: usize) -> &[usize] {
        &self.out_adj[j]
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.in_adj[i].len()
    }

    pub fn out_degree(&self, j: usize) -> usize {
        self.out_adj[j].len()
    }

    /// `true` when `(i, j)` is an edge, i.e. `j` sends to `i`.
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.in_adj[i].binary_search(&j).is_ok()
    }

    /// All edges `(receiver, sender)` in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.in_adj
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |&j| (i, j)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.in_adj.iter().map(Vec::len).sum()
    }

    /// Longest shortest directed path over all ordered node pairs.
    pub fn diameter(&self) -> usize {
        self.diameter
    }

    /// The window length used by round-based protocols: the diameter unless
    /// overridden by a larger upper bound.
    pub fn diameter_bound(&self) -> usize {
        self.diameter_bound
    }

    /// Replaces the working diameter with an upper bound `bound >= diameter`.
    pub fn with_diameter_bound(mut self, bound: usize) -> Result<Self, GraphError> {
        if bound < self.diameter {
            return Err(GraphError::BoundBelowDiameter {
                bound,
                diameter: self.diameter,
            });
        }
        self.diameter_bound = bound;
        Ok(self)
    }

    pub fn model(&self) -> Option<GraphModel> {
        self.model
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Nodes from which `i` is reachable in at most `m` hops (the
    /// `m`-in-neighborhood), ascending.
    pub fn m_in_neighborhood(&self, i: usize, m: usize) -> Result<Vec<usize>, GraphError> {
        if i >= self.n {
            return Err(GraphError::InvalidNode { node: i, n: self.n });
        }
        let mut seen = vec![false; self.n];
        seen[i] = true;
        let mut frontier = vec![i];
        for _ in 0..m {
            let mut next = Vec::new();
            for &v in &frontier {
                for &u in &self.in_adj[v] {
                    if !seen[u] {
                        seen[u] = true;
                        next.push(u);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok((0..self.n).filter(|&v| seen[v]).collect())
    }

    /// Serializable record; edges are listed in lexicographic order.
    pub fn to_record(&self) -> GraphRecord {
        GraphRecord {
            n: self.n,
            edges: self.edges().into_iter().map(|(i, j)| [i, j]).collect(),
            seed: self.seed,
            model: self.model,
        }
    }

    pub fn from_record(rec: &GraphRecord) -> Result<Self, GraphError> {
        let mut g = DiGraph::from_edges(rec.n, rec.edges.iter().map(|e| (e[0], e[1])))?;
        g.seed = rec.seed;
        g.model = rec.model;
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("graph record serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, GraphError> {
        let rec: GraphRecord =
            serde_json::from_str(s).map_err(|e| GraphError::Record(e.to_string()))?;
        DiGraph::from_record(&rec)
    }
}

/// JSON form of a [`DiGraph`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    pub seed: Option<u64>,
    pub model: Option<GraphModel>,
}

/// BFS hop distances from `source` following `adj`; `None` for unreachable.
pub fn bfs_distances(adj: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].expect("queued nodes have a distance");
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

fn directed_diameter(out_adj: &[Vec<usize>]) -> Option<usize> {
    let mut diameter = 0;
    for s in 0..out_adj.len() {
        for d in bfs_distances(out_adj, s) {
            diameter = diameter.max(d?);
        }
    }
    Some(diameter)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node_graph() {
        let g = DiGraph::generate(1, GraphModel::ErdosRenyi { p: 0.5 }, 99).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edges(), vec![(0, 0)]);
        assert_eq!(g.diameter(), 0);
    }

    #[test]
    fn ring_of_three() {
        let g = DiGraph::generate(3, GraphModel::Ring, 0).unwrap();
        assert_eq!(g.diameter(), 2);
        assert_eq!(g.in_neighbors(0), &[0, 2]);
        assert_eq!(g.m_in_neighborhood(0, 1).unwrap(), vec![0, 2]);
        assert_eq!(g.m_in_neighborhood(0, 0).unwrap(), vec![0]);
        assert_eq!(g.m_in_neighborhood(0, 2).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn structured_diameters() {
        assert_eq!(DiGraph::generate(4, GraphModel::Complete, 0).unwrap().diameter(), 1);
        assert_eq!(DiGraph::generate(5, GraphModel::Ring, 0).unwrap().diameter(), 4);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(DiGraph::generate(0, GraphModel::Ring, 0), Err(GraphError::Empty));
        assert_eq!(
            DiGraph::generate(3, GraphModel::ErdosRenyi { p: 0.0 }, 0),
            Err(GraphError::InvalidProbability(0.0))
        );
        assert!(matches!(
            DiGraph::generate(60, GraphModel::ErdosRenyi { p: 0.001 }, 1),
            Err(GraphError::RejectionBudgetExhausted { .. })
        ));
        assert_eq!(
            DiGraph::from_edges(2, [(1, 0)]),
            Err(GraphError::NotStronglyConnected)
        );
        let g = DiGraph::generate(3, GraphModel::Ring, 0).unwrap();
        assert!(matches!(
            g.m_in_neighborhood(3, 1),
            Err(GraphError::InvalidNode { node: 3, n: 3 })
        ));
        assert!(g.clone().with_diameter_bound(1).is_err());
        assert_eq!(g.with_diameter_bound(5).unwrap().diameter_bound(), 5);
    }

    #[test]
    fn generation_is_deterministic() {
        let m = GraphModel::ErdosRenyi { p: 0.2 };
        let a = DiGraph::generate(20, m, 42).unwrap();
        let b = DiGraph::generate(20, m, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_round_trip_keeps_lexicographic_edges() {
        let g = DiGraph::generate(8, GraphModel::ErdosRenyi { p: 0.3 }, 3).unwrap();
        let json = g.to_json();
        let back = DiGraph::from_json(&json).unwrap();
        assert_eq!(back, g);
        let rec = g.to_record();
        assert!(rec.edges.windows(2).all(|w| w[0] < w[1]));
        assert!(json.contains("\"model\":{\"kind\":\"erdos_renyi\""));
    }
}
