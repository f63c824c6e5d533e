//! Simple undirected graphs: SNAP edge-list ingestion, adjacency operators,
//! and exact small-graph oracles for triangle counts and the Estrada index.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{invalid, Result, TraceError};
use crate::linop::{LinearOperator, MatVec};

/// Node limit for [`triangle_count_exact`] unless overridden.
pub const TRIANGLE_NODE_LIMIT: usize = 5000;
/// Node limit for the dense eigendecomposition in [`estrada_index_exact`].
pub const ESTRADA_NODE_LIMIT: usize = 2000;

/// Undirected simple graph on nodes `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    // CSR adjacency, neighbor lists sorted
    offsets: Arc<Vec<usize>>,
    neighbors: Arc<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from undirected pairs. Self-loops and duplicates
    /// (in either orientation) are rejected.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut lists = vec![Vec::new(); node_count];
        for &(u, v) in edges {
            if u >= node_count || v >= node_count {
                return Err(invalid(format!(
                    "edge ({u}, {v}) out of range for {node_count} nodes"
                )));
            }
            if u == v {
                return Err(invalid(format!("self-loop at node {u}")));
            }
            lists[u].push(v);
            lists[v].push(u);
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        let mut neighbors = Vec::with_capacity(2 * edges.len());
        offsets.push(0);
        for (u, mut list) in lists.into_iter().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(invalid(format!("duplicate edge at node {u}")));
            }
            neighbors.extend(list);
            offsets.push(neighbors.len());
        }
        Ok(Self {
            node_count,
            offsets: Arc::new(offsets),
            neighbors: Arc::new(neighbors),
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.node_count)
            .flat_map(|u| self.neighbors(u).iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
            .collect()
    }

    pub fn dense_adjacency(&self) -> DMatrix<f64> {
        let n = self.node_count;
        let mut b = DMatrix::zeros(n, n);
        for u in 0..n {
            for &v in self.neighbors(u) {
                b[(u, v)] = 1.0;
            }
        }
        b
    }
}

/// Result of [`parse_edge_list`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedGraph {
    pub graph: Graph,
    /// Original node IDs, indexed by compacted ID.
    pub original_ids: Vec<i64>,
    pub self_loops_dropped: usize,
    pub duplicates_merged: usize,
}

/// Parses a SNAP-style edge list: two integer node IDs per line, `#`
/// comments, blank lines ignored, extra trailing columns ignored.
///
/// IDs are compacted to `0..n` in first-seen order. Directed input is
/// symmetrized: `(u, v)` and `(v, u)` become one undirected edge.
pub fn parse_edge_list(text: &str) -> Result<ParsedGraph> {
    let mut ids: HashMap<i64, usize> = HashMap::new();
    let mut original_ids = Vec::new();
    let mut edges = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut self_loops_dropped = 0;
    let mut duplicates_merged = 0;

    let mut intern = |raw: i64| -> usize {
        match ids.entry(raw) {
            Entry::Occupied(e) => *e.get(),
            Entry::Vacant(e) => {
                original_ids.push(raw);
                *e.insert(original_ids.len() - 1)
            }
        }
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let mut node = || -> Result<i64> {
            let tok = tokens.next().ok_or_else(|| TraceError::Parse {
                line: idx + 1,
                message: "expected two node IDs".into(),
            })?;
            tok.parse::<i64>().map_err(|_| TraceError::Parse {
                line: idx + 1,
                message: format!("bad node ID `{tok}`"),
            })
        };
        let (a, b) = (node()?, node()?);
        let (u, v) = (intern(a), intern(b));
        if u == v {
            self_loops_dropped += 1;
            continue;
        }
        let key = (u.min(v), u.max(v));
        if seen.insert(key) {
            edges.push(key);
        } else {
            duplicates_merged += 1;
        }
    }

    let graph = Graph::from_edges(original_ids.len(), &edges)?;
    Ok(ParsedGraph {
        graph,
        original_ids,
        self_loops_dropped,
        duplicates_merged,
    })
}

struct Adjacency {
    graph: Graph,
}

impl MatVec for Adjacency {
    fn dim(&self) -> usize {
        self.graph.node_count
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (u, yu) in y.iter_mut().enumerate() {
            *yu = self.graph.neighbors(u).iter().map(|&v| x[v]).sum();
        }
    }
}

/// `B x` in `O(|E|)` from the adjacency lists.
pub fn adjacency_operator(g: &Graph) -> Result<LinearOperator> {
    if g.node_count == 0 {
        return Err(invalid("graph has no nodes"));
    }
    LinearOperator::new(Adjacency { graph: g.clone() })
}

/// Exact triangle count by wedge enumeration over `u < v < w`.
///
/// Refuses graphs above [`TRIANGLE_NODE_LIMIT`] nodes unless `allow_large`.
pub fn triangle_count_exact(g: &Graph, allow_large: bool) -> Result<u64> {
    if !allow_large && g.node_count > TRIANGLE_NODE_LIMIT {
        return Err(TraceError::GuardExceeded {
            what: "triangle count",
            size: g.node_count,
            limit: TRIANGLE_NODE_LIMIT,
        });
    }
    let mut mark = vec![false; g.node_count];
    let mut count = 0u64;
    for u in 0..g.node_count {
        let higher: Vec<usize> = g.neighbors(u).iter().copied().filter(|&v| v > u).collect();
        for &v in &higher {
            mark[v] = true;
        }
        for &v in &higher {
            count += g.neighbors(v).iter().filter(|&&w| w > v && mark[w]).count() as u64;
        }
        for &v in &higher {
            mark[v] = false;
        }
    }
    Ok(count)
}

/// `Σ exp(λᵢ(B))` from a dense eigendecomposition. Limited to
/// [`ESTRADA_NODE_LIMIT`] nodes.
pub fn estrada_index_exact(g: &Graph) -> Result<f64> {
    if g.node_count > ESTRADA_NODE_LIMIT {
        return Err(TraceError::GuardExceeded {
            what: "dense Estrada index",
            size: g.node_count,
            limit: ESTRADA_NODE_LIMIT,
        });
    }
    if g.node_count == 0 {
        return Err(invalid("graph has no nodes"));
    }
    let eig = SymmetricEigen::new(g.dense_adjacency());
    Ok(eig.eigenvalues.iter().map(|l| l.exp()).sum())
}

/// `log(estrada / n)`.
pub fn natural_connectivity(estrada: f64, n: usize) -> Result<f64> {
    if estrada.is_nan() || estrada <= 0.0 {
        return Err(invalid(format!("Estrada index must be positive, got {estrada}")));
    }
    if n == 0 {
        return Err(invalid("node count must be at least 1"));
    }
    Ok((estrada / n as f64).ln())
}

/// G(n, p) random graph.
pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("edge probability must be in [0, 1], got {p}")));
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges)
}
