//! Simple undirected graphs with dense adjacency and real node features.

mod count;
mod generators;
mod io;

pub use count::{count_substructure, Count, CountMode, Pattern};
pub use generators::{
    complete, cycle, disjoint_union, erdos_renyi, path, petersen, rook_4x4, shrikhande, srg_parameters,
    star,
};
pub use io::{
    graph_from_json, graph_to_json, read_dataset, read_graph_json, write_dataset, write_graph_json,
    ParseErrorKind, Sample,
};

use thiserror::Error;

use crate::rng::Prng;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("edge ({u}, {v}) has an endpoint outside [0, {n})")]
    InvalidEdge { u: usize, v: usize, n: usize },
    #[error("self-loop on node {0} rejected")]
    SelfLoopRejected(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("{what} needs at least {min} nodes, got {got}")]
    TooSmall { what: &'static str, min: usize, got: usize },
    #[error("parse error at line {line}: {kind}")]
    ParseError { line: usize, kind: ParseErrorKind },
    #[error("io error: {0}")]
    IoError(String),
}

/// Node-attributed simple graph. Adjacency is stored row-major as `n*n`
/// booleans and features as `n*d` reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    d: usize,
    adj: Vec<bool>,
    features: Vec<f64>,
}

impl Graph {
    /// Builds a graph from an edge list and a feature matrix (one row per node).
    pub fn new(n: usize, edges: &[(usize, usize)], features: &[Vec<f64>]) -> Result<Self, GraphError> {
        if features.len() != n {
            return Err(GraphError::ShapeMismatch(format!(
                "{} feature rows for {} nodes",
                features.len(),
                n
            )));
        }
        let d = features.first().map_or(0, |r| r.len());
        if features.iter().any(|r| r.len() != d) {
            return Err(GraphError::ShapeMismatch("ragged feature rows".into()));
        }
        let mut adj = vec![false; n * n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::InvalidEdge { u, v, n });
            }
            if u == v {
                return Err(GraphError::SelfLoopRejected(u));
            }
            adj[u * n + v] = true;
            adj[v * n + u] = true;
        }
        Ok(Graph { n, d, adj, features: features.concat() })
    }

    /// Graph with one constant feature channel equal to 1.0.
    pub fn unlabeled(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        Graph::new(n, edges, &vec![vec![1.0]; n])
    }

    pub(crate) fn from_parts(n: usize, d: usize, adj: Vec<bool>, features: Vec<f64>) -> Self {
        debug_assert_eq!(adj.len(), n * n);
        debug_assert_eq!(features.len(), n * d);
        Graph { n, d, adj, features }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Feature channels per node.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u * self.n + v]
    }

    pub fn adjacency(&self) -> &[bool] {
        &self.adj
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn feature_row(&self, v: usize) -> &[f64] {
        &self.features[v * self.d..(v + 1) * self.d]
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&u| self.adj[v * self.n + u])
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors(v).count()
    }

    /// Edges as pairs `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in u + 1..self.n {
                if self.has_edge(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&b| b).count() / 2
    }

    /// Replaces the feature matrix.
    pub fn with_features(&self, features: &[Vec<f64>]) -> Result<Self, GraphError> {
        Graph::new(self.n, &self.edges(), features)
    }

    /// Relabels nodes so that node `u` becomes `σ(u)`.
    pub fn permute(&self, sigma: &Permutation) -> Result<Self, GraphError> {
        if sigma.len() != self.n {
            return Err(GraphError::ShapeMismatch(format!(
                "permutation of size {} on {} nodes",
                sigma.len(),
                self.n
            )));
        }
        let n = self.n;
        let mut adj = vec![false; n * n];
        let mut features = vec![0.0; n * self.d];
        for u in 0..n {
            let su = sigma.apply(u);
            for v in 0..n {
                adj[su * n + sigma.apply(v)] = self.adj[u * n + v];
            }
            features[su * self.d..(su + 1) * self.d].copy_from_slice(self.feature_row(u));
        }
        Ok(Graph { n, d: self.d, adj, features })
    }
}

/// `apply_permutation(G, σ)`: the node action of σ on a graph.
pub fn apply_permutation(g: &Graph, sigma: &Permutation) -> Result<Graph, GraphError> {
    g.permute(sigma)
}

/// A bijection on `[0, n)`, stored as the image of each index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self, GraphError> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &m in &mapping {
            if m >= n || seen[m] {
                return Err(GraphError::ShapeMismatch(format!("{mapping:?} is not a bijection")));
            }
            seen[m] = true;
        }
        Ok(Permutation(mapping))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn random(n: usize, rng: &mut Prng) -> Self {
        let mut m: Vec<usize> = (0..n).collect();
        crate::rng::shuffle(rng, &mut m);
        Permutation(m)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn apply(&self, u: usize) -> usize {
        self.0[u]
    }

    pub fn mapping(&self) -> &[usize] {
        &self.0
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &Permutation) -> Permutation {
        Permutation(first.0.iter().map(|&u| self.0[u]).collect())
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.0.len()];
        for (u, &v) in self.0.iter().enumerate() {
            inv[v] = u;
        }
        Permutation(inv)
    }
}
