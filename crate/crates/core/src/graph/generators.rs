use super::{Graph, GraphError};
use crate::rng;

fn plain(n: usize, edges: &[(usize, usize)]) -> Graph {
    Graph::unlabeled(n, edges).expect("generator edges are valid")
}

/// G(n, p): each unordered pair `u < v`, visited in lexicographic order,
/// is kept when a uniform draw from the `data` substream falls below `p`.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph, GraphError> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(GraphError::InvalidProbability(p));
    }
    let mut r = rng::stream(seed, rng::DATA);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng::uniform(&mut r) < p {
                edges.push((u, v));
            }
        }
    }
    Ok(plain(n, &edges))
}

pub fn cycle(n: usize) -> Result<Graph, GraphError> {
    if n < 3 {
        return Err(GraphError::TooSmall { what: "cycle", min: 3, got: n });
    }
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    Ok(plain(n, &edges))
}

pub fn path(n: usize) -> Graph {
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    plain(n, &edges)
}

/// K_{1,k} with the centre at node 0.
pub fn star(k: usize) -> Result<Graph, GraphError> {
    if k < 1 {
        return Err(GraphError::TooSmall { what: "star", min: 1, got: k });
    }
    let edges: Vec<_> = (1..=k).map(|i| (0, i)).collect();
    Ok(plain(k + 1, &edges))
}

pub fn complete(n: usize) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            edges.push((u, v));
        }
    }
    plain(n, &edges)
}

/// Union with the nodes of `b` shifted by `a.n()`.
pub fn disjoint_union(a: &Graph, b: &Graph) -> Result<Graph, GraphError> {
    if a.d() != b.d() && a.n() > 0 && b.n() > 0 {
        return Err(GraphError::ShapeMismatch(format!("feature widths {} and {}", a.d(), b.d())));
    }
    let n = a.n() + b.n();
    let d = if a.n() > 0 { a.d() } else { b.d() };
    let mut adj = vec![false; n * n];
    for (u, v) in a.edges() {
        adj[u * n + v] = true;
        adj[v * n + u] = true;
    }
    let off = a.n();
    for (u, v) in b.edges() {
        adj[(u + off) * n + v + off] = true;
        adj[(v + off) * n + u + off] = true;
    }
    let mut features = a.features().to_vec();
    features.extend_from_slice(b.features());
    Ok(Graph::from_parts(n, d, adj, features))
}

/// Outer 5-cycle 0..5, inner pentagram 5..10, spokes i -- i+5.
pub fn petersen() -> Graph {
    let mut edges = Vec::new();
    for i in 0..5 {
        edges.push((i, (i + 1) % 5));
        edges.push((i, i + 5));
        edges.push((i + 5, (i + 2) % 5 + 5));
    }
    plain(10, &edges)
}

/// Rook's graph on a 4x4 board: vertex `4*i + j`, adjacent when the cells
/// share a row or a column.
pub fn rook_4x4() -> Graph {
    let mut edges = Vec::new();
    for a in 0..16 {
        for b in a + 1..16 {
            if a / 4 == b / 4 || a % 4 == b % 4 {
                edges.push((a, b));
            }
        }
    }
    plain(16, &edges)
}

/// Cayley graph of Z4 x Z4 with connection set ±(1,0), ±(0,1), ±(1,1).
pub fn shrikhande() -> Graph {
    let conn = [(1, 0), (3, 0), (0, 1), (0, 3), (1, 1), (3, 3)];
    let mut edges = Vec::new();
    for a in 0..16 {
        for b in a + 1..16 {
            let (da, db) = ((b / 4 + 4 - a / 4) % 4, (b % 4 + 4 - a % 4) % 4);
            if conn.contains(&(da, db)) {
                edges.push((a, b));
            }
        }
    }
    plain(16, &edges)
}

/// Brute-force strongly-regular parameters `(v, k, λ, μ)`, or `None` if
/// the graph is not strongly regular.
pub fn srg_parameters(g: &Graph) -> Option<(usize, usize, usize, usize)> {
    let n = g.n();
    if n == 0 {
        return None;
    }
    let k = g.degree(0);
    if (0..n).any(|v| g.degree(v) != k) {
        return None;
    }
    let mut lambda = None;
    let mut mu = None;
    for u in 0..n {
        for v in u + 1..n {
            let common = (0..n).filter(|&w| g.has_edge(u, w) && g.has_edge(v, w)).count();
            let slot = if g.has_edge(u, v) { &mut lambda } else { &mut mu };
            match slot {
                None => *slot = Some(common),
                Some(c) if *c != common => return None,
                _ => {}
            }
        }
    }
    Some((n, k, lambda.unwrap_or(0), mu.unwrap_or(0)))
}
