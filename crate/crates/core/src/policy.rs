//! Node-based subgraph selection policies and the bags they produce.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, Permutation};

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("node deletion needs at least 2 nodes, got {0}")]
    DegenerateBag(usize),
    #[error("node {v} out of range for {n} nodes")]
    InvalidNode { v: usize, n: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("cannot parse policy \"{0}\"")]
    BadPolicy(String),
}

/// One subgraph per node: node deletion, node marking, h-hop ego-nets,
/// marked ego-nets, or n copies of the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PolicyKind {
    Nd,
    Nm,
    Ego(usize),
    EgoPlus(usize),
    Null,
}

impl PolicyKind {
    /// The node-based policies plus the null policy.
    pub fn all_with_depths(depths: &[usize]) -> Vec<PolicyKind> {
        let mut v = vec![PolicyKind::Nd, PolicyKind::Nm];
        v.extend(depths.iter().map(|&h| PolicyKind::Ego(h)));
        v.extend(depths.iter().map(|&h| PolicyKind::EgoPlus(h)));
        v.push(PolicyKind::Null);
        v
    }

    pub fn is_marked(self) -> bool {
        matches!(self, PolicyKind::Nm | PolicyKind::EgoPlus(_))
    }

    pub fn ego_depth(self) -> Option<usize> {
        match self {
            PolicyKind::Ego(h) | PolicyKind::EgoPlus(h) => Some(h),
            _ => None,
        }
    }

    /// Feature width of the bag for input width `d`.
    pub fn feature_width(self, d: usize) -> usize {
        d + usize::from(self.is_marked())
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Nd => write!(f, "ND"),
            PolicyKind::Nm => write!(f, "NM"),
            PolicyKind::Ego(h) => write!(f, "EGO:{h}"),
            PolicyKind::EgoPlus(h) => write!(f, "EGO+:{h}"),
            PolicyKind::Null => write!(f, "NULL"),
        }
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PolicyError::BadPolicy(s.to_string());
        let depth = |h: &str| match h.parse::<usize>() {
            Ok(h) if h >= 1 => Ok(h),
            _ => Err(bad()),
        };
        match s {
            "ND" => Ok(PolicyKind::Nd),
            "NM" => Ok(PolicyKind::Nm),
            "NULL" => Ok(PolicyKind::Null),
            _ => {
                if let Some(h) = s.strip_prefix("EGO+:") {
                    Ok(PolicyKind::EgoPlus(depth(h)?))
                } else if let Some(h) = s.strip_prefix("EGO:") {
                    Ok(PolicyKind::Ego(depth(h)?))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl TryFrom<String> for PolicyKind {
    type Error = PolicyError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<PolicyKind> for String {
    fn from(p: PolicyKind) -> String {
        p.to_string()
    }
}

/// Root-aligned bag: subgraph `i` is the one selected for node `i`.
///
/// `sub_adj[(i*n + j)*n + k]` is the edge `j -- k` in subgraph `i`,
/// `sub_feat[(i*n + j)*d + c]` is channel `c` of node `j` in subgraph `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphBag {
    pub n: usize,
    pub d: usize,
    pub sub_adj: Vec<bool>,
    pub sub_feat: Vec<f64>,
    pub membership: Vec<bool>,
    pub orig_adj: Vec<bool>,
    pub policy: PolicyKind,
}

impl SubgraphBag {
    #[inline]
    pub fn edge(&self, i: usize, j: usize, k: usize) -> bool {
        self.sub_adj[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn member(&self, i: usize, j: usize) -> bool {
        self.membership[i * self.n + j]
    }

    #[inline]
    pub fn orig_edge(&self, j: usize, k: usize) -> bool {
        self.orig_adj[j * self.n + k]
    }

    pub fn feat(&self, i: usize, j: usize) -> &[f64] {
        let o = (i * self.n + j) * self.d;
        &self.sub_feat[o..o + self.d]
    }

    /// The diagonal action of σ on subgraph and node axes jointly.
    pub fn permute(&self, sigma: &Permutation) -> Result<SubgraphBag, PolicyError> {
        let n = self.n;
        if sigma.len() != n {
            return Err(PolicyError::ShapeMismatch(format!("permutation of size {} on a bag of {n}", sigma.len())));
        }
        let d = self.d;
        let s = |u| sigma.apply(u);
        let mut out = SubgraphBag {
            n,
            d,
            sub_adj: vec![false; n * n * n],
            sub_feat: vec![0.0; n * n * d],
            membership: vec![false; n * n],
            orig_adj: vec![false; n * n],
            policy: self.policy,
        };
        for i in 0..n {
            for j in 0..n {
                let t = s(i) * n + s(j);
                out.membership[t] = self.membership[i * n + j];
                out.orig_adj[t] = self.orig_adj[i * n + j];
                out.sub_feat[t * d..(t + 1) * d].copy_from_slice(self.feat(i, j));
                for k in 0..n {
                    out.sub_adj[t * n + s(k)] = self.edge(i, j, k);
                }
            }
        }
        Ok(out)
    }
}

pub fn bag_apply_permutation(bag: &SubgraphBag, sigma: &Permutation) -> Result<SubgraphBag, PolicyError> {
    bag.permute(sigma)
}

/// Nodes within BFS distance `h` of `v`, ascending.
pub fn ego_ball(g: &Graph, v: usize, h: usize) -> Result<Vec<usize>, PolicyError> {
    let n = g.n();
    if v >= n {
        return Err(PolicyError::InvalidNode { v, n });
    }
    Ok(distances(g, v).into_iter().enumerate().filter(|(_, d)| d.is_some_and(|d| d <= h)).map(|(u, _)| u).collect())
}

fn distances(g: &Graph, v: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.n()];
    dist[v] = Some(0);
    let mut queue = VecDeque::from([v]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap_or(0);
        for w in g.neighbors(u) {
            if dist[w].is_none() {
                dist[w] = Some(du + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

pub fn apply_policy(g: &Graph, kind: PolicyKind) -> Result<SubgraphBag, PolicyError> {
    let n = g.n();
    if kind == PolicyKind::Nd && n < 2 {
        return Err(PolicyError::DegenerateBag(n));
    }
    if kind.ego_depth() == Some(0) {
        return Err(PolicyError::BadPolicy(kind.to_string()));
    }
    let d0 = g.d();
    let d = kind.feature_width(d0);
    let orig_adj = g.adjacency().to_vec();
    let mut sub_adj = vec![false; n * n * n];
    let mut sub_feat = vec![0.0; n * n * d];
    let mut membership = vec![true; n * n];
    for i in 0..n {
        let member: Vec<bool> = match kind.ego_depth() {
            Some(h) => distances(g, i).iter().map(|x| x.is_some_and(|x| x <= h)).collect(),
            None => (0..n).map(|j| !(kind == PolicyKind::Nd && j == i)).collect(),
        };
        for j in 0..n {
            membership[i * n + j] = member[j];
            let o = (i * n + j) * d;
            sub_feat[o..o + d0].copy_from_slice(g.feature_row(j));
            if kind.is_marked() {
                sub_feat[o + d0] = if i == j { 1.0 } else { 0.0 };
            }
            for k in 0..n {
                sub_adj[(i * n + j) * n + k] = member[j] && member[k] && g.has_edge(j, k);
            }
        }
    }
    Ok(SubgraphBag { n, d, sub_adj, sub_feat, membership, orig_adj, policy: kind })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete, cycle, erdos_renyi, path};
    use proptest::prelude::*;

    fn k2_feats() -> Graph {
        Graph::new(2, &[(0, 1)], &[vec![1.0], vec![2.0]]).unwrap()
    }

    #[test]
    fn node_marking_on_k2() {
        let b = apply_policy(&k2_feats(), PolicyKind::Nm).unwrap();
        assert_eq!(b.d, 2);
        assert_eq!(&b.sub_feat[..4], &[1.0, 1.0, 2.0, 0.0]);
        assert_eq!(&b.sub_feat[4..], &[1.0, 0.0, 2.0, 1.0]);
    }

    #[test]
    fn node_deletion_on_k3() {
        let b = apply_policy(&complete(3), PolicyKind::Nd).unwrap();
        let kept: Vec<(usize, usize)> =
            (0..3).flat_map(|j| (j + 1..3).map(move |k| (j, k))).filter(|&(j, k)| b.edge(0, j, k)).collect();
        assert_eq!(kept, vec![(1, 2)]);
        assert!(!b.member(0, 0) && b.member(0, 1));
        assert_eq!(apply_policy(&complete(1), PolicyKind::Nd), Err(PolicyError::DegenerateBag(1)));
    }

    #[test]
    fn one_hop_ego_nets_on_a_path() {
        let b = apply_policy(&path(3), PolicyKind::Ego(1)).unwrap();
        assert_eq!(&b.membership[..3], &[true, true, false]);
        assert!(b.edge(0, 0, 1) && !b.edge(0, 1, 2));
        assert!(b.edge(1, 0, 1) && b.edge(1, 1, 2));
    }

    #[test]
    fn ego_balls_on_c6() {
        let c6 = cycle(6).unwrap();
        assert_eq!(ego_ball(&c6, 0, 1).unwrap(), vec![0, 1, 5]);
        assert_eq!(ego_ball(&c6, 0, 3).unwrap(), (0..6).collect::<Vec<_>>());
        assert_eq!(ego_ball(&c6, 4, 0).unwrap(), vec![4]);
        assert_eq!(ego_ball(&c6, 6, 1), Err(PolicyError::InvalidNode { v: 6, n: 6 }));
    }

    #[test]
    fn null_policy_copies_the_graph() {
        let g = erdos_renyi(5, 0.5, 2).unwrap();
        let b = apply_policy(&g, PolicyKind::Null).unwrap();
        for i in 0..5 {
            assert_eq!(&b.sub_adj[i * 25..(i + 1) * 25], g.adjacency());
        }
        assert!(b.membership.iter().all(|&m| m));
    }

    #[test]
    fn transposition_on_marked_k2() {
        let b = apply_policy(&k2_feats(), PolicyKind::Nm).unwrap();
        let s = Permutation::new(vec![1, 0]).unwrap();
        let p = b.permute(&s).unwrap();
        assert_eq!(p.feat(0, 0), &[2.0, 1.0]);
        assert_eq!(p.feat(0, 1), &[1.0, 0.0]);
        assert_eq!(b.permute(&Permutation::identity(2)).unwrap(), b);
    }

    #[test]
    fn policy_strings() {
        for p in PolicyKind::all_with_depths(&[1, 3]) {
            assert_eq!(p.to_string().parse::<PolicyKind>().unwrap(), p);
            let js = serde_json::to_string(&p).unwrap();
            assert_eq!(serde_json::from_str::<PolicyKind>(&js).unwrap(), p);
        }
        assert_eq!("EGO+:2".parse::<PolicyKind>().unwrap(), PolicyKind::EgoPlus(2));
        assert!("EGO:0".parse::<PolicyKind>().is_err());
        assert!("ego:1".parse::<PolicyKind>().is_err());
    }

    proptest! {
        #[test]
        fn policies_commute_with_permutations(n in 2usize..9, seed in any::<u64>(), depth in 1usize..4) {
            let g = erdos_renyi(n, 0.35, seed).unwrap();
            let mut r = crate::rng::from_seed(seed);
            let feats: Vec<Vec<f64>> = (0..n).map(|_| vec![crate::rng::normal(&mut r)]).collect();
            let g = g.with_features(&feats).unwrap();
            let s = Permutation::random(n, &mut r);
            for kind in PolicyKind::all_with_depths(&[depth]) {
                let lhs = apply_policy(&g.permute(&s).unwrap(), kind).unwrap();
                let rhs = apply_policy(&g, kind).unwrap().permute(&s).unwrap();
                prop_assert_eq!(lhs, rhs);
            }
        }

        #[test]
        fn bag_invariants(n in 2usize..9, seed in any::<u64>(), depth in 1usize..4) {
            let g = erdos_renyi(n, 0.35, seed).unwrap();
            for kind in PolicyKind::all_with_depths(&[depth]) {
                let b = apply_policy(&g, kind).unwrap();
                for i in 0..n {
                    if let Some(h) = kind.ego_depth() {
                        let ball = ego_ball(&g, i, h).unwrap();
                        for j in 0..n {
                            prop_assert_eq!(b.member(i, j), ball.contains(&j));
                        }
                    }
                    for j in 0..n {
                        prop_assert!(!b.edge(i, j, j));
                        if kind.is_marked() {
                            prop_assert_eq!(b.feat(i, j)[b.d - 1], if i == j { 1.0 } else { 0.0 });
                        }
                        for k in 0..n {
                            prop_assert_eq!(b.edge(i, j, k), b.edge(i, k, j));
                            if kind == PolicyKind::Nd && (j == i || k == i) {
                                prop_assert!(!b.edge(i, j, k));
                            }
                        }
                    }
                }
            }
        }
    }
}
