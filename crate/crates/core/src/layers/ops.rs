//! Constant sparse operators describing one bag, shared by every layer.
//!
//! Bag representations are `[n*n, d]` tensors, row `k*n + i` holding node
//! `i` in subgraph `k`; the diagonal rows are the roots.

use std::rc::Rc;

use crate::autograd::{SparseMat, Tensor};
use crate::graph::Graph;
use crate::policy::{PolicyKind, SubgraphBag};

use super::LayerError;

pub struct BagOps {
    pub n: usize,
    pub policy: PolicyKind,
    sub: Vec<bool>,
    orig: Vec<bool>,
    pub membership: Vec<bool>,
    /// `[n, n²]`: `i <- (i, i)`.
    pub diag: Rc<SparseMat>,
    /// `[n², n]`: `(i, i) <- i`, off-diagonal rows empty.
    pub embed_diag: Rc<SparseMat>,
    /// `[n², n²]`: identity on off-diagonal rows.
    pub off_select: Rc<SparseMat>,
    /// `[n², n]`: `(k, i) <- i`.
    pub by_node: Rc<SparseMat>,
    /// `[n², n]`: `(k, i) <- k`.
    pub by_sub: Rc<SparseMat>,
    /// `[n², n²]`: `(k, i) <- (k, j)` for `j ~_k i`.
    pub sub_adj: Rc<SparseMat>,
    /// `[n, n²]`: `k <- (k, j)` for all `j`.
    pub readout: Rc<SparseMat>,
    /// `[n, n²]`: `k <- (k, j)` for members `j` of subgraph `k`.
    pub member_readout: Rc<SparseMat>,
    /// `[n, n²]`: `i <- (h, i)` for all `h`.
    pub vertical: Rc<SparseMat>,
    /// `[n, n²]`: `i <- (h, i)` for subgraphs `h` containing `i`.
    pub member_vertical: Rc<SparseMat>,
    /// `[n, n]`: `i <- j` for `j ~ i` in the original graph.
    pub orig_adj: Rc<SparseMat>,
    /// `[n², n²]`: `(k, i) <- (k, j)` for `j ~_k i`, `j != k`.
    pub sub_adj_no_root: Rc<SparseMat>,
    /// `[n², n²]`: `(k, i) <- (k, k)` when `k ~_k i`.
    pub root_msg: Rc<SparseMat>,
}

fn rc(s: Result<SparseMat, crate::autograd::AutogradError>) -> Rc<SparseMat> {
    Rc::new(s.expect("bag operators are in range"))
}

impl BagOps {
    pub fn new(bag: &SubgraphBag) -> BagOps {
        let n = bag.n;
        let nn = n * n;
        let sub = bag.sub_adj.clone();
        let orig = bag.orig_adj.clone();
        let e = |k: usize, i: usize, j: usize| sub[(k * n + i) * n + j];
        let diag = rc(SparseMat::gather(nn, &(0..n).map(|i| i * n + i).collect::<Vec<_>>()));
        let embed_diag = rc(SparseMat::from_triplets(nn, n, &(0..n).map(|i| (i * n + i, i, 1.0)).collect::<Vec<_>>()));
        let off: Vec<(usize, usize, f64)> =
            (0..nn).filter(|r| r / n != r % n).map(|r| (r, r, 1.0)).collect();
        let off_select = rc(SparseMat::from_triplets(nn, nn, &off));
        let by_node = rc(SparseMat::gather(n, &(0..nn).map(|r| r % n).collect::<Vec<_>>()));
        let by_sub = rc(SparseMat::gather(n, &(0..nn).map(|r| r / n).collect::<Vec<_>>()));
        let mut adj = Vec::new();
        let mut read = Vec::new();
        let mut member = Vec::new();
        let mut vert = Vec::new();
        let mut member_vert = Vec::new();
        let mut no_root = Vec::new();
        let mut root_msg = Vec::new();
        let mut o = Vec::new();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if e(k, i, j) {
                        adj.push((k * n + i, k * n + j, 1.0));
                        if j != k {
                            no_root.push((k * n + i, k * n + j, 1.0));
                        }
                    }
                }
                read.push((k, k * n + i, 1.0));
                if bag.membership[k * n + i] {
                    member.push((k, k * n + i, 1.0));
                }
                vert.push((i, k * n + i, 1.0));
                if bag.membership[k * n + i] {
                    member_vert.push((i, k * n + i, 1.0));
                }
                if e(k, k, i) {
                    root_msg.push((k * n + i, k * n + k, 1.0));
                }
                if orig[k * n + i] {
                    o.push((k, i, 1.0));
                }
            }
        }
        BagOps {
            n,
            policy: bag.policy,
            membership: bag.membership.clone(),
            diag,
            embed_diag,
            off_select,
            by_node,
            by_sub,
            sub_adj: rc(SparseMat::from_triplets(nn, nn, &adj)),
            readout: rc(SparseMat::from_triplets(n, nn, &read)),
            member_readout: rc(SparseMat::from_triplets(n, nn, &member)),
            vertical: rc(SparseMat::from_triplets(n, nn, &vert)),
            member_vertical: rc(SparseMat::from_triplets(n, nn, &member_vert)),
            orig_adj: rc(SparseMat::from_triplets(n, n, &o)),
            sub_adj_no_root: rc(SparseMat::from_triplets(nn, nn, &no_root)),
            root_msg: rc(SparseMat::from_triplets(nn, nn, &root_msg)),
            sub,
            orig,
        }
    }

    /// Operators for a bare `n x n` grid with no connectivity, as used by
    /// layers that only pool globally.
    pub fn grid(n: usize) -> BagOps {
        BagOps::new(&SubgraphBag {
            n,
            d: 0,
            sub_adj: vec![false; n * n * n],
            sub_feat: Vec::new(),
            membership: vec![true; n * n],
            orig_adj: vec![false; n * n],
            policy: PolicyKind::Null,
        })
    }

    /// Edge `i -- j` in subgraph `k`.
    pub fn sub_edge(&self, k: usize, i: usize, j: usize) -> bool {
        self.sub[(k * self.n + i) * self.n + j]
    }

    pub fn orig_edge(&self, i: usize, j: usize) -> bool {
        self.orig[i * self.n + j]
    }

    pub fn is_ego(&self) -> bool {
        self.policy.ego_depth().is_some()
    }
}

/// Initial bag representation `[n*n, d]`.
pub fn bag_tensor(bag: &SubgraphBag) -> Tensor {
    Tensor { shape: vec![bag.n * bag.n, bag.d], data: bag.sub_feat.clone() }
}

/// The bag with its features replaced by `x`.
pub fn with_features(bag: &SubgraphBag, x: &Tensor) -> Result<SubgraphBag, LayerError> {
    if x.shape.len() != 2 || x.shape[0] != bag.n * bag.n {
        return Err(LayerError::ShapeMismatch(format!("features {:?} for a bag on {} nodes", x.shape, bag.n)));
    }
    Ok(SubgraphBag { d: x.shape[1], sub_feat: x.data.clone(), ..bag.clone() })
}

/// Node features `[n, d]` of a graph.
pub fn node_tensor(g: &Graph) -> Tensor {
    Tensor { shape: vec![g.n(), g.d()], data: g.features().to_vec() }
}
