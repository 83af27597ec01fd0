//! Sparse operators for every ReIGN(2) term expansion.
//!
//! On-diagonal targets produce `[n, ·]` rows (one per root `i`), off-diagonal
//! targets produce `[n², ·]` rows with the diagonal rows left empty. A term is
//! a chain of operators applied right to left.

use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::autograd::{SparseMat, Tape, Var};

use super::ops::BagOps;
use super::{Aggregation, LayerError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TermId {
    #[serde(rename = "self")]
    SelfTerm,
    #[serde(rename = "transpose")]
    Transpose,
    #[serde(rename = "root_of_subgraph")]
    RootOfSubgraph,
    #[serde(rename = "node_as_root")]
    NodeAsRoot,
    #[serde(rename = "#1.on")]
    On1,
    #[serde(rename = "#2.on")]
    On2,
    #[serde(rename = "#3.on")]
    On3,
    #[serde(rename = "#4.on")]
    On4,
    #[serde(rename = "#1.off")]
    Off1,
    #[serde(rename = "#2.off")]
    Off2,
    #[serde(rename = "#3.off")]
    Off3,
    #[serde(rename = "#4.off")]
    Off4,
    #[serde(rename = "#5.off")]
    Off5,
    #[serde(rename = "#6.off")]
    Off6,
}

impl TermId {
    pub const ON: [TermId; 5] = [TermId::SelfTerm, TermId::On1, TermId::On2, TermId::On3, TermId::On4];
    pub const OFF: [TermId; 10] = [
        TermId::SelfTerm,
        TermId::Transpose,
        TermId::RootOfSubgraph,
        TermId::NodeAsRoot,
        TermId::Off1,
        TermId::Off2,
        TermId::Off3,
        TermId::Off4,
        TermId::Off5,
        TermId::Off6,
    ];

    pub fn is_aggregated(self) -> bool {
        !matches!(self, TermId::SelfTerm | TermId::Transpose | TermId::RootOfSubgraph | TermId::NodeAsRoot)
    }

    pub fn valid_on(self) -> bool {
        matches!(self, TermId::SelfTerm | TermId::On1 | TermId::On2 | TermId::On3 | TermId::On4)
    }

    pub fn valid_off(self) -> bool {
        !matches!(self, TermId::On1 | TermId::On2 | TermId::On3 | TermId::On4)
    }

    pub fn name(self) -> String {
        serde_json::to_value(self).expect("term ids serialize").as_str().expect("string").to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Global,
    LocalSubgraph,
    LocalOriginal,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Global, Variant::LocalSubgraph, Variant::LocalOriginal];
}

/// One linear term of a ReIGN(2) update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReignTerm {
    pub id: TermId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    pub weight: String,
    #[serde(default)]
    pub aggregation: Aggregation,
}

impl ReignTerm {
    pub fn plain(id: TermId, weight: &str) -> ReignTerm {
        ReignTerm { id, variant: None, weight: weight.to_string(), aggregation: Aggregation::Sum }
    }

    pub fn agg(id: TermId, variant: Variant, weight: &str) -> ReignTerm {
        ReignTerm { id, variant: Some(variant), weight: weight.to_string(), aggregation: Aggregation::Sum }
    }

    pub fn validate(&self, on_diagonal: bool) -> Result<(), LayerError> {
        let place = if on_diagonal { "on-diagonal" } else { "off-diagonal" };
        let ok_target = if on_diagonal { self.id.valid_on() } else { self.id.valid_off() };
        if !ok_target {
            return Err(LayerError::BadTerm(format!("{} is not an {place} term", self.id.name())));
        }
        if self.id.is_aggregated() != self.variant.is_some() {
            return Err(LayerError::BadTerm(format!("{}: variant must be given exactly for aggregated terms", self.id.name())));
        }
        if !self.id.is_aggregated() && self.aggregation == Aggregation::Mean {
            return Err(LayerError::BadTerm(format!("{}: mean needs an aggregated term", self.id.name())));
        }
        Ok(())
    }
}

type Chain = Vec<Rc<SparseMat>>;

fn mat(rows: usize, cols: usize, e: Vec<(usize, usize, f64)>) -> Rc<SparseMat> {
    Rc::new(SparseMat::from_triplets(rows, cols, &e).expect("term operator in range"))
}

/// `(target row, source column)` pairs for a single sum.
fn single(rows: usize, cols: usize, pairs: impl Iterator<Item = (usize, usize)>) -> Chain {
    vec![mat(rows, cols, pairs.map(|(r, c)| (r, c, 1.0)).collect())]
}

/// Operator chain of an on-diagonal (`on = true`) or off-diagonal term.
pub fn term_chain(ops: &BagOps, on: bool, id: TermId, variant: Option<Variant>) -> Result<Chain, LayerError> {
    let n = ops.n;
    let nn = n * n;
    let at = |k: usize, i: usize| k * n + i;
    let all = || 0..n;
    // neighbourhood of `i` under a variant, `k` being the subgraph used by local_subgraph
    let nb = |v: Variant, k: usize, i: usize, j: usize| match v {
        Variant::Global => true,
        Variant::LocalSubgraph => ops.sub_edge(k, i, j),
        Variant::LocalOriginal => ops.orig_edge(i, j),
    };
    let offs = || (0..n).flat_map(move |k| (0..n).filter(move |&i| i != k).map(move |i| (k, i)));
    let v = variant.unwrap_or(Variant::Global);
    let g = v == Variant::Global;
    let chain = match (on, id) {
        (true, TermId::SelfTerm) => vec![ops.diag.clone()],
        (true, TermId::On1) => single(n, nn, all().flat_map(|i| all().filter(move |&j| nb(v, i, i, j)).map(move |j| (i, at(j, j))))),
        (true, TermId::On2) => single(
            n,
            nn,
            all().flat_map(|i| all().filter(move |&j| if g { j != i } else { nb(v, i, i, j) }).map(move |j| (i, at(i, j)))),
        ),
        (true, TermId::On3) => single(
            n,
            nn,
            all().flat_map(|i| all().filter(move |&h| if g { h != i } else { nb(v, i, i, h) }).map(move |h| (i, at(h, i)))),
        ),
        (true, TermId::On4) if g => single(
            n,
            nn,
            all().flat_map(|i| all().flat_map(move |h| all().filter(move |&j| j != h).map(move |j| (i, at(h, j))))),
        ),
        (true, TermId::On4) => {
            // inner: per h, sum of h's neighbours inside subgraph h (or in the graph)
            let inner = single(n, nn, all().flat_map(|h| all().filter(move |&j| nb(v, h, h, j)).map(move |j| (h, at(h, j)))));
            let outer = single(n, n, all().flat_map(|i| all().filter(move |&h| nb(v, i, i, h)).map(move |h| (i, h))));
            vec![outer[0].clone(), inner[0].clone()]
        }
        (false, TermId::SelfTerm) => single(nn, nn, offs().map(|(k, i)| (at(k, i), at(k, i)))),
        (false, TermId::Transpose) => single(nn, nn, offs().map(|(k, i)| (at(k, i), at(i, k)))),
        (false, TermId::RootOfSubgraph) => single(nn, nn, offs().map(|(k, i)| (at(k, i), at(k, k)))),
        (false, TermId::NodeAsRoot) => single(nn, nn, offs().map(|(k, i)| (at(k, i), at(i, i)))),
        (false, TermId::Off1) if g => {
            let pool = single(1, nn, all().flat_map(|h| all().filter(move |&j| j != h).map(move |j| (0, at(h, j)))));
            let spread = single(nn, 1, offs().map(|(k, i)| (at(k, i), 0)));
            vec![spread[0].clone(), pool[0].clone()]
        }
        (false, TermId::Off1) => {
            // inner (h, i) <- (h, j), j adjacent to i in subgraph h (or in the graph)
            let inner = single(
                nn,
                nn,
                all().flat_map(|h| all().flat_map(move |i| all().filter(move |&j| nb(v, h, i, j)).map(move |j| (at(h, i), at(h, j))))),
            );
            let outer = single(nn, nn, offs().flat_map(|(k, i)| all().filter(move |&h| nb(v, k, i, h)).map(move |h| (at(k, i), at(h, i)))));
            vec![outer[0].clone(), inner[0].clone()]
        }
        (false, TermId::Off2) => single(
            nn,
            nn,
            offs().flat_map(|(k, i)| all().filter(move |&h| if g { h != i } else { nb(v, k, i, h) }).map(move |h| (at(k, i), at(h, i)))),
        ),
        (false, TermId::Off3) => single(
            nn,
            nn,
            offs().flat_map(|(k, i)| all().filter(move |&j| if g { j != k } else { nb(v, k, i, j) }).map(move |j| (at(k, i), at(k, j)))),
        ),
        (false, TermId::Off4) => single(
            nn,
            nn,
            offs().flat_map(|(k, i)| all().filter(move |&h| if g { h != i } else { nb(v, k, i, h) }).map(move |h| (at(k, i), at(i, h)))),
        ),
        (false, TermId::Off5) => single(
            nn,
            nn,
            offs().flat_map(|(k, i)| all().filter(move |&h| if g { h != k } else { nb(v, k, i, h) }).map(move |h| (at(k, i), at(h, k)))),
        ),
        (false, TermId::Off6) => single(nn, nn, offs().flat_map(|(k, i)| all().filter(move |&j| nb(v, k, i, j)).map(move |j| (at(k, i), at(j, j))))),
        (on, id) => {
            let place = if on { "on-diagonal" } else { "off-diagonal" };
            return Err(LayerError::BadTerm(format!("{} is not an {place} term", id.name())));
        }
    };
    Ok(chain)
}

/// Prepends a row scaling by `1/count`, `count` being the number of summands
/// reaching each target row; empty rows stay zero.
pub fn mean_of(chain: Chain) -> Chain {
    let cols = chain.last().map_or(0, |m| m.cols);
    let mut counts = vec![1.0; cols];
    for m in chain.iter().rev() {
        counts = m.apply(&counts, 1);
    }
    let rows = counts.len();
    let scale = mat(rows, rows, counts.iter().enumerate().filter(|(_, c)| **c > 0.0).map(|(r, c)| (r, r, 1.0 / c)).collect());
    let mut out = vec![scale];
    out.extend(chain);
    out
}

pub fn apply_chain(t: &mut Tape, chain: &Chain, x: Var) -> Result<Var, LayerError> {
    let mut y = x;
    for m in chain.iter().rev() {
        y = t.spmm(m, y)?;
    }
    Ok(y)
}
