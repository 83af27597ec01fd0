//! Weisfeiler-Leman colour refinement on nodes (1-WL) and the folklore
//! variant on node pairs (2-FWL, as strong as 3-WL).
//!
//! Colours are dense ids handed out by an exact signature dictionary, so two
//! elements share a colour iff their signatures are equal. Comparing two
//! graphs refines both in lock step through one dictionary per round, which
//! keeps their colours comparable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Nodes,
    NodePairs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coloring {
    pub domain: Domain,
    /// One colour per node, or per ordered pair `u*n + v`.
    pub colors: Vec<usize>,
    pub rounds: usize,
    pub stable: bool,
}

impl Coloring {
    pub fn num_classes(&self) -> usize {
        let mut c = self.colors.clone();
        c.sort_unstable();
        c.dedup();
        c.len()
    }

    /// Sorted `(colour, count)` pairs.
    pub fn histogram(&self) -> Vec<(usize, usize)> {
        let mut h: BTreeMap<usize, usize> = BTreeMap::new();
        for &c in &self.colors {
            *h.entry(c).or_default() += 1;
        }
        h.into_iter().collect()
    }
}

/// Replaces every signature with its rank among the distinct signatures.
fn compress<S: Ord + Clone>(sigs: &[Vec<S>]) -> Vec<Vec<usize>> {
    let mut dict: BTreeMap<S, usize> = BTreeMap::new();
    for s in sigs.iter().flatten() {
        dict.entry(s.clone()).or_insert(0);
    }
    for (id, v) in dict.values_mut().enumerate() {
        *v = id;
    }
    sigs.iter().map(|g| g.iter().map(|s| dict[s]).collect()).collect()
}

fn classes(colors: &[Vec<usize>]) -> usize {
    let mut all: Vec<usize> = colors.iter().flatten().copied().collect();
    all.sort_unstable();
    all.dedup();
    all.len()
}

fn feature_key(g: &Graph, v: usize) -> Vec<u64> {
    g.feature_row(v).iter().map(|x| x.to_bits()).collect()
}

/// Joint refinement until the partition over all graphs stops splitting.
fn refine<S, F>(mut colors: Vec<Vec<usize>>, max_rounds: usize, step: F) -> (Vec<Vec<usize>>, usize, bool)
where
    S: Ord + Clone,
    F: Fn(usize, &[usize]) -> Vec<S>,
{
    let mut count = classes(&colors);
    for round in 1..=max_rounds {
        let sigs: Vec<Vec<S>> = colors.iter().enumerate().map(|(g, c)| step(g, c)).collect();
        let next = compress(&sigs);
        let next_count = classes(&next);
        if next_count == count {
            return (colors, round - 1, true);
        }
        colors = next;
        count = next_count;
    }
    (colors, max_rounds, false)
}

fn wl1_joint(graphs: &[&Graph]) -> Vec<Coloring> {
    let init: Vec<Vec<Vec<u64>>> = graphs.iter().map(|g| (0..g.n()).map(|v| feature_key(g, v)).collect()).collect();
    let colors = compress(&init);
    let max_rounds = graphs.iter().map(|g| g.n()).max().unwrap_or(0) + 1;
    let (colors, rounds, stable) = refine(colors, max_rounds, |gi, c| {
        let g = graphs[gi];
        (0..g.n())
            .map(|v| {
                let mut nb: Vec<usize> = g.neighbors(v).map(|w| c[w]).collect();
                nb.sort_unstable();
                (c[v], nb)
            })
            .collect()
    });
    colors.into_iter().map(|colors| Coloring { domain: Domain::Nodes, colors, rounds, stable }).collect()
}

/// Initial pair colour: adjacent, equal, and both endpoint features.
type PairKey = (bool, bool, Vec<u64>, Vec<u64>);

fn fwl2_joint(graphs: &[&Graph]) -> Vec<Coloring> {
    let init: Vec<Vec<PairKey>> = graphs
        .iter()
        .map(|g| {
            let n = g.n();
            (0..n * n).map(|p| (g.has_edge(p / n, p % n), p / n == p % n, feature_key(g, p / n), feature_key(g, p % n))).collect()
        })
        .collect();
    let colors = compress(&init);
    let max_rounds = graphs.iter().map(|g| g.n() * g.n()).max().unwrap_or(0) + 1;
    let (colors, rounds, stable) = refine(colors, max_rounds, |gi, c| {
        let n = graphs[gi].n();
        (0..n * n)
            .map(|p| {
                let (u, v) = (p / n, p % n);
                let mut m: Vec<(usize, usize)> = (0..n).map(|w| (c[u * n + w], c[w * n + v])).collect();
                m.sort_unstable();
                (c[p], m)
            })
            .collect()
    });
    colors.into_iter().map(|colors| Coloring { domain: Domain::NodePairs, colors, rounds, stable }).collect()
}

pub fn wl1_stable_coloring(g: &Graph) -> Coloring {
    wl1_joint(&[g]).remove(0)
}

pub fn fwl2_stable_coloring(g: &Graph) -> Coloring {
    fwl2_joint(&[g]).remove(0)
}

fn differ(c: &[Coloring]) -> bool {
    c[0].histogram() != c[1].histogram()
}

/// True iff 1-WL tells the graphs apart.
pub fn wl1_distinguish(a: &Graph, b: &Graph) -> bool {
    a.n() != b.n() || differ(&wl1_joint(&[a, b]))
}

/// True iff 2-FWL tells the graphs apart.
pub fn fwl2_distinguish(a: &Graph, b: &Graph) -> bool {
    a.n() != b.n() || differ(&fwl2_joint(&[a, b]))
}
