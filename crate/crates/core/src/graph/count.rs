use serde::{Deserialize, Serialize};

use super::Graph;

/// Substructures counted as (not necessarily induced) subgraphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Triangle,
    TailedTriangle,
    Star3,
    Cycle4,
}

impl Pattern {
    pub const ALL: [Pattern; 4] = [Pattern::Triangle, Pattern::TailedTriangle, Pattern::Star3, Pattern::Cycle4];

    /// Nodes in one instance of the pattern.
    pub fn size(self) -> usize {
        match self {
            Pattern::Triangle => 3,
            _ => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Triangle => "triangle",
            Pattern::TailedTriangle => "tailed_triangle",
            Pattern::Star3 => "star3",
            Pattern::Cycle4 => "cycle4",
        }
    }

    pub fn parse(s: &str) -> Option<Pattern> {
        Pattern::ALL.into_iter().find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMode {
    Graph,
    PerNode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Count {
    Graph(u64),
    PerNode(Vec<u64>),
}

/// Exact count by enumerating ordered node tuples. Each instance adds one to
/// every participating node; the graph count is the node sum divided by the
/// pattern size.
pub fn count_substructure(g: &Graph, pattern: Pattern, mode: CountMode) -> Count {
    let per_node = per_node_counts(g, pattern);
    match mode {
        CountMode::PerNode => Count::PerNode(per_node),
        CountMode::Graph => Count::Graph(per_node.iter().sum::<u64>() / pattern.size() as u64),
    }
}

fn per_node_counts(g: &Graph, pattern: Pattern) -> Vec<u64> {
    let n = g.n();
    let e = |u: usize, v: usize| g.has_edge(u, v);
    // Each instance is met once per automorphism of the pattern.
    let (mut hits, automorphisms) = (vec![0u64; n], pattern_automorphisms(pattern));
    for a in 0..n {
        for b in 0..n {
            if b == a || !e(a, b) {
                continue;
            }
            for c in 0..n {
                if c == a || c == b {
                    continue;
                }
                match pattern {
                    Pattern::Triangle => {
                        if e(b, c) && e(c, a) {
                            for v in [a, b, c] {
                                hits[v] += 1;
                            }
                        }
                    }
                    _ => {
                        for d in 0..n {
                            if d == a || d == b || d == c {
                                continue;
                            }
                            let present = match pattern {
                                // triangle a b c with tail a -- d
                                Pattern::TailedTriangle => e(b, c) && e(c, a) && e(a, d),
                                // centre a, leaves b c d
                                Pattern::Star3 => e(a, c) && e(a, d),
                                // a b c d a
                                Pattern::Cycle4 => e(b, c) && e(c, d) && e(d, a),
                                Pattern::Triangle => unreachable!(),
                            };
                            if present {
                                for v in [a, b, c, d] {
                                    hits[v] += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    hits.iter().map(|h| h / automorphisms).collect()
}

fn pattern_automorphisms(p: Pattern) -> u64 {
    match p {
        Pattern::Triangle => 6,
        Pattern::TailedTriangle => 2,
        Pattern::Star3 => 6,
        Pattern::Cycle4 => 8,
    }
}
