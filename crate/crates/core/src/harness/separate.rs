use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::graph::{cycle, disjoint_union, read_graph_json, rook_4x4, shrikhande, Graph, Permutation};
use crate::layers::{forward_tape, prepare, Aggregation, LayerKind, LayerSpec, ModelConfig, PoolingSpec};
use crate::autograd::Tape;
use crate::policy::PolicyKind;
use crate::rng;
use crate::wl::{fwl2_distinguish, wl1_distinguish};

use super::{HarnessError, Report, Result};

/// L∞ distance above which a weight draw separates a pair.
pub const SEP_THRESHOLD: f64 = 1e-3;
/// L∞ distance at or below which a weight draw identifies a pair.
pub const EQ_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PairSource {
    /// The 6-cycle against two disjoint triangles.
    HexagonVsTriangles,
    /// The 4x4 rook graph against the Shrikhande graph.
    RookVsShrikhande,
    /// Two graph JSON files.
    Files(PathBuf, PathBuf),
}

impl PairSource {
    /// `c6_vs_2c3`, `rook_vs_shrikhande`, or `a.json,b.json`.
    pub fn parse(s: &str) -> Result<PairSource> {
        match s {
            "c6_vs_2c3" => Ok(PairSource::HexagonVsTriangles),
            "rook_vs_shrikhande" => Ok(PairSource::RookVsShrikhande),
            _ => match s.split_once(',') {
                Some((a, b)) => Ok(PairSource::Files(a.into(), b.into())),
                None => Err(HarnessError::Config(format!("unknown pair `{s}`; expected a built-in name or two comma-separated files"))),
            },
        }
    }

    pub fn graphs(&self) -> Result<(Graph, Graph)> {
        Ok(match self {
            PairSource::HexagonVsTriangles => (cycle(6)?, disjoint_union(&cycle(3)?, &cycle(3)?)?),
            PairSource::RookVsShrikhande => (rook_4x4(), shrikhande()),
            PairSource::Files(a, b) => (read_graph_json(a)?, read_graph_json(b)?),
        })
    }

    /// What a node-based subgraph network should report, when known.
    pub fn expected(&self) -> Option<Verdict> {
        match self {
            PairSource::HexagonVsTriangles => Some(Verdict::Separated),
            PairSource::RookVsShrikhande => Some(Verdict::Collapsed),
            PairSource::Files(..) => None,
        }
    }
}

impl PairSource {
    /// Identifiers of the two graphs.
    pub fn ids(&self) -> [String; 2] {
        match self {
            PairSource::HexagonVsTriangles => ["c6".into(), "2c3".into()],
            PairSource::RookVsShrikhande => ["rook_4x4".into(), "shrikhande".into()],
            PairSource::Files(a, b) => [a.display().to_string(), b.display().to_string()],
        }
    }
}

impl fmt::Display for PairSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairSource::HexagonVsTriangles => f.write_str("c6_vs_2c3"),
            PairSource::RookVsShrikhande => f.write_str("rook_vs_shrikhande"),
            PairSource::Files(a, b) => write!(f, "{},{}", a.display(), b.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Separated,
    Collapsed,
    Inconclusive,
}

impl Verdict {
    /// Majority above [`SEP_THRESHOLD`] separates; all at or below
    /// [`EQ_THRESHOLD`] collapses.
    pub fn classify(distances: &[f64]) -> Verdict {
        let above = distances.iter().filter(|&&d| d > SEP_THRESHOLD).count();
        if 2 * above > distances.len() {
            Verdict::Separated
        } else if !distances.is_empty() && distances.iter().all(|&d| d <= EQ_THRESHOLD) {
            Verdict::Collapsed
        } else {
            Verdict::Inconclusive
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparateSpec {
    pub model: ModelConfig,
    pub n_seeds: usize,
    pub seed: u64,
}

/// A SUN stack on unlabelled graphs pooled over roots, no head.
pub fn sun_config(policy: PolicyKind, depth: usize, width: usize, expressive: bool) -> ModelConfig {
    let kind = if expressive { LayerKind::SunExpressive } else { LayerKind::SunLinear };
    let mut d = policy.feature_width(1);
    let layers = (0..depth)
        .map(|_| {
            let l = LayerSpec { vertical: Aggregation::Sum, ..LayerSpec::new(kind, d, width) };
            d = width;
            l
        })
        .collect();
    ModelConfig { policy, d_in: 1, layers, pooling: PoolingSpec::root_pool(Vec::new()) }
}

fn weight_seed(seed: u64, draw: usize) -> u64 {
    rng::child(seed, rng::WEIGHTS, draw as u64).random::<u64>()
}

/// Embedding distance of `a` and `b` for every weight draw.
pub fn separate(model: &ModelConfig, a: &Graph, b: &Graph, n_seeds: usize, seed: u64) -> Result<Vec<f64>> {
    let (pa, pb) = (prepare(model, a)?, prepare(model, b)?);
    (0..n_seeds)
        .map(|s| {
            let params = model.init_params(weight_seed(seed, s))?;
            let mut emb = Vec::new();
            for p in [&pa, &pb] {
                let mut t = Tape::new();
                let y = forward_tape(&mut t, model, &params, p)?;
                emb.push(t.value(y).data.clone());
            }
            Ok(emb[0].iter().zip(&emb[1]).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs())))
        })
        .collect()
}

pub fn cmd_separate(pairs: &[PairSource], spec: &SeparateSpec) -> Result<Report> {
    let started = Instant::now();
    let mut cmd = vec!["separate".to_string()];
    cmd.extend(pairs.iter().map(|p| p.to_string()));
    cmd.push(format!("--policy={}", spec.model.policy));
    cmd.push(format!("--n-seeds={}", spec.n_seeds));
    cmd.push(format!("--seed={}", spec.seed));
    let mut report = Report::new(cmd);
    let mut rows = Vec::new();
    for pair in pairs {
        let (a, b) = pair.graphs()?;
        let size_mismatch = a.n() != b.n();
        let (wl1, fwl2) = (wl1_distinguish(&a, &b), fwl2_distinguish(&a, &b));
        let dist = separate(&spec.model, &a, &b, spec.n_seeds, spec.seed)?;
        let verdict = Verdict::classify(&dist);
        let max = dist.iter().fold(0.0, |m: f64, &d| m.max(d));
        let min = dist.iter().fold(f64::INFINITY, |m: f64, &d| m.min(d));
        // 2-FWL bounds the model from above, 1-WL from below.
        let bracket = (fwl2 || verdict == Verdict::Collapsed) && (!wl1 || verdict == Verdict::Separated);
        report.push(format!("{pair}.wl_bracket"), bracket, max, EQ_THRESHOLD);
        match pair.expected() {
            Some(Verdict::Separated) => report.push(format!("{pair}.verdict"), verdict == Verdict::Separated, min, SEP_THRESHOLD),
            Some(_) => report.push(format!("{pair}.verdict"), verdict == Verdict::Collapsed, max, EQ_THRESHOLD),
            None => {}
        }
        let mut r = rng::child(spec.seed, rng::PERMUTATIONS, rows.len() as u64);
        let relabelled = a.permute(&Permutation::random(a.n(), &mut r))?;
        let own = separate(&spec.model, &a, &relabelled, spec.n_seeds, spec.seed)?;
        let own_max = own.iter().fold(0.0, |m: f64, &d| m.max(d));
        report.push(format!("{pair}.relabelled_copy"), Verdict::classify(&own) == Verdict::Collapsed, own_max, EQ_THRESHOLD);
        rows.push(json!({
            "pair": pair.ids(),
            "size_mismatch": size_mismatch,
            "wl1": wl1,
            "fwl2": fwl2,
            "distances": dist,
            "verdict": verdict,
        }));
    }
    report.data = json!({ "model": spec.model, "pairs": rows });
    report.stamp(started);
    Ok(report)
}
