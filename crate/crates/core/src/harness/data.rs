use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{count_substructure, erdos_renyi, write_dataset, Count, CountMode, Pattern, Sample};
use crate::rng;

use super::{io_err, HarnessError, Report, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CountingSpec {
    pub n_graphs: usize,
    /// Inclusive node-count range.
    pub n_range: (usize, usize),
    pub p: f64,
    pub patterns: Vec<Pattern>,
    pub seed: u64,
}

/// Sizes of the index-ordered train/val/test split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Split {
    /// 80/10/10 by index.
    pub fn standard(n: usize) -> Split {
        let train = n * 8 / 10;
        let val = n * 9 / 10 - train;
        Split { train, val, test: n - train - val }
    }

    pub fn train_range(&self) -> Range<usize> {
        0..self.train
    }

    pub fn val_range(&self) -> Range<usize> {
        self.train..self.train + self.val
    }

    pub fn test_range(&self) -> Range<usize> {
        self.train + self.val..self.train + self.val + self.test
    }
}

/// Sidecar describing how the targets were scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub patterns: Vec<String>,
    /// Raw target = stored target * std.
    pub std: Vec<f64>,
    pub split: Split,
}

impl Normalizer {
    pub fn read(path: &Path) -> Result<Normalizer> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::IoError(format!("{}: {e}", path.display())))
    }
}

/// `data.jsonl` → `data.jsonl.norm.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".norm.json");
    PathBuf::from(s)
}

fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Random graphs with brute-force counts, scaled by the training-split
/// standard deviation of each pattern (a constant target keeps scale 1).
pub fn gen_counting(spec: &CountingSpec) -> Result<(Vec<Sample>, Normalizer)> {
    let (lo, hi) = spec.n_range;
    if lo > hi || lo == 0 {
        return Err(HarnessError::Config(format!("bad node range [{lo}, {hi}]")));
    }
    if spec.patterns.is_empty() {
        return Err(HarnessError::Config("no patterns requested".into()));
    }
    let mut samples = Vec::with_capacity(spec.n_graphs);
    for i in 0..spec.n_graphs {
        let mut r = rng::child(spec.seed, rng::DATA, i as u64);
        let n = rng::range(&mut r, lo, hi);
        let g = erdos_renyi(n, spec.p, r.random::<u64>())?;
        let y = spec
            .patterns
            .iter()
            .map(|&pat| match count_substructure(&g, pat, CountMode::Graph) {
                Count::Graph(c) => c as f64,
                Count::PerNode(_) => unreachable!("graph-level mode"),
            })
            .collect();
        samples.push(Sample { graph: g, y });
    }
    let split = Split::standard(spec.n_graphs);
    let std: Vec<f64> = (0..spec.patterns.len())
        .map(|k| {
            let col: Vec<f64> = samples[split.train_range()].iter().map(|s| s.y[k]).collect();
            let sd = population_std(&col);
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    for s in &mut samples {
        for (y, sd) in s.y.iter_mut().zip(&std) {
            *y /= sd;
        }
    }
    let norm = Normalizer { patterns: spec.patterns.iter().map(|p| p.name().to_string()).collect(), std, split };
    Ok((samples, norm))
}

/// Writes the JSONL dataset to `out` and the normaliser next to it.
pub fn cmd_gen_counting(spec: &CountingSpec, out: &Path) -> Result<Report> {
    let started = Instant::now();
    let names: Vec<&str> = spec.patterns.iter().map(|p| p.name()).collect();
    let mut report = Report::new(vec![
        "gen-counting".into(),
        format!("--n-graphs={}", spec.n_graphs),
        format!("--n-min={}", spec.n_range.0),
        format!("--n-max={}", spec.n_range.1),
        format!("--p={}", spec.p),
        format!("--patterns={}", names.join(",")),
        format!("--seed={}", spec.seed),
    ]);
    let (samples, norm) = gen_counting(spec)?;
    write_dataset(out, &samples).map_err(|e| io_err(out, e))?;
    let side = sidecar_path(out);
    fs::write(&side, serde_json::to_string_pretty(&norm).expect("plain data") + "\n").map_err(|e| io_err(&side, e))?;
    report.push("graphs_written", samples.len() == spec.n_graphs, samples.len() as f64, spec.n_graphs as f64);
    for (name, sd) in names.iter().zip(&norm.std) {
        report.push(format!("train_std.{name}"), sd.is_finite() && *sd > 0.0, *sd, 0.0);
    }
    report.data = serde_json::to_value(&norm).expect("plain data");
    report.stamp(started);
    Ok(report)
}
