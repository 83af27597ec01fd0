use std::path::PathBuf;

use crate::graph::read_dataset;
use crate::layers::{Aggregation, LayerKind, LayerSpec, ModelConfig, PoolingSpec};
use crate::policy::PolicyKind;

use super::{
    cmd_gen_counting, cmd_report, cmd_separate, cmd_train, cmd_verify, io_err, sun_config, CountingSpec, HarnessError, PairSource, Report, Result,
    SeparateSpec, TrainSpec, VerifyOptions,
};

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    GenCounting { n_graphs: usize, n_range: (usize, usize), p: f64, patterns: Vec<crate::graph::Pattern> },
    Verify { suite: String, inject_fault: bool },
    Separate { pairs: Vec<PairSource>, n_seeds: usize },
    Train { dataset: PathBuf, epochs: usize, lr: f64, batch: usize, patience: Option<usize>, max_ratio: Vec<f64> },
    Report { paths: Vec<PathBuf> },
}

/// Everything one invocation needs. Every random draw derives from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    /// Model for `separate` and `train`; each has a default.
    pub model: Option<ModelConfig>,
    pub tol: Option<f64>,
    /// Dataset path for `gen-counting`; report path otherwise (the training
    /// checkpoint is written next to it).
    pub out: Option<PathBuf>,
}

/// Expressive SUN on the marked 2-hop ego policy with a two-layer head,
/// the default counting model.
pub fn counting_model(targets: usize) -> ModelConfig {
    let policy = PolicyKind::EgoPlus(2);
    let width = 32;
    let mut d = policy.feature_width(1);
    let layers = (0..3)
        .map(|_| {
            let l = LayerSpec { vertical: Aggregation::Mean, ..LayerSpec::new(LayerKind::SunExpressive, d, width) };
            d = width;
            l
        })
        .collect();
    ModelConfig { policy, d_in: 1, layers, pooling: PoolingSpec::root_pool(vec![width, targets]) }
}

pub fn run(cfg: &RunConfig) -> Result<Report> {
    match &cfg.command {
        Command::GenCounting { n_graphs, n_range, p, patterns } => {
            let out = cfg.out.as_ref().ok_or_else(|| HarnessError::Config("gen-counting needs --out".into()))?;
            let spec = CountingSpec { n_graphs: *n_graphs, n_range: *n_range, p: *p, patterns: patterns.clone(), seed: cfg.seed };
            cmd_gen_counting(&spec, out)
        }
        Command::Verify { suite, inject_fault } => {
            cmd_verify(suite, &VerifyOptions { seed: cfg.seed, tol: cfg.tol, inject_fault: *inject_fault })
        }
        Command::Separate { pairs, n_seeds } => {
            let model = cfg.model.clone().unwrap_or_else(|| sun_config(PolicyKind::Nm, 3, 16, true));
            model.param_shapes()?;
            cmd_separate(pairs, &SeparateSpec { model, n_seeds: *n_seeds, seed: cfg.seed })
        }
        Command::Train { dataset, epochs, lr, batch, patience, max_ratio } => {
            let model = match &cfg.model {
                Some(m) => m.clone(),
                None => {
                    let targets = read_dataset(dataset).map_err(|e| io_err(dataset, e))?.first().map_or(1, |s| s.y.len());
                    counting_model(targets)
                }
            };
            let spec = TrainSpec {
                model,
                epochs: *epochs,
                lr: *lr,
                batch: *batch,
                seed: cfg.seed,
                patience: *patience,
                max_ratio: max_ratio.clone(),
                branch_gain: 0.25,
                head_gain: 0.0,
            };
            cmd_train(dataset, &spec, cfg.out.as_deref())
        }
        Command::Report { paths } => cmd_report(&paths.iter().map(|p| p.as_path()).collect::<Vec<_>>()),
    }
}
