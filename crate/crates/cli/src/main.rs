//! `subgnn`: dataset generation, verification suites, separation runs,
//! training and report merging. Reports are JSON. Exit code 0 means every
//! check passed, 1 means some failed, 2 means a usage or configuration error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use subgnn::graph::Pattern;
use subgnn::harness::{run, Command, HarnessError, PairSource, RunConfig};
use subgnn::layers::ModelConfig;

#[derive(Parser, Debug)]
#[command(name = "subgnn", version, about = "Node-based subgraph GNN experiments")]
struct Cli {
    /// Run seed; every random draw derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Model configuration JSON, for `separate` and `train`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset path for `gen-counting`, report path for the other commands.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tolerance override for `verify`.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Random graphs with substructure counts as regression targets.
    GenCounting {
        #[arg(long, default_value_t = 500)]
        n_graphs: usize,
        #[arg(long, default_value_t = 10)]
        n_min: usize,
        #[arg(long, default_value_t = 16)]
        n_max: usize,
        #[arg(long, default_value_t = 0.3)]
        p: f64,
        /// Comma-separated: triangle, tailed_triangle, star3, cycle4.
        #[arg(long, value_delimiter = ',', default_value = "triangle,cycle4")]
        patterns: Vec<String>,
    },
    /// Run an invariant suite on randomized instances.
    Verify {
        suite: String,
        /// Add a non-equivariant layer to the equivariance suite.
        #[arg(long)]
        inject_fault: bool,
    },
    /// Compare model embeddings of graph pairs against the WL tests.
    Separate {
        /// `c6_vs_2c3`, `rook_vs_shrikhande` or `a.json,b.json`.
        #[arg(required = true)]
        pairs: Vec<String>,
        #[arg(long, default_value_t = 10)]
        n_seeds: usize,
    },
    /// Train on a counting dataset with Adam and an L1 loss.
    Train {
        dataset: PathBuf,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 8)]
        batch: usize,
        #[arg(long)]
        patience: Option<usize>,
        /// Bound on test MAE over trivial MAE, per target or one for all.
        #[arg(long, value_delimiter = ',', default_value = "1.0")]
        max_ratio: Vec<f64>,
    },
    /// Merge reports; passes iff all inputs pass.
    Report {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

fn usage(msg: String) -> HarnessError {
    HarnessError::Config(msg)
}

fn build(cli: Cli) -> Result<RunConfig, HarnessError> {
    let needs_seed = !matches!(cli.cmd, Cmd::Report { .. });
    let seed = match cli.seed {
        Some(s) => s,
        None if needs_seed => return Err(usage("--seed is required".into())),
        None => 0,
    };
    let model = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| HarnessError::IoError(format!("{}: {e}", path.display())))?;
            Some(serde_json::from_str::<ModelConfig>(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let command = match cli.cmd {
        Cmd::GenCounting { n_graphs, n_min, n_max, p, patterns } => {
            let patterns = patterns
                .iter()
                .map(|s| Pattern::parse(s).ok_or_else(|| usage(format!("unknown pattern `{s}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            Command::GenCounting { n_graphs, n_range: (n_min, n_max), p, patterns }
        }
        Cmd::Verify { suite, inject_fault } => Command::Verify { suite, inject_fault },
        Cmd::Separate { pairs, n_seeds } => {
            Command::Separate { pairs: pairs.iter().map(|s| PairSource::parse(s)).collect::<Result<_, _>>()?, n_seeds }
        }
        Cmd::Train { dataset, epochs, lr, batch, patience, max_ratio } => Command::Train { dataset, epochs, lr, batch, patience, max_ratio },
        Cmd::Report { paths } => Command::Report { paths },
    };
    Ok(RunConfig { command, seed, model, tol: cli.tol, out: cli.out })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report_to_out = !matches!(cli.cmd, Cmd::GenCounting { .. });
    let result = build(cli).and_then(|cfg| {
        let report = run(&cfg)?;
        match (&cfg.out, report_to_out) {
            (Some(path), true) => report.write(path)?,
            _ => println!("{}", report.to_json()),
        }
        Ok(report)
    });
    match result {
        Ok(report) => {
            eprint!("{}", report.summary());
            ExitCode::from(if report.passed() { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
