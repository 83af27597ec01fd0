//! Experiment plumbing behind the command-line tool: dataset generation,
//! verification suites, separation runs, training and report merging.
//!
//! Every command returns a [`Report`]. A report passes iff all of its records
//! pass, and its payload (everything except the wall clock) is a pure
//! function of the command arguments and seed.

mod data;
mod report;
mod run;
mod separate;
mod train;
mod verify;

use thiserror::Error;

pub use data::{cmd_gen_counting, gen_counting, sidecar_path, CountingSpec, Normalizer, Split};
pub use report::{cmd_report, Record, Report, Status};
pub use run::{counting_model, run, Command, RunConfig};
pub use separate::{cmd_separate, separate, sun_config, PairSource, SeparateSpec, Verdict, EQ_THRESHOLD, SEP_THRESHOLD};
pub use train::{checkpoint_path, cmd_train, train, trivial_mae, EpochLog, TrainOutcome, TrainSpec};
pub use verify::{cmd_verify, run_suite, Suite, VerifyOptions};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io error: {0}")]
    IoError(String),
    #[error("unknown verification suite `{0}`")]
    UnknownSuite(String),
    #[error("no reports to merge")]
    NoInput,
    #[error("loss diverged at epoch {epoch}")]
    DivergenceDetected { epoch: usize },
    #[error("bad configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Policy(#[from] crate::policy::PolicyError),
    #[error(transparent)]
    Layer(#[from] crate::layers::LayerError),
    #[error(transparent)]
    Autograd(#[from] crate::autograd::AutogradError),
    #[error(transparent)]
    Ign3(#[from] crate::ign3::Ign3Error),
}

impl HarnessError {
    /// Process exit code: configuration and usage problems are 2, anything
    /// that stopped a run midway is 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::UnknownSuite(_) | HarnessError::NoInput | HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn io_err(path: &std::path::Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::IoError(format!("{}: {e}", path.display()))
}
