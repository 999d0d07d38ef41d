//! Experiment harness: configs, per-run CSV traces and manifests, parallel
//! sweeps, summaries, constant calibration, and regret envelopes.

pub mod bounds;
pub mod calibrate;
pub mod config;
pub mod output;
pub mod runner;
pub mod summary;

use thiserror::Error;

use robust_bandits::adversary::AttackError;
use robust_bandits::algorithms::AlgoError;
use robust_bandits::env::EnvError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("csv: {0}")]
    Csv(String),
    #[error("unknown bound curve '{0}'")]
    UnknownCurve(String),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Algo(#[from] AlgoError),
}
