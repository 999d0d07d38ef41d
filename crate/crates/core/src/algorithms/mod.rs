//! The learners.
//!
//! * [`phased`]: robust collaborative phased elimination for linear
//!   rewards, its non-robust and single-agent baselines, the two
//!   alternative server estimators, and the generalized-linear variant.
//! * [`glm`]: the damped Newton inversion and the server estimate used by
//!   the generalized-linear variant.
//! * [`contextual`]: robust BaseLinUCB / SupLinUCB.

pub mod contextual;
pub mod glm;
pub mod phased;

use thiserror::Error;

use crate::adversary::{AttackError, AttackSpec};
use crate::design::{DesignError, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::env::EnvError;
use crate::linalg::LinalgError;
use crate::robust_stats::{ContaminationSpec, StatsError};

pub use contextual::{base_linucb, suplinucb_run, ContextualConfig, ContextualReport, SupLinState};
pub use glm::{glm_server_estimate, h_map, newton_solve, NewtonOptions};
pub use phased::{
    baseline_nonrobust_pe, baseline_single_agent_pe, estimator_variant_run, phased_elimination, rcglm_run,
    rclb_run, Aggregator, EstimatorVariant,
};

pub const DEFAULT_DELTA: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgoError {
    #[error("invalid contamination fraction {0}")]
    InvalidAlpha(f64),
    #[error("contamination fraction {0} exceeds the estimator's limit")]
    AlphaTooLarge(f64),
    #[error("confidence parameter {0} is outside (0, 1)")]
    InvalidDelta(f64),
    #[error("need at least one agent")]
    NoAgents,
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("Newton solve stalled at residual {residual:e} (tolerance {tol:e})")]
    NewtonDivergence { residual: f64, tol: f64 },
    #[error("no phase branch fired at round {t}")]
    PhaseOverflow { t: u64 },
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Parameters shared by the phased-elimination learners.
#[derive(Debug, Clone)]
pub struct PhasedConfig {
    pub n_agents: usize,
    pub horizon: u64,
    pub delta: f64,
    pub spec: ContaminationSpec,
    pub attack: AttackSpec,
    pub seed: u64,
    pub design_max_iters: usize,
    pub design_tol: f64,
    pub newton: NewtonOptions,
}

impl PhasedConfig {
    pub fn new(n_agents: usize, horizon: u64, alpha: f64, attack: AttackSpec, seed: u64) -> Self {
        Self {
            n_agents,
            horizon,
            delta: DEFAULT_DELTA,
            spec: ContaminationSpec::new(alpha),
            attack,
            seed,
            design_max_iters: DEFAULT_MAX_ITERS,
            design_tol: DEFAULT_TOL,
            newton: NewtonOptions::default(),
        }
    }

    pub(crate) fn validate(&self) -> Result<(), AlgoError> {
        if self.n_agents == 0 {
            return Err(AlgoError::NoAgents);
        }
        if self.horizon == 0 {
            return Err(AlgoError::EmptyHorizon);
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(AlgoError::InvalidDelta(self.delta));
        }
        if !(0.0..0.5).contains(&self.spec.alpha) {
            return Err(AlgoError::InvalidAlpha(self.spec.alpha));
        }
        Ok(())
    }
}
