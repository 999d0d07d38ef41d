//! Attack models for the adversarial agents.
//!
//! Every message an agent transmits passes through [`apply_attack`]. Good
//! agents' messages are returned untouched; messages from the fixed
//! adversary set are rewritten according to the [`AttackSpec`]. Adversaries
//! are omniscient: the [`AttackContext`] exposes `θ*`, the benchmark payoff,
//! and the good agents' pending messages.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;
use rand::seq::index::sample;
use thiserror::Error;

use crate::rng::{labels, StreamKey};

pub const DEFAULT_P: f64 = 0.6;
pub const DEFAULT_BETA: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("unknown attack kind '{0}'")]
    UnknownAttackKind(String),
    #[error("custom attack selected but no hook registered")]
    MissingHook,
    #[error("attack '{0}' cannot act on this message type")]
    Unsupported(&'static str),
}

/// A message from one agent to the server.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentMessage {
    /// A single observed reward.
    Reward(f64),
    /// Per-arm averaged rewards over an epoch's support.
    ArmAverages(Vec<f64>),
    /// A local parameter estimate.
    Estimate(DVector<f64>),
    /// A sufficient statistic such as `Y_i = Σ m_a r_{i,a} a`.
    Statistic(DVector<f64>),
}

/// Read-only view of the system offered to the attack.
#[derive(Debug, Clone, Copy)]
pub struct AttackContext<'a> {
    /// `⟨θ*, a*⟩`, or `⟨θ*, x_{t,a*_t}⟩` in the contextual setting.
    pub benchmark: f64,
    pub theta_star: &'a DVector<f64>,
    /// Vector the poisoning adversaries want the average message to equal.
    /// For parameter estimates this is `−θ*`.
    pub poison_target: Option<&'a DVector<f64>>,
    /// Good agents' messages of the same round.
    pub good_vectors: &'a [DVector<f64>],
    pub n_agents: usize,
    pub n_bad: usize,
}

pub type AttackHook = Arc<dyn Fn(&AgentMessage, &AttackContext<'_>) -> AgentMessage + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackKind {
    None,
    ThresholdBias,
    ModelPoison,
    ContextualThreshold,
    Custom,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::ThresholdBias => "threshold-bias",
            AttackKind::ModelPoison => "model-poison",
            AttackKind::ContextualThreshold => "contextual-threshold",
            AttackKind::Custom => "custom",
        }
    }
}

impl FromStr for AttackKind {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, AttackError> {
        match s {
            "none" => Ok(AttackKind::None),
            "threshold-bias" | "threshold" => Ok(AttackKind::ThresholdBias),
            "model-poison" => Ok(AttackKind::ModelPoison),
            "contextual-threshold" => Ok(AttackKind::ContextualThreshold),
            "custom" => Ok(AttackKind::Custom),
            other => Err(AttackError::UnknownAttackKind(other.to_string())),
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub p: f64,
    pub beta: f64,
    pub hook: Option<AttackHook>,
}

impl fmt::Debug for AttackSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AttackSpec")
            .field("kind", &self.kind)
            .field("p", &self.p)
            .field("beta", &self.beta)
            .field("hook", &self.hook.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl Default for AttackSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl AttackSpec {
    pub fn none() -> Self {
        Self { kind: AttackKind::None, p: DEFAULT_P, beta: DEFAULT_BETA, hook: None }
    }

    pub fn threshold(p: f64, beta: f64) -> Self {
        Self { kind: AttackKind::ThresholdBias, p, beta, hook: None }
    }

    pub fn contextual_threshold(p: f64, beta: f64) -> Self {
        Self { kind: AttackKind::ContextualThreshold, p, beta, hook: None }
    }

    pub fn model_poison() -> Self {
        Self { kind: AttackKind::ModelPoison, ..Self::none() }
    }

    pub fn custom(hook: AttackHook) -> Self {
        Self { kind: AttackKind::Custom, hook: Some(hook), ..Self::none() }
    }

    /// Whether the attack rewrites rewards (as opposed to whole estimates).
    pub fn corrupts_rewards(&self) -> bool {
        matches!(self.kind, AttackKind::ThresholdBias | AttackKind::ContextualThreshold)
    }
}

/// `y − β` if `y > p·benchmark`, else `y + β`.
pub fn corrupt_reward_threshold(y: f64, benchmark: f64, p: f64, beta: f64) -> f64 {
    if y > p * benchmark { y - beta } else { y + beta }
}

/// `−(M/|B|)·θ* − (1/|B|)·Σ_good θ̂_j`: makes the average of all `M`
/// estimates equal `−θ*`.
pub fn corrupt_model_poison(theta_star: &DVector<f64>, good_estimates: &[DVector<f64>], n_bad: usize) -> DVector<f64> {
    let target = -theta_star;
    poison_towards(&target, good_estimates, good_estimates.len() + n_bad, n_bad)
}

/// Message that moves the average of `n_agents` messages onto `target`.
pub fn poison_towards(target: &DVector<f64>, good: &[DVector<f64>], n_agents: usize, n_bad: usize) -> DVector<f64> {
    assert!(n_bad >= 1, "poisoning needs at least one adversary");
    let mut out = target * (n_agents as f64 / n_bad as f64);
    for g in good {
        out.axpy(-1.0 / n_bad as f64, g, 1.0);
    }
    out
}

/// Rewrites `message` if `is_adversary`, otherwise returns it unchanged.
pub fn apply_attack(
    message: AgentMessage,
    is_adversary: bool,
    spec: &AttackSpec,
    ctx: &AttackContext<'_>,
) -> Result<AgentMessage, AttackError> {
    if !is_adversary {
        return Ok(message);
    }
    match spec.kind {
        AttackKind::None => Ok(message),
        AttackKind::ThresholdBias | AttackKind::ContextualThreshold => {
            let f = |y: f64| corrupt_reward_threshold(y, ctx.benchmark, spec.p, spec.beta);
            match message {
                AgentMessage::Reward(y) => Ok(AgentMessage::Reward(f(y))),
                AgentMessage::ArmAverages(ys) => Ok(AgentMessage::ArmAverages(ys.into_iter().map(f).collect())),
                _ => Err(AttackError::Unsupported(spec.kind.name())),
            }
        }
        AttackKind::ModelPoison => {
            let neg;
            let target = match ctx.poison_target {
                Some(t) => t,
                None => {
                    neg = -ctx.theta_star;
                    &neg
                }
            };
            let v = poison_towards(target, ctx.good_vectors, ctx.n_agents, ctx.n_bad);
            match message {
                AgentMessage::Estimate(_) => Ok(AgentMessage::Estimate(v)),
                AgentMessage::Statistic(_) => Ok(AgentMessage::Statistic(v)),
                _ => Err(AttackError::Unsupported(spec.kind.name())),
            }
        }
        AttackKind::Custom => {
            let hook = spec.hook.as_ref().ok_or(AttackError::MissingHook)?;
            Ok(hook(&message, ctx))
        }
    }
}

/// Number of adversaries `⌊αM⌋`.
pub fn n_adversaries(alpha: f64, m: usize) -> usize {
    ((alpha * m as f64) + 1e-9).floor() as usize
}

/// A fixed set of `⌊αM⌋` agents drawn uniformly from the run's stream,
/// returned as a membership mask.
pub fn choose_adversaries(alpha: f64, m: usize, run: StreamKey) -> Vec<bool> {
    let n_bad = n_adversaries(alpha, m).min(m);
    let mut mask = vec![false; m];
    if n_bad == 0 {
        return mask;
    }
    let mut rng = run.split(labels::ADVERSARY_SET).stream();
    for i in sample(rng.rng(), m, n_bad).into_iter() {
        mask[i] = true;
    }
    mask
}
