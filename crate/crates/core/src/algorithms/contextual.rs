//! Robust collaborative SupLinUCB for contextual linear bandits.
//!
//! The server keeps `S = ⌈ln T⌉` phase ledgers. Phase `s` owns a ridge
//! matrix `A = I/M + Σ xx'` and one response vector `b_i = Σ r_i x` per
//! agent, built only from the rounds stored in `ψ^(s)`. Each round scans the
//! phases in order:
//!
//! 1. some active arm has width `w > 2^{-s}/√M`: play the lowest-index such
//!    arm and store the round in `ψ^(s)`;
//! 2. every width is at most `1/√(MT)`: play the top upper confidence bound
//!    and store nothing;
//! 3. otherwise keep the arms within `2^{1-s}/√M` of the top bound and move
//!    to phase `s + 1`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{AlgoError, DEFAULT_DELTA};
use crate::adversary::{apply_attack, choose_adversaries, AgentMessage, AttackContext, AttackSpec};
use crate::env::{argmax_lowest, ContextualEnv};
use crate::rng::{labels, RngStream, StreamKey};
use crate::robust_stats::{median, ContaminationSpec};
use crate::trace::{Event, EventSink, NullSink, RegretTrace};

#[derive(Debug, Clone)]
pub struct ContextualConfig {
    pub n_agents: usize,
    pub delta: f64,
    pub spec: ContaminationSpec,
    pub attack: AttackSpec,
    pub seed: u64,
    /// Median aggregation and α-inflated widths when true; mean aggregation
    /// and uninflated widths otherwise.
    pub robust: bool,
}

impl ContextualConfig {
    pub fn new(n_agents: usize, alpha: f64, attack: AttackSpec, seed: u64) -> Self {
        Self { n_agents, delta: DEFAULT_DELTA, spec: ContaminationSpec::new(alpha), attack, seed, robust: true }
    }
}

/// Accumulators of a single phase.
#[derive(Debug, Clone)]
pub struct PhaseLedger {
    a: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    /// One column `b_i` per agent.
    b: DMatrix<f64>,
    rounds: Vec<u64>,
    theta: Option<DMatrix<f64>>,
}

impl PhaseLedger {
    fn new(d: usize, m: usize) -> Self {
        let a = DMatrix::identity(d, d) / m as f64;
        let chol = Cholesky::new(a.clone()).expect("ridge is positive definite");
        Self { a, chol, b: DMatrix::zeros(d, m), rounds: Vec::new(), theta: None }
    }

    /// `A = I/M + Σ_{τ∈ψ} x x'`.
    pub fn design_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Response vectors, one column per agent.
    pub fn responses(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Rounds stored in this phase (zero-based).
    pub fn rounds(&self) -> &[u64] {
        &self.rounds
    }

    /// `‖x‖_{A⁻¹}`.
    pub fn inv_norm(&self, x: &DVector<f64>) -> f64 {
        let y = self.chol.l().solve_lower_triangular(x).expect("factor is non-singular");
        y.norm()
    }

    /// `θ̂_i = A⁻¹ b_i` for every agent, as columns.
    pub fn estimates(&mut self) -> &DMatrix<f64> {
        if self.theta.is_none() {
            self.theta = Some(self.chol.solve(&self.b));
        }
        self.theta.as_ref().expect("just filled")
    }

    /// Adds round `t` with feature `x` and the agents' rewards.
    pub fn update(&mut self, t: u64, x: &DVector<f64>, rewards: &[f64]) {
        self.a.ger(1.0, x, x, 1.0);
        self.chol = Cholesky::new(self.a.clone()).expect("ridge keeps A positive definite");
        for (i, r) in rewards.iter().enumerate() {
            let mut col = self.b.column_mut(i);
            col.axpy(*r, x, 1.0);
        }
        self.rounds.push(t);
        self.theta = None;
    }
}

/// Server state: one ledger per phase.
#[derive(Debug, Clone)]
pub struct SupLinState {
    pub phases: Vec<PhaseLedger>,
    pub n_agents: usize,
}

impl SupLinState {
    pub fn new(d: usize, n_agents: usize, n_phases: usize) -> Self {
        Self { phases: (0..n_phases).map(|_| PhaseLedger::new(d, n_agents)).collect(), n_agents }
    }
}

/// Width multiplier `α + 2C√(log(1/δ̄)/M)`; with `robust = false` the `α`
/// term is dropped.
pub fn width_factor(spec: &ContaminationSpec, m: usize, delta_bar: f64, robust: bool) -> f64 {
    let alpha = if robust { spec.alpha } else { 0.0 };
    alpha + 2.0 * spec.c_univariate * ((1.0 / delta_bar).ln() / m as f64).sqrt()
}

/// Aggregated estimate `r̂` (median, or mean when `robust = false`) over the
/// agents' `⟨θ̂_i, x⟩`.
fn aggregate_estimate(theta: &DMatrix<f64>, x: &DVector<f64>, robust: bool) -> f64 {
    let vals = theta.tr_mul(x);
    if robust {
        median(vals.as_slice()).expect("at least one agent")
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

/// Robust estimates `(r̂, w)` for the given arms of one round.
pub fn base_linucb(
    ledger: &mut PhaseLedger,
    features: &[DVector<f64>],
    arms: &[usize],
    spec: &ContaminationSpec,
    delta_bar: f64,
    robust: bool,
) -> Vec<(f64, f64)> {
    let m = ledger.b.ncols();
    let factor = width_factor(spec, m, delta_bar, robust);
    let widths: Vec<f64> = arms.iter().map(|&a| factor * ledger.inv_norm(&features[a])).collect();
    let theta = ledger.estimates();
    arms.iter().zip(widths).map(|(&a, w)| (aggregate_estimate(theta, &features[a], robust), w)).collect()
}

#[derive(Debug, Clone)]
pub struct ContextualReport {
    pub trace: RegretTrace,
    /// `ψ^(s)` for every phase.
    pub psi: Vec<Vec<u64>>,
    /// Rounds played in the exploitation branch.
    pub xi: Vec<u64>,
    pub warnings: Vec<String>,
}

pub fn suplinucb_run(env: &ContextualEnv, cfg: &ContextualConfig) -> Result<ContextualReport, AlgoError> {
    suplinucb_run_with_sink(env, cfg, &mut NullSink)
}

pub fn suplinucb_run_with_sink(
    env: &ContextualEnv,
    cfg: &ContextualConfig,
    sink: &mut dyn EventSink,
) -> Result<ContextualReport, AlgoError> {
    let m = cfg.n_agents;
    if m == 0 {
        return Err(AlgoError::NoAgents);
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(AlgoError::InvalidDelta(cfg.delta));
    }
    if !(0.0..0.5).contains(&cfg.spec.alpha) {
        return Err(AlgoError::InvalidAlpha(cfg.spec.alpha));
    }
    let horizon = env.horizon();
    if horizon == 0 {
        return Err(AlgoError::EmptyHorizon);
    }
    let k = env.n_arms();
    let d = env.dim();
    let n_phases = ((horizon as f64).ln().ceil() as usize).max(1);
    let delta_bar = cfg.delta / (k as f64 * n_phases as f64 * horizon as f64);
    let factor = width_factor(&cfg.spec, m, delta_bar, cfg.robust);
    let sqrt_m = (m as f64).sqrt();
    let exploit_cut = 1.0 / (m as f64 * horizon as f64).sqrt();

    let run = StreamKey::root(cfg.seed);
    let adversary = choose_adversaries(cfg.spec.alpha, m, run);
    let n_bad = adversary.iter().filter(|b| **b).count();
    let mut agent_rngs: Vec<RngStream> = (0..m).map(|i| run.split(labels::AGENT).split(i as u64).stream()).collect();

    let mut warnings = Vec::new();
    if (horizon as u64) < (m * d) as u64 {
        let msg = format!("horizon T = {horizon} is below M·d = {}", m * d);
        sink.emit(&Event::Warning(msg.clone()));
        warnings.push(msg);
    }

    let mut state = SupLinState::new(d, m, n_phases);
    let mut trace = RegretTrace::new(m - n_bad);
    let mut xi = Vec::new();
    let mut rewards = vec![0.0; m];

    for t in 0..horizon {
        let round = env.round(t)?;
        let mut active: Vec<usize> = (0..k).collect();
        let mut choice: Option<(usize, Option<usize>)> = None;
        for s in 0..n_phases {
            let level = 0.5f64.powi(s as i32 + 1) / sqrt_m;
            let ledger = &mut state.phases[s];
            let widths: Vec<f64> = active.iter().map(|&a| factor * ledger.inv_norm(&round.features[a])).collect();
            if let Some(j) = widths.iter().position(|&w| w > level) {
                choice = Some((active[j], Some(s)));
                break;
            }
            let theta = ledger.estimates();
            let ucb: Vec<f64> = active
                .iter()
                .zip(&widths)
                .map(|(&a, w)| aggregate_estimate(theta, &round.features[a], cfg.robust) + w)
                .collect();
            if widths.iter().all(|&w| w <= exploit_cut) {
                choice = Some((active[argmax_lowest(&ucb)], None));
                break;
            }
            let top = ucb.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            active = active.into_iter().zip(&ucb).filter(|(_, &u)| top - u <= 2.0 * level).map(|(a, _)| a).collect();
        }
        let Some((arm, stored)) = choice else {
            return Err(AlgoError::PhaseOverflow { t: t as u64 });
        };
        let gap = round.regret(arm);
        trace.push(arm, gap, 1);
        sink.emit(&Event::Action { t: t as u64, arm, gap });

        match stored {
            None => xi.push(t as u64),
            Some(s) => {
                let benchmark = round.benchmark();
                let ctx = AttackContext {
                    benchmark,
                    theta_star: env.theta_star(),
                    poison_target: None,
                    good_vectors: &[],
                    n_agents: m,
                    n_bad,
                };
                for (i, rng) in agent_rngs.iter_mut().enumerate() {
                    let y = env.sample_reward(&round, arm, rng)?;
                    rewards[i] = if adversary[i] {
                        match apply_attack(AgentMessage::Reward(y), true, &cfg.attack, &ctx)? {
                            AgentMessage::Reward(z) => z,
                            _ => return Err(crate::adversary::AttackError::Unsupported("custom").into()),
                        }
                    } else {
                        y
                    };
                }
                state.phases[s].update(t as u64, &round.features[arm], &rewards);
            }
        }
    }

    Ok(ContextualReport {
        trace,
        psi: state.phases.iter().map(|p| p.rounds.clone()).collect(),
        xi,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::generate_contexts;

    #[test]
    fn test_empty_ledger_estimates() {
        let m = 4;
        let mut ledger = PhaseLedger::new(3, m);
        let feats = vec![DVector::from_vec(vec![0.3, -0.4, 0.0]), DVector::from_vec(vec![0.0, 0.0, 1.0])];
        let spec = ContaminationSpec::new(0.25);
        let out = base_linucb(&mut ledger, &feats, &[0, 1], &spec, 0.01, true);
        let factor = 0.25 + 2.0 * spec.c_univariate * ((100.0f64).ln() / m as f64).sqrt();
        for ((r, w), x) in out.iter().zip(&feats) {
            assert_eq!(*r, 0.0);
            assert!((w - factor * (m as f64).sqrt() * x.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn test_one_dimensional_ridge() {
        let mut ledger = PhaseLedger::new(1, 1);
        let x = DVector::from_vec(vec![1.0]);
        ledger.update(0, &x, &[1.0]);
        let out = base_linucb(&mut ledger, std::slice::from_ref(&x), &[0], &ContaminationSpec::new(0.0), 0.1, true);
        assert!((out[0].0 - 0.5).abs() < 1e-15);
        assert!((ledger.estimates()[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn test_single_arm_zero_regret() {
        let env = ContextualEnv::new(DVector::from_element(3, 0.5), generate_contexts(3, 1, 300, 2)).unwrap();
        let rep = suplinucb_run(&env, &ContextualConfig::new(5, 0.2, AttackSpec::contextual_threshold(0.6, 5.0), 1)).unwrap();
        assert_eq!(rep.trace.final_regret(), 0.0);
        assert_eq!(rep.trace.len(), 300);
    }

    #[test]
    fn test_ledger_partition() {
        let env = ContextualEnv::standard_setup(3, 6, 2000, 4);
        let rep = suplinucb_run(&env, &ContextualConfig::new(6, 1.0 / 6.0, AttackSpec::contextual_threshold(0.6, 5.0), 3)).unwrap();
        let mut all: Vec<u64> = rep.psi.iter().flatten().cloned().chain(rep.xi.iter().cloned()).collect();
        let n = all.len();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), n, "phase ledgers overlap");
        assert_eq!(all, (0..2000).collect::<Vec<u64>>());
    }
}
