//! Robust collaborative phased elimination.
//!
//! Epoch `ℓ` uses accuracy `ε = 2^{-ℓ}` and confidence
//! `δ_ℓ = δ̄/(Kℓ²)` with `δ̄ = δ/(10K)`. The server computes a G-optimal
//! design `π` on the active arms and asks every agent to pull each support
//! arm `m_a = ⌈T_a/M⌉` times, `T_a = ⌈π(a)·d·log(1/δ_ℓ)/ε²⌉`. The agents
//! report local estimates, the server aggregates them into payoff estimates
//! `μ_a` for all active arms, and keeps the arms within `2γ` of the best.
//!
//! All linear algebra runs in an orthonormal basis of the active arms'
//! span. The last epoch is cut short when the per-agent budget `T` runs
//! out; it still eliminates if every support arm got at least one pull.

use nalgebra::DVector;

use super::glm::glm_server_estimate;
use super::{AlgoError, PhasedConfig};
use crate::adversary::{apply_attack, choose_adversaries, AgentMessage, AttackContext, AttackError, AttackSpec};
use crate::design::solve_g_optimal;
use crate::env::BanditInstance;
use crate::linalg::{weighted_outer_sum, SpdMatrix};
use crate::rng::{labels, StreamKey};
use crate::robust_stats::{itw_estimate, median, ContaminationSpec, ITW_ALPHA_LIMIT};
use crate::trace::{EpochRecord, Event, EventSink, NullSink, RegretTrace, RunReport};

/// How the server turns the agents' messages into payoff estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregator {
    /// Per-arm median of `⟨θ̂_i, a⟩`, threshold `√2·C·(1+α√M)·ε`.
    Median,
    /// Per-arm mean of `⟨θ̂_i, a⟩`, threshold `ε`.
    Mean,
    /// Robust mean of whitened local estimates, threshold
    /// `4·C₁·(√d + α√(M log(1/α)))·ε`.
    ItwEstimates,
    /// Per-arm median of the averaged rewards followed by a regression,
    /// threshold `√2·C·√|Supp|·(1+α√M)·ε`.
    CleanObservations,
    /// Generalized-linear rewards: robust mean of whitened `Y_i` and a
    /// Newton inversion, threshold `4·C₁·(k₂/k₁)·(√d + α√(M log(1/α)))·ε`.
    GlmItw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorVariant {
    ItwOnEstimates,
    CleanObservations,
}

/// `α√(M log(1/α))`, continuously extended by 0 at `α = 0`.
fn alpha_log_term(alpha: f64, m: usize) -> f64 {
    if alpha <= 0.0 { 0.0 } else { alpha * (m as f64 * (1.0 / alpha).ln()).sqrt() }
}

fn threshold(agg: Aggregator, spec: &ContaminationSpec, instance: &BanditInstance, m: usize, support: usize, eps: f64) -> f64 {
    let alpha = spec.alpha;
    let d = instance.dim() as f64;
    let robust = 1.0 + alpha * (m as f64).sqrt();
    match agg {
        Aggregator::Median => std::f64::consts::SQRT_2 * spec.c_univariate * robust * eps,
        Aggregator::Mean => eps,
        Aggregator::ItwEstimates => 4.0 * spec.c_highdim * (d.sqrt() + alpha_log_term(alpha, m)) * eps,
        Aggregator::CleanObservations => {
            std::f64::consts::SQRT_2 * spec.c_univariate * (support as f64).sqrt() * robust * eps
        }
        Aggregator::GlmItw => {
            let link = instance.link();
            4.0 * spec.c_highdim * (link.k2() / link.k1()) * (d.sqrt() + alpha_log_term(alpha, m)) * eps
        }
    }
}

/// Phased elimination with the given server aggregator.
pub fn phased_elimination(
    instance: &BanditInstance,
    cfg: &PhasedConfig,
    agg: Aggregator,
    sink: &mut dyn EventSink,
) -> Result<RunReport, AlgoError> {
    cfg.validate()?;
    let m = cfg.n_agents;
    let alpha = cfg.spec.alpha;
    let uses_itw = matches!(agg, Aggregator::ItwEstimates | Aggregator::GlmItw);
    if uses_itw && alpha >= ITW_ALPHA_LIMIT {
        return Err(AlgoError::AlphaTooLarge(alpha));
    }
    let k = instance.n_arms();
    let d = instance.dim();
    let horizon = cfg.horizon;
    let run = StreamKey::root(cfg.seed);
    let adversary = choose_adversaries(alpha, m, run);
    let n_bad = adversary.iter().filter(|b| **b).count();
    let n_good = m - n_bad;
    let attack: &AttackSpec = &cfg.attack;
    let link = *instance.link();

    let mut warnings = Vec::new();
    let mut warn = |sink: &mut dyn EventSink, msg: String| {
        sink.emit(&Event::Warning(msg.clone()));
        warnings.push(msg);
    };
    if agg == Aggregator::GlmItw {
        let need = (160.0 * (k as f64).powi(2) * (horizon as f64).powi(2) / cfg.delta).ln();
        if (m as f64) <= need {
            warn(sink, format!("M = {m} does not exceed log(160 K² T² / δ) = {need:.2}"));
        }
    }
    if horizon < (m * d) as u64 {
        warn(sink, format!("horizon T = {horizon} is below M·d = {}", m * d));
    }

    let delta_bar = cfg.delta / (10.0 * k as f64);
    let mut trace = RegretTrace::new(n_good);
    let mut epochs = Vec::new();
    let mut active: Vec<usize> = (0..k).collect();
    let mut used: u64 = 0;
    let mut glm_theta: DVector<f64> = DVector::zeros(d);
    let mut ell = 0usize;

    while used < horizon {
        if active.len() == 1 {
            let arm = active[0];
            let gap = instance.instantaneous_regret(arm);
            let rest = horizon - used;
            trace.push(arm, gap, rest);
            sink.emit(&Event::Pulls { arm, count: rest, gap });
            break;
        }
        ell += 1;
        let eps = 0.5f64.powi(ell as i32);
        let delta_l = delta_bar / (k as f64 * (ell * ell) as f64);
        let log_term = (1.0 / delta_l).ln();

        let design = solve_g_optimal(&instance.arms().select(&active), cfg.design_max_iters, cfg.design_tol)?;
        let basis = design.basis().clone();
        let support: Vec<usize> = design.support().iter().map(|&j| active[j]).collect();
        let t_a: Vec<f64> = design
            .support()
            .iter()
            .map(|&j| (design.weight(j) * d as f64 * log_term / (eps * eps)).ceil())
            .collect();
        let m_a: Vec<u64> = t_a.iter().map(|t| (t / m as f64).ceil() as u64).collect();
        let epoch_len: u64 = m_a.iter().sum();

        let remaining = horizon - used;
        let truncated = epoch_len > remaining;
        let mut counts = m_a.clone();
        if truncated {
            let mut left = remaining;
            for c in counts.iter_mut() {
                *c = (*c).min(left);
                left -= *c;
            }
            if ell == 1 {
                warn(sink, format!("horizon T = {horizon} cannot complete the first epoch ({epoch_len} pulls per agent)"));
            }
        }
        sink.emit(&Event::EpochStart {
            epoch: ell,
            n_active: active.len(),
            support: support.clone(),
            pulls_per_agent: counts.iter().sum(),
        });
        for (&arm, &c) in support.iter().zip(&counts) {
            let gap = instance.instantaneous_regret(arm);
            trace.push(arm, gap, c);
            if c > 0 {
                sink.emit(&Event::Pulls { arm, count: c, gap });
            }
        }
        used += counts.iter().sum::<u64>();

        let mut record = EpochRecord {
            epoch: ell,
            eps,
            gamma: f64::NAN,
            active: active.clone(),
            support: support.clone(),
            pulls: counts.clone(),
            survivors: active.clone(),
            truncated,
            g_value: design.g_value(),
        };
        if counts.contains(&0) {
            epochs.push(record);
            break;
        }

        // Support and active arms in span coordinates.
        let points: Vec<DVector<f64>> = support.iter().map(|&a| basis.tr_mul(instance.arms().arm(a))).collect();
        let active_points: Vec<DVector<f64>> = active.iter().map(|&a| basis.tr_mul(instance.arms().arm(a))).collect();
        let weights: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let vtilde = SpdMatrix::new(weighted_outer_sum(basis.ncols(), points.iter().zip(&weights).map(|(p, w)| (*w, p))))?;
        let theta_sub = basis.tr_mul(instance.theta_star());

        // Per-agent averaged rewards over the support; reward attacks
        // rewrite an adversary's averages before it forms its message.
        let mut averages: Vec<Vec<f64>> = Vec::with_capacity(m);
        for (i, &is_bad) in adversary.iter().enumerate() {
            let mut rng = run.split(labels::AGENT).split2(i as u64, ell as u64).stream();
            let mut obs = Vec::with_capacity(support.len());
            for (&arm, &c) in support.iter().zip(&counts) {
                obs.push(instance.sample_mean_reward(arm, c, &mut rng)?);
            }
            if is_bad && attack.corrupts_rewards() {
                let ctx = reward_context(instance);
                obs = match apply_attack(AgentMessage::ArmAverages(obs), true, attack, &ctx)? {
                    AgentMessage::ArmAverages(v) => v,
                    _ => return Err(AttackError::Unsupported("custom").into()),
                };
            }
            averages.push(obs);
        }

        let statistic = |obs: &[f64]| {
            let mut y = DVector::zeros(basis.ncols());
            for ((p, w), r) in points.iter().zip(&weights).zip(obs) {
                y.axpy(w * r, p, 1.0);
            }
            y
        };

        let payoffs: Vec<f64> = match agg {
            Aggregator::Median | Aggregator::Mean | Aggregator::ItwEstimates => {
                let mut estimates: Vec<DVector<f64>> = averages.iter().map(|o| vtilde.solve(&statistic(o))).collect::<Result<_, _>>()?;
                if !attack.corrupts_rewards() {
                    corrupt_messages(&mut estimates, &adversary, attack, instance, &(-&theta_sub), AgentMessage::Estimate)?;
                }
                match agg {
                    Aggregator::Median | Aggregator::Mean => active_points
                        .iter()
                        .map(|b| {
                            let vals: Vec<f64> = estimates.iter().map(|th| th.dot(b)).collect();
                            if agg == Aggregator::Median {
                                median(&vals).expect("at least one agent")
                            } else {
                                vals.iter().sum::<f64>() / vals.len() as f64
                            }
                        })
                        .collect(),
                    _ => {
                        let (half, inv_half) = vtilde.sqrt_pair();
                        let z: Vec<DVector<f64>> = estimates.iter().map(|th| &half * th).collect();
                        let x = if z.len() >= 2 {
                            let mut rng = run.split(labels::SERVER).split(ell as u64).stream();
                            itw_estimate(&z, &cfg.spec, &SpdMatrix::identity(basis.ncols()), &mut rng)?
                        } else {
                            z[0].clone()
                        };
                        let theta = inv_half * x;
                        active_points.iter().map(|b| theta.dot(b)).collect()
                    }
                }
            }
            Aggregator::CleanObservations => {
                let mut msgs: Vec<DVector<f64>> = averages.iter().map(|o| DVector::from_column_slice(o)).collect();
                if !attack.corrupts_rewards() {
                    let target = DVector::from_iterator(support.len(), support.iter().map(|&a| -instance.linear_mean(a)));
                    corrupt_messages(&mut msgs, &adversary, attack, instance, &target, |v| {
                        AgentMessage::ArmAverages(v.iter().cloned().collect())
                    })?;
                }
                let clean: Vec<f64> = (0..support.len())
                    .map(|j| median(&msgs.iter().map(|v| v[j]).collect::<Vec<_>>()).expect("at least one agent"))
                    .collect();
                let reg_w: Vec<f64> = (0..support.len()).map(|j| t_a[j] * counts[j] as f64 / m_a[j] as f64).collect();
                let vbar = SpdMatrix::new(weighted_outer_sum(basis.ncols(), points.iter().zip(&reg_w).map(|(p, w)| (*w, p))))?;
                let mut y = DVector::zeros(basis.ncols());
                for ((p, w), r) in points.iter().zip(&reg_w).zip(&clean) {
                    y.axpy(w * r, p, 1.0);
                }
                let theta = vbar.solve(&y)?;
                active_points.iter().map(|b| theta.dot(b)).collect()
            }
            Aggregator::GlmItw => {
                let mut stats: Vec<DVector<f64>> = averages.iter().map(|o| statistic(o)).collect();
                if !attack.corrupts_rewards() {
                    let neg = -&theta_sub;
                    let target = super::glm::h_map(&link, &points, &weights, &neg);
                    corrupt_messages(&mut stats, &adversary, attack, instance, &target, AgentMessage::Statistic)?;
                }
                let start = basis.tr_mul(&glm_theta);
                let mut rng = run.split(labels::SERVER).split(ell as u64).stream();
                let theta = glm_server_estimate(
                    &link, &points, &weights, &vtilde, &stats, &cfg.spec, &start, &cfg.newton, &mut rng,
                )?;
                glm_theta = &basis * &theta;
                active_points.iter().map(|b| link.mu(theta.dot(b))).collect()
            }
        };

        let gamma = threshold(agg, &cfg.spec, instance, m, support.len(), eps);
        let best = payoffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let keep: Vec<bool> = payoffs.iter().map(|mu| best - mu <= 2.0 * gamma).collect();
        let survivors: Vec<usize> = active.iter().zip(&keep).filter(|(_, k)| **k).map(|(&a, _)| a).collect();
        let removed: Vec<usize> = active.iter().zip(&keep).filter(|(_, k)| !**k).map(|(&a, _)| a).collect();
        if !removed.is_empty() {
            sink.emit(&Event::Eliminated { epoch: ell, arms: removed });
        }
        record.gamma = gamma;
        record.survivors = survivors.clone();
        epochs.push(record);
        active = survivors;
        if truncated {
            break;
        }
        let lhs = 4f64.powi(ell as i32) * d as f64 * log_term / m as f64;
        assert!(lhs <= horizon as f64, "epoch count bound violated: {lhs} > {horizon}");
    }
    debug_assert_eq!(trace.len(), horizon);
    Ok(RunReport { trace, epochs, warnings })
}

fn reward_context(instance: &BanditInstance) -> AttackContext<'_> {
    AttackContext {
        benchmark: instance.benchmark(),
        theta_star: instance.theta_star(),
        poison_target: None,
        good_vectors: &[],
        n_agents: 0,
        n_bad: 0,
    }
}

/// Replaces adversaries' vector messages in place.
fn corrupt_messages(
    msgs: &mut [DVector<f64>],
    adversary: &[bool],
    attack: &AttackSpec,
    instance: &BanditInstance,
    poison_target: &DVector<f64>,
    wrap: impl Fn(DVector<f64>) -> AgentMessage,
) -> Result<(), AlgoError> {
    let n_bad = adversary.iter().filter(|b| **b).count();
    if n_bad == 0 {
        return Ok(());
    }
    let good: Vec<DVector<f64>> =
        msgs.iter().zip(adversary).filter(|(_, b)| !**b).map(|(v, _)| v.clone()).collect();
    let ctx = AttackContext {
        benchmark: instance.benchmark(),
        theta_star: instance.theta_star(),
        poison_target: Some(poison_target),
        good_vectors: &good,
        n_agents: msgs.len(),
        n_bad,
    };
    for (msg, &bad) in msgs.iter_mut().zip(adversary) {
        if !bad {
            continue;
        }
        *msg = match apply_attack(wrap(msg.clone()), true, attack, &ctx)? {
            AgentMessage::Estimate(v) | AgentMessage::Statistic(v) => v,
            AgentMessage::ArmAverages(v) => DVector::from_vec(v),
            AgentMessage::Reward(_) => return Err(AlgoError::Attack(AttackError::Unsupported("custom"))),
        };
    }
    Ok(())
}

/// Robust collaborative phased elimination (median aggregation).
pub fn rclb_run(instance: &BanditInstance, cfg: &PhasedConfig) -> Result<RunReport, AlgoError> {
    phased_elimination(instance, cfg, Aggregator::Median, &mut NullSink)
}

/// Same skeleton with mean aggregation and threshold `ε`.
pub fn baseline_nonrobust_pe(instance: &BanditInstance, cfg: &PhasedConfig) -> Result<RunReport, AlgoError> {
    phased_elimination(instance, cfg, Aggregator::Mean, &mut NullSink)
}

/// A lone agent running the robust learner: `M = 1`, `α = 0`, no attack.
pub fn baseline_single_agent_pe(instance: &BanditInstance, cfg: &PhasedConfig) -> Result<RunReport, AlgoError> {
    let mut single = cfg.clone();
    single.n_agents = 1;
    single.spec.alpha = 0.0;
    single.attack = AttackSpec::none();
    phased_elimination(instance, &single, Aggregator::Median, &mut NullSink)
}

/// The alternative server estimators.
pub fn estimator_variant_run(
    variant: EstimatorVariant,
    instance: &BanditInstance,
    cfg: &PhasedConfig,
) -> Result<RunReport, AlgoError> {
    let agg = match variant {
        EstimatorVariant::ItwOnEstimates => Aggregator::ItwEstimates,
        EstimatorVariant::CleanObservations => Aggregator::CleanObservations,
    };
    phased_elimination(instance, cfg, agg, &mut NullSink)
}

/// Robust collaborative phased elimination for generalized-linear rewards.
pub fn rcglm_run(instance: &BanditInstance, cfg: &PhasedConfig) -> Result<RunReport, AlgoError> {
    phased_elimination(instance, cfg, Aggregator::GlmItw, &mut NullSink)
}
