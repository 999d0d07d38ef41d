//! Runs one configured simulation, or a sweep of them on a thread pool.
//!
//! Layout under the output directory: `m{M}_alpha{α}/run_seed{seed}.csv`
//! with a `run_seed{seed}.manifest.toml` beside it.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use robust_bandits::algorithms::{
    baseline_nonrobust_pe, baseline_single_agent_pe, estimator_variant_run, rcglm_run, rclb_run, suplinucb_run,
    ContextualConfig, EstimatorVariant, PhasedConfig,
};
use robust_bandits::env::{generate_instance, ContextualEnv, InstanceStyle, LinkFunction, LinkKind};
use robust_bandits::trace::RegretTrace;

use crate::bounds::BoundCurve;
use crate::config::{Algorithm, ExperimentConfig, Setting};
use crate::output::{self, format_g9, Envelopes, RunInfo};
use crate::summary;
use crate::HarnessError;

/// What happened to one `(M, α, seed)` run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub m: usize,
    pub alpha: f64,
    pub seed: u64,
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub final_regret: Option<f64>,
    pub error: Option<String>,
}

/// A simulated trace and the learner's warnings.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub trace: RegretTrace,
    pub warnings: Vec<String>,
}

/// Runs `cfg` at its scalar `m`, `alpha` and first seed.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Simulation, HarnessError> {
    let seed = *cfg.seeds.first().ok_or_else(|| HarnessError::Config("no seed".into()))?;
    let attack = cfg.attack.to_spec()?;
    if cfg.setting == Setting::Contextual {
        let env = ContextualEnv::standard_setup(cfg.d, cfg.k, cfg.horizon as usize, seed);
        let mut c = ContextualConfig::new(cfg.m, cfg.alpha, attack, seed);
        c.delta = cfg.delta;
        c.spec.c_univariate = cfg.c_univariate;
        c.spec.c_highdim = cfg.c_highdim;
        c.robust = cfg.algorithm == Algorithm::Suplinucb;
        let rep = suplinucb_run(&env, &c)?;
        return Ok(Simulation { trace: rep.trace, warnings: rep.warnings });
    }
    let style: InstanceStyle = cfg.instance_style.parse()?;
    let mut inst = generate_instance(cfg.d, cfg.k, seed, style);
    if cfg.setting == Setting::Glm {
        let kind: LinkKind = cfg.link.parse()?;
        inst = inst.with_link(LinkFunction::new(kind));
    }
    let mut p = PhasedConfig::new(cfg.m, cfg.horizon, cfg.alpha, attack, seed);
    p.delta = cfg.delta;
    p.spec.c_univariate = cfg.c_univariate;
    p.spec.c_highdim = cfg.c_highdim;
    let rep = match cfg.algorithm {
        Algorithm::Rclb => rclb_run(&inst, &p)?,
        Algorithm::NonrobustPe => baseline_nonrobust_pe(&inst, &p)?,
        Algorithm::SingleAgentPe => baseline_single_agent_pe(&inst, &p)?,
        Algorithm::ItwEstimates => estimator_variant_run(EstimatorVariant::ItwOnEstimates, &inst, &p)?,
        Algorithm::CleanObservations => estimator_variant_run(EstimatorVariant::CleanObservations, &inst, &p)?,
        Algorithm::Rcglm => rcglm_run(&inst, &p)?,
        Algorithm::Suplinucb | Algorithm::SuplinucbNonrobust => unreachable!("contextual handled above"),
    };
    Ok(Simulation { trace: rep.trace, warnings: rep.warnings })
}

/// Envelope columns written next to a trace.
pub fn envelopes(cfg: &ExperimentConfig) -> Envelopes {
    let (primary, secondary) = match cfg.setting {
        Setting::Contextual => (BoundCurve::G2, BoundCurve::G1),
        Setting::Linear | Setting::Glm => (BoundCurve::F2, BoundCurve::F1),
    };
    Envelopes { primary, secondary, d: cfg.d, alpha: cfg.alpha, m: cfg.m }
}

pub fn point_dir(output: &Path, m: usize, alpha: f64) -> PathBuf {
    output.join(format!("m{m}_alpha{}", format_g9(alpha)))
}

pub fn csv_name(seed: u64) -> String {
    format!("run_seed{seed}.csv")
}

pub fn manifest_name(seed: u64) -> String {
    format!("run_seed{seed}.manifest.toml")
}

/// Simulates a single-run config and writes its CSV and manifest.
/// Failures are recorded in the manifest instead of returned.
pub fn execute_run(cfg: &ExperimentConfig) -> RunOutcome {
    let seed = cfg.seeds[0];
    let dir = point_dir(&cfg.output, cfg.m, cfg.alpha);
    let csv = dir.join(csv_name(seed));
    let manifest = dir.join(manifest_name(seed));
    let start = Instant::now();
    let result = simulate(cfg).and_then(|sim| {
        let text = output::render_csv(&sim.trace, &envelopes(cfg))?;
        output::write_atomic(&csv, &text)?;
        Ok(sim)
    });
    let elapsed = start.elapsed().as_secs_f64();
    let (final_regret, error, warnings) = match result {
        Ok(sim) => (Some(sim.trace.final_regret()), None, sim.warnings),
        Err(e) => (None, Some(e.to_string()), Vec::new()),
    };
    let info = RunInfo {
        seed,
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        git_revision: output::git_revision(),
        elapsed_seconds: elapsed,
        csv: if error.is_none() { csv_name(seed) } else { String::new() },
        status: match &error {
            None => "ok".into(),
            Some(e) => format!("failed: {e}"),
        },
        warnings,
    };
    let mut error = error;
    if let Err(e) = output::write_atomic(&manifest, &output::render_manifest(&info, cfg)) {
        error.get_or_insert_with(|| e.to_string());
    }
    RunOutcome { m: cfg.m, alpha: cfg.alpha, seed, csv, manifest, final_regret, error }
}

/// Every `(M, α, seed)` run of `config`, on `threads` workers, followed by
/// the per-point and final summaries.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<Vec<RunOutcome>, HarnessError> {
    config.validate()?;
    let jobs: Vec<ExperimentConfig> = config
        .sweep_points()
        .into_iter()
        .flat_map(|(m, a)| config.seeds.iter().map(move |&s| (m, a, s)))
        .map(|(m, a, s)| config.single_run(m, a, s))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let outcomes: Vec<RunOutcome> = pool.install(|| jobs.par_iter().map(execute_run).collect());
    summary::write_summaries(config, &outcomes)?;
    Ok(outcomes)
}
