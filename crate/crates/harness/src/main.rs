use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bandit_lab::bounds::bound_curve;
use bandit_lab::calibrate::{calibrate_constants, CalibrationOptions};
use bandit_lab::config::{parse_list, parse_seeds, Algorithm, ExperimentConfig, Setting};
use bandit_lab::output::{format_g9, time_grid};
use bandit_lab::runner::run_experiment;
use bandit_lab::HarnessError;

#[derive(Parser)]
#[command(name = "bandit-lab", version, about = "Simulations of collaborative bandits with adversarial agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phased elimination on a linear instance.
    RunLinear(RunArgs),
    /// Phased elimination on a generalized-linear instance.
    RunGlm(RunArgs),
    /// SupLinUCB on a contextual instance.
    RunContextual(RunArgs),
    /// Any setting, with sweep axes from flags or the config file.
    Sweep(RunArgs),
    /// Fit the median and ITW width constants by Monte Carlo.
    Calibrate(CalibrateArgs),
    /// Print an envelope curve as `t,value` rows.
    Curves(CurvesArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config or run manifest; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    c_univariate: Option<f64>,
    #[arg(long)]
    c_highdim: Option<f64>,
    #[arg(long)]
    link: Option<String>,
    #[arg(long)]
    instance_style: Option<String>,
    /// none, threshold-bias, contextual-threshold or model-poison.
    #[arg(long)]
    attack: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// `0..20` or `1,4,9`.
    #[arg(long)]
    seeds: Option<String>,
    /// Comma-separated agent counts.
    #[arg(long)]
    sweep_m: Option<String>,
    /// Comma-separated corruption fractions.
    #[arg(long)]
    sweep_alpha: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 200)]
    itw_trials: usize,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value = "0.05,0.1,0.15,0.25")]
    alphas: String,
    #[arg(long, default_value = "20,40,60,80,100")]
    ms: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CurvesArgs {
    /// f1, f2, g1 or g2.
    #[arg(long)]
    name: String,
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 100_000)]
    t_max: u64,
    /// Explicit comma-separated rounds; overrides --t-max.
    #[arg(long)]
    t_grid: Option<String>,
}

fn build_config(args: &RunArgs, setting: Option<Setting>) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = setting {
        if cfg.setting != s {
            cfg.setting = s;
            cfg.algorithm = match s {
                Setting::Linear => Algorithm::Rclb,
                Setting::Glm => Algorithm::Rcglm,
                Setting::Contextual => Algorithm::Suplinucb,
            };
        }
    }
    if let Some(a) = &args.algorithm {
        cfg.algorithm = a.parse()?;
        if setting.is_none() {
            cfg.setting = cfg.algorithm.setting();
        }
    }
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = &args.$field {
                cfg.$field = v.clone();
            }
        )*};
    }
    set!(d, k, m, horizon, alpha, delta, c_univariate, c_highdim, link, instance_style, output);
    if let Some(kind) = &args.attack {
        cfg.attack.kind = kind.clone();
    }
    if let Some(p) = args.p {
        cfg.attack.p = p;
    }
    if let Some(b) = args.beta {
        cfg.attack.beta = b;
    }
    if let Some(s) = &args.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if let Some(s) = &args.sweep_m {
        cfg.sweep.m = Some(parse_list(s)?);
    }
    if let Some(s) = &args.sweep_alpha {
        cfg.sweep.alpha = Some(parse_list(s)?);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &RunArgs, setting: Option<Setting>, allow_sweep: bool) -> Result<(), HarnessError> {
    let cfg = build_config(args, setting)?;
    if !allow_sweep && cfg.sweep_points().len() > 1 {
        return Err(HarnessError::Config("sweep axes given; use the sweep subcommand".into()));
    }
    let outcomes = run_experiment(&cfg, args.threads)?;
    let failed: Vec<_> = outcomes.iter().filter(|o| o.error.is_some()).collect();
    for o in &failed {
        eprintln!("run m={} alpha={} seed={} failed: {}", o.m, o.alpha, o.seed, o.error.as_deref().unwrap_or(""));
    }
    println!("{} runs ({} failed), results in {}", outcomes.len(), failed.len(), cfg.output.display());
    Ok(())
}

fn calibrate(args: &CalibrateArgs) -> Result<(), HarnessError> {
    if args.trials < 1000 {
        return Err(HarnessError::Config("calibration needs at least 1000 trials per cell".into()));
    }
    let opts = CalibrationOptions {
        delta: args.delta,
        alphas: parse_list(&args.alphas)?,
        ms: parse_list(&args.ms)?,
        median_trials: args.trials,
        itw_trials: args.itw_trials,
        seed: args.seed,
        ..Default::default()
    };
    let cal = calibrate_constants(&opts)?;
    print!("{}", toml::to_string(&cal).expect("calibration serializes"));
    Ok(())
}

fn curves(args: &CurvesArgs) -> Result<(), HarnessError> {
    let grid = match &args.t_grid {
        Some(s) => parse_list(s)?,
        None => time_grid(args.t_max),
    };
    let vals = bound_curve(&args.name, args.d, &grid, args.alpha, args.m)?;
    println!("t,{}", args.name);
    for (t, v) in grid.iter().zip(vals) {
        println!("{t},{}", format_g9(v));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::RunLinear(a) => run(a, Some(Setting::Linear), false),
        Command::RunGlm(a) => run(a, Some(Setting::Glm), false),
        Command::RunContextual(a) => run(a, Some(Setting::Contextual), false),
        Command::Sweep(a) => run(a, None, true),
        Command::Calibrate(a) => calibrate(a),
        Command::Curves(a) => curves(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
