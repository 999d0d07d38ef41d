//! Empirical calibration of the two width constants.
//!
//! For the median constant `C`, each cell `(α, M)` of the grid draws `M`
//! standard normal rewards, replaces `⌊αM⌋` of them with a far outlier, and
//! records `|median| / (α + √(ln(1/δ)/M))`. The `1 − δ/2` quantile of that
//! ratio, maximised over the grid and rounded up to a multiple of 0.05, is
//! the calibrated `C`. The ITW constant is calibrated the same way from
//! `‖μ̂ − μ‖ / (√((d + ln(16/δ))/M) + α√ln(1/α))` on batches with a
//! clustered outlier group.

use serde::Serialize;

use robust_bandits::linalg::SpdMatrix;
use robust_bandits::rng::{RngStream, StreamKey};
use robust_bandits::robust_stats::{itw_estimate, median, ContaminationSpec};
use robust_bandits::DVector;

use crate::HarnessError;

pub const ROUNDING_STEP: f64 = 0.05;
pub const OUTLIER: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    pub delta: f64,
    pub alphas: Vec<f64>,
    pub ms: Vec<usize>,
    pub median_trials: usize,
    pub itw_trials: usize,
    pub itw_d: usize,
    pub itw_m: usize,
    pub itw_alpha: f64,
    pub seed: u64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            delta: 0.1,
            alphas: vec![0.05, 0.1, 0.15, 0.25],
            ms: vec![20, 40, 60, 80, 100],
            median_trials: 1000,
            itw_trials: 200,
            itw_d: 5,
            itw_m: 500,
            itw_alpha: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellQuantile {
    pub alpha: f64,
    pub m: usize,
    pub quantile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub c_univariate: f64,
    pub c_highdim: f64,
    pub delta: f64,
    pub median_cells: Vec<CellQuantile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub itw_quantile: Option<f64>,
}

fn round_up(x: f64) -> f64 {
    let k = (x / ROUNDING_STEP - 1e-9).ceil().max(1.0);
    (k * ROUNDING_STEP * 100.0).round() / 100.0
}

/// Empirical `q`-quantile (nearest rank).
pub fn quantile(xs: &mut [f64], q: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let rank = ((q * xs.len() as f64).ceil() as usize).clamp(1, xs.len());
    xs[rank - 1]
}

fn median_width_unit(alpha: f64, m: usize, delta: f64) -> f64 {
    alpha + ((1.0 / delta).ln() / m as f64).sqrt()
}

fn contaminated_sample(rng: &mut RngStream, m: usize, alpha: f64) -> Vec<f64> {
    let n_bad = (alpha * m as f64 + 1e-9).floor() as usize;
    (0..m).map(|i| if i < n_bad { OUTLIER } else { rng.normal() }).collect()
}

fn median_ratios(alpha: f64, m: usize, delta: f64, trials: usize, rng: &mut RngStream) -> Result<Vec<f64>, HarnessError> {
    let unit = median_width_unit(alpha, m, delta);
    (0..trials)
        .map(|_| {
            let s = contaminated_sample(rng, m, alpha);
            let med = median(&s).map_err(|e| HarnessError::Config(e.to_string()))?;
            Ok(med.abs() / unit)
        })
        .collect()
}

/// ITW error scale `√((d + ln(16/δ))/M) + α√ln(1/α)`.
pub fn itw_width_unit(d: usize, m: usize, alpha: f64, delta: f64) -> f64 {
    let tail = if alpha > 0.0 { alpha * (1.0 / alpha).ln().sqrt() } else { 0.0 };
    ((d as f64 + (16.0 / delta).ln()) / m as f64).sqrt() + tail
}

fn itw_ratios(opts: &CalibrationOptions, trials: usize, rng: &mut RngStream) -> Result<Vec<f64>, HarnessError> {
    let (d, m, alpha) = (opts.itw_d, opts.itw_m, opts.itw_alpha);
    let spec = ContaminationSpec::new(alpha);
    let n_bad = (alpha * m as f64 + 1e-9).floor() as usize;
    let unit = itw_width_unit(d, m, alpha, opts.delta);
    let cov = SpdMatrix::identity(d);
    (0..trials)
        .map(|t| {
            let truth = DVector::from_fn(d, |_, _| 0.3 * rng.normal());
            let dir = DVector::from_fn(d, |_, _| rng.normal()).normalize();
            // Alternate a near cluster, which the filter cannot see, with a far one.
            let shift = if t % 2 == 0 { 2.0 } else { 20.0 };
            let samples: Vec<DVector<f64>> = (0..m)
                .map(|i| if i < n_bad { &truth + &dir * shift } else { &truth + DVector::from_fn(d, |_, _| rng.normal()) })
                .collect();
            let est = itw_estimate(&samples, &spec, &cov, rng.rng()).map_err(|e| HarnessError::Config(e.to_string()))?;
            Ok((est - &truth).norm() / unit)
        })
        .collect()
}

pub fn calibrate_constants(opts: &CalibrationOptions) -> Result<Calibration, HarnessError> {
    if opts.median_trials == 0 || opts.alphas.is_empty() || opts.ms.is_empty() {
        return Err(HarnessError::Config("calibration needs a non-empty grid and trials".into()));
    }
    let level = 1.0 - opts.delta / 2.0;
    let root = StreamKey::root(opts.seed);
    let mut cells = Vec::new();
    for (i, &alpha) in opts.alphas.iter().enumerate() {
        for (j, &m) in opts.ms.iter().enumerate() {
            let mut rng = root.split2(i as u64, j as u64).stream();
            let mut r = median_ratios(alpha, m, opts.delta, opts.median_trials, &mut rng)?;
            cells.push(CellQuantile { alpha, m, quantile: quantile(&mut r, level) });
        }
    }
    let worst = cells.iter().map(|c| c.quantile).fold(0.0, f64::max);
    let (itw_quantile, c_highdim) = if opts.itw_trials > 0 {
        let mut rng = root.split(u64::MAX).stream();
        let mut r = itw_ratios(opts, opts.itw_trials, &mut rng)?;
        let q = quantile(&mut r, level);
        (Some(q), round_up(q))
    } else {
        (None, robust_bandits::robust_stats::DEFAULT_C_HIGHDIM)
    };
    Ok(Calibration { c_univariate: round_up(worst), c_highdim, delta: opts.delta, median_cells: cells, itw_quantile })
}

/// Fraction of fresh trials with `|median| ≤ c·(α + √(ln(1/δ)/M))`.
pub fn median_coverage(c: f64, alpha: f64, m: usize, delta: f64, trials: usize, seed: u64) -> Result<f64, HarnessError> {
    let mut rng = StreamKey::root(seed).split(0xC0FE).stream();
    let r = median_ratios(alpha, m, delta, trials, &mut rng)?;
    Ok(r.iter().filter(|&&x| x <= c).count() as f64 / trials as f64)
}
