//! Robust mean estimation under adversarial contamination.
//!
//! * [`robust_median`]: the univariate median with width
//!   `C·(α + √(log(1/δ)/M))·σ`.
//! * [`itw_estimate`]: the iteratively reweighted mean estimator for
//!   Gaussian samples with known covariance. It starts at the geometric
//!   median and alternates a capped-simplex weight minimization of
//!   `λ_max(Σ_w − Σ)` with a reweighted mean.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::{weighted_outer_sum, SpdMatrix};

pub const DEFAULT_C_UNIVARIATE: f64 = 3.0;
pub const DEFAULT_C_HIGHDIM: f64 = 4.0;

/// Largest corruption fraction for which the ITW iteration count is defined.
pub const ITW_ALPHA_LIMIT: f64 = 0.276_393_202_250_021; // (5 - √5) / 10

pub const GEOMEDIAN_TOL: f64 = 1e-10;
pub const GEOMEDIAN_MAX_ITERS: usize = 1000;
pub const GEOMEDIAN_SHIFT: f64 = 1e-12;

pub const WEIGHT_STEP_ITERS: usize = 50;
pub const POWER_ITERS: usize = 100;
pub const POWER_TOL: f64 = 1e-8;
const MAX_BACKTRACKS: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("no samples")]
    EmptySamples,
    #[error("invalid contamination fraction {0}")]
    InvalidAlpha(f64),
    #[error("contamination fraction {0} exceeds the estimator's limit")]
    AlphaTooLarge(f64),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("confidence parameter {0} is outside (0, 1)")]
    InvalidDelta(f64),
    #[error("sample {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
}

/// Corruption level and the two universal constants used for widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContaminationSpec {
    pub alpha: f64,
    pub c_univariate: f64,
    pub c_highdim: f64,
}

impl ContaminationSpec {
    pub fn new(alpha: f64) -> Self {
        Self { alpha, ..Self::default() }
    }
}

impl Default for ContaminationSpec {
    fn default() -> Self {
        Self { alpha: 0.0, c_univariate: DEFAULT_C_UNIVARIATE, c_highdim: DEFAULT_C_HIGHDIM }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustEstimate {
    pub value: f64,
    pub half_width: f64,
    pub confidence: f64,
}

/// Weights on the capped simplex `{w ≥ 0, Σw = 1, w ≤ cap}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub cap: f64,
}

/// Median of `samples`; for even lengths the midpoint of the two middle
/// order statistics.
pub fn median(samples: &[f64]) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptySamples);
    }
    let mut v = samples.to_vec();
    let n = v.len();
    let (lower, mid, _) = v.select_nth_unstable_by(n / 2, f64::total_cmp);
    let mid = *mid;
    if n % 2 == 1 {
        return Ok(mid);
    }
    let below = lower.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(0.5 * (below + mid))
}

/// `C·(α + √(log(1/δ)/M))·σ`.
pub fn median_half_width(spec: &ContaminationSpec, sigma: f64, delta: f64, m: usize) -> f64 {
    spec.c_univariate * (spec.alpha + ((1.0 / delta).ln() / m as f64).sqrt()) * sigma
}

pub fn robust_median(
    samples: &[f64],
    spec: &ContaminationSpec,
    sigma: f64,
    delta: f64,
) -> Result<RobustEstimate, StatsError> {
    if !(0.0..0.5).contains(&spec.alpha) {
        return Err(StatsError::InvalidAlpha(spec.alpha));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(StatsError::InvalidDelta(delta));
    }
    let value = median(samples)?;
    Ok(RobustEstimate {
        value,
        half_width: median_half_width(spec, sigma.max(0.0), delta, samples.len()),
        confidence: 1.0 - delta,
    })
}

fn check_dims(samples: &[DVector<f64>]) -> Result<usize, StatsError> {
    let d = samples.first().ok_or(StatsError::EmptySamples)?.len();
    for (index, x) in samples.iter().enumerate() {
        if x.len() != d {
            return Err(StatsError::DimensionMismatch { index, expected: d, got: x.len() });
        }
    }
    Ok(d)
}

pub fn sample_mean(samples: &[DVector<f64>]) -> DVector<f64> {
    let mut acc = DVector::zeros(samples[0].len());
    for x in samples {
        acc += x;
    }
    acc / samples.len() as f64
}

fn sum_distances(samples: &[DVector<f64>], y: &DVector<f64>) -> f64 {
    samples.iter().map(|x| (x - y).norm()).sum()
}

/// Weiszfeld iteration for `argmin_μ Σ ‖xᵢ − μ‖`, started at the coordinate
/// mean. Distances below [`GEOMEDIAN_SHIFT`] are clamped to it. Returns the
/// best iterate seen.
pub fn geometric_median(samples: &[DVector<f64>], tol: f64, max_iters: usize) -> DVector<f64> {
    assert!(!samples.is_empty(), "geometric median of an empty set");
    let mut y = sample_mean(samples);
    let mut best = y.clone();
    let mut best_obj = sum_distances(samples, &y);
    for _ in 0..max_iters {
        let mut num = DVector::zeros(y.len());
        let mut den = 0.0;
        for x in samples {
            let w = 1.0 / (x - &y).norm().max(GEOMEDIAN_SHIFT);
            num.axpy(w, x, 1.0);
            den += w;
        }
        let next = num / den;
        let step = (&next - &y).norm();
        y = next;
        let obj = sum_distances(samples, &y);
        if obj < best_obj {
            best_obj = obj;
            best.clone_from(&y);
        }
        if step < tol {
            break;
        }
    }
    best
}

/// Largest eigenvalue and a unit eigenvector of a positive semi-definite
/// matrix by power iteration from a random unit start.
pub fn power_iteration<R: Rng + ?Sized>(
    matrix: &DMatrix<f64>,
    rng: &mut R,
    max_iters: usize,
    tol: f64,
) -> (f64, DVector<f64>) {
    let d = matrix.nrows();
    let mut v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let n = v.norm();
    if n == 0.0 {
        v[0] = 1.0;
    } else {
        v /= n;
    }
    let mut lambda = v.dot(&(matrix * &v));
    for _ in 0..max_iters {
        let w = matrix * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return (0.0, v);
        }
        v = w / norm;
        let next = v.dot(&(matrix * &v));
        let change = (next - lambda).abs();
        lambda = next;
        if change <= tol * lambda.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    (lambda, v)
}

struct Centered<'a> {
    centered: Vec<DVector<f64>>,
    sigma: &'a DMatrix<f64>,
    sigma_norm: f64,
}

impl Centered<'_> {
    fn excess(&self, w: &[f64]) -> DMatrix<f64> {
        let d = self.sigma.nrows();
        weighted_outer_sum(d, w.iter().zip(&self.centered).map(|(w, y)| (*w, y))) - self.sigma
    }

    fn objective(&self, w: &[f64]) -> f64 {
        let eig = SymmetricEigen::new(self.excess(w));
        eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0)
    }
}

/// KL (entropic) projection of a positive vector onto the capped simplex.
fn project_capped_simplex(v: &[f64], cap: f64) -> Vec<f64> {
    let n = v.len();
    let mut capped = vec![false; n];
    loop {
        let n_capped = capped.iter().filter(|c| **c).count();
        let free_mass: f64 = v.iter().zip(&capped).filter(|(_, c)| !**c).map(|(x, _)| *x).sum();
        let remaining = 1.0 - n_capped as f64 * cap;
        if free_mass <= 0.0 {
            // Only reachable when every free entry underflowed to zero.
            let free = n - n_capped;
            return (0..n).map(|i| if capped[i] { cap } else { remaining / free as f64 }).collect();
        }
        let scale = remaining / free_mass;
        let mut changed = false;
        for i in 0..n {
            if !capped[i] && v[i] * scale > cap {
                capped[i] = true;
                changed = true;
            }
        }
        if !changed {
            return (0..n).map(|i| if capped[i] { cap } else { v[i] * scale }).collect();
        }
    }
}

/// `λ_max(Σᵢ wᵢ(xᵢ−c)(xᵢ−c)' − Σ) ∨ 0`.
pub fn weight_objective(samples: &[DVector<f64>], center: &DVector<f64>, covariance: &SpdMatrix, w: &[f64]) -> f64 {
    let c = Centered {
        centered: samples.iter().map(|x| x - center).collect(),
        sigma: covariance.matrix(),
        sigma_norm: 0.0,
    };
    c.objective(w)
}

/// Approximately minimizes [`weight_objective`] over the capped simplex by
/// exponentiated-gradient steps. The subgradient at `w` is `(u'yᵢ)²` with
/// `u` the top eigenvector of `Σ_w − Σ`; a step is accepted only if it
/// lowers the objective, otherwise the step size is halved.
pub fn weight_step<R: Rng + ?Sized>(
    samples: &[DVector<f64>],
    center: &DVector<f64>,
    covariance: &SpdMatrix,
    cap: f64,
    rng: &mut R,
) -> WeightVector {
    let m = samples.len();
    assert!(cap * m as f64 >= 1.0 - 1e-12, "cap too small for the simplex");
    let sigma = covariance.matrix();
    let sigma_norm = covariance.eigen_range().1;
    let ctx = Centered { centered: samples.iter().map(|x| x - center).collect(), sigma, sigma_norm };

    let mut w = vec![1.0 / m as f64; m];
    let mut obj = ctx.objective(&w);
    if obj <= 0.0 {
        return WeightVector { weights: w, cap };
    }
    let mut eta = 1.0;
    for _ in 0..WEIGHT_STEP_ITERS {
        // Shift by ‖Σ‖ so the matrix is positive semi-definite.
        let shifted = ctx.excess(&w) + DMatrix::identity(sigma.nrows(), sigma.nrows()) * ctx.sigma_norm;
        let (_, u) = power_iteration(&shifted, rng, POWER_ITERS, POWER_TOL);
        let grad: Vec<f64> = ctx.centered.iter().map(|y| u.dot(y).powi(2)).collect();
        let gmax = grad.iter().cloned().fold(0.0, f64::max);
        if gmax <= 0.0 {
            break;
        }
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let step = eta / gmax;
            let raw: Vec<f64> = w.iter().zip(&grad).map(|(wi, g)| wi * (-step * g).exp()).collect();
            let cand = project_capped_simplex(&raw, cap);
            let cand_obj = ctx.objective(&cand);
            if cand_obj < obj {
                w = cand;
                obj = cand_obj;
                accepted = true;
                eta *= 1.5;
                break;
            }
            eta *= 0.5;
        }
        if !accepted || obj <= 0.0 {
            break;
        }
    }
    WeightVector { weights: w, cap }
}

/// Iteration count `N = 0 ∨ ⌈(log(4r) − 2log(α(1−2α))) / (2log(1−2α) − log α − log(1−α))⌉`
/// for effective rank `r = tr Σ / ‖Σ‖₂`.
pub fn itw_iteration_count(alpha: f64, effective_rank: f64) -> usize {
    let num = (4.0 * effective_rank).ln() - 2.0 * (alpha * (1.0 - 2.0 * alpha)).ln();
    let den = 2.0 * (1.0 - 2.0 * alpha).ln() - alpha.ln() - (1.0 - alpha).ln();
    let n = (num / den).ceil();
    if n.is_finite() && n > 0.0 { n as usize } else { 0 }
}

/// Iteratively reweighted mean of `samples`, with known inlier covariance.
/// `α = 0` returns the sample mean.
pub fn itw_estimate<R: Rng + ?Sized>(
    samples: &[DVector<f64>],
    spec: &ContaminationSpec,
    covariance: &SpdMatrix,
    rng: &mut R,
) -> Result<DVector<f64>, StatsError> {
    let alpha = spec.alpha;
    if !(alpha >= 0.0) {
        return Err(StatsError::InvalidAlpha(alpha));
    }
    if alpha >= ITW_ALPHA_LIMIT {
        return Err(StatsError::AlphaTooLarge(alpha));
    }
    if samples.len() < 2 {
        return Err(StatsError::TooFewSamples(samples.len()));
    }
    check_dims(samples)?;
    if alpha == 0.0 {
        return Ok(sample_mean(samples));
    }
    let m = samples.len();
    let cap = 1.0 / ((1.0 - alpha) * m as f64);
    let (_, sigma_norm) = covariance.eigen_range();
    let effective_rank = covariance.matrix().trace() / sigma_norm;
    let n = itw_iteration_count(alpha, effective_rank);
    let mut v = geometric_median(samples, GEOMEDIAN_TOL, GEOMEDIAN_MAX_ITERS);
    for _ in 0..n {
        let w = weight_step(samples, &v, covariance, cap, rng);
        let mut next = DVector::zeros(v.len());
        for (wi, x) in w.weights.iter().zip(samples) {
            next.axpy(*wi, x, 1.0);
        }
        v = next;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v2(x: f64, y: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y])
    }

    #[test]
    fn test_median_single() {
        let e = robust_median(&[3.0], &ContaminationSpec::default(), 1.0, 0.1).unwrap();
        assert_eq!(e.value, 3.0);
    }

    #[test]
    fn test_median_even_midpoint() {
        let e = robust_median(&[1.0, 2.0, 3.0, 10.0], &ContaminationSpec::default(), 1.0, 0.1).unwrap();
        assert_eq!(e.value, 2.5);
    }

    #[test]
    fn test_median_width_formula() {
        let spec = ContaminationSpec { alpha: 0.1, c_univariate: 2.5, c_highdim: 4.0 };
        let e = robust_median(&[3.0, 1.0, 2.0], &spec, 2.0, 0.05).unwrap();
        assert_eq!(e.value, 2.0);
        let expected = 2.5 * (0.1 + ((1.0_f64 / 0.05).ln() / 3.0).sqrt()) * 2.0;
        assert_eq!(e.half_width, expected);
        assert!((e.confidence - 0.95).abs() < 1e-15);
    }

    #[test]
    fn test_median_errors() {
        let spec = ContaminationSpec::default();
        assert_eq!(robust_median(&[], &spec, 1.0, 0.1).unwrap_err(), StatsError::EmptySamples);
        assert_eq!(
            robust_median(&[1.0], &ContaminationSpec::new(0.5), 1.0, 0.1).unwrap_err(),
            StatsError::InvalidAlpha(0.5)
        );
        assert!(matches!(robust_median(&[1.0], &spec, 1.0, 1.0), Err(StatsError::InvalidDelta(_))));
    }

    #[test]
    fn test_geometric_median_single() {
        let x = v2(0.3, -2.0);
        assert_eq!(geometric_median(&[x.clone()], 1e-12, 100), x);
    }

    #[test]
    fn test_geometric_median_triangle() {
        let h = 3.0_f64.sqrt() / 2.0;
        let pts = [v2(0.0, 0.0), v2(1.0, 0.0), v2(0.5, h)];
        let gm = geometric_median(&pts, 1e-12, 1000);
        assert!((gm - v2(0.5, h / 3.0)).norm() < 1e-8);
    }

    #[test]
    fn test_geometric_median_square() {
        let pts = [v2(0.0, 0.0), v2(1.0, 0.0), v2(0.0, 1.0), v2(1.0, 1.0)];
        let gm = geometric_median(&pts, 1e-12, 1000);
        assert!((gm - v2(0.5, 0.5)).norm() < 1e-10);
    }

    #[test]
    fn test_geometric_median_at_sample() {
        // The median of collinear points is the middle one, where the
        // Weiszfeld step is singular.
        let pts = [v2(0.0, 0.0), v2(1.0, 0.0), v2(5.0, 0.0)];
        let gm = geometric_median(&pts, 1e-12, 5000);
        assert!((gm - v2(1.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn test_capped_projection() {
        let w = project_capped_simplex(&[10.0, 1.0, 1.0, 1.0, 1.0], 0.25);
        assert!((w[0] - 0.25).abs() < 1e-15);
        for &x in &w[1..] {
            assert!((x - 0.1875).abs() < 1e-15);
        }
        let w = project_capped_simplex(&[1.0, 3.0], 1.0);
        assert!((w[0] - 0.25).abs() < 1e-15 && (w[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn test_weight_step_identical_samples_uniform() {
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let samples = vec![x.clone(); 6];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = weight_step(&samples, &x, &SpdMatrix::identity(3), 0.25, &mut rng);
        assert_eq!(w.weights, vec![1.0 / 6.0; 6]);
    }

    #[test]
    fn test_weight_step_outlier_against_vertices() {
        let xs = [0.1, -0.2, 0.05, 0.15, 40.0];
        let samples: Vec<DVector<f64>> = xs.iter().map(|x| DVector::from_vec(vec![*x])).collect();
        let center = DVector::from_vec(vec![0.1]);
        let sigma = SpdMatrix::new(DMatrix::from_element(1, 1, 0.01)).unwrap();
        let cap = 0.25;

        // Oracle: the capped simplex with cap 1/4 over 5 points has the five
        // vertices that put 1/4 on all points but one.
        let (best_vertex, best_obj) = (0..5)
            .map(|zero| {
                let w: Vec<f64> = (0..5).map(|i| if i == zero { 0.0 } else { 0.25 }).collect();
                (zero, weight_objective(&samples, &center, &sigma, &w))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert_eq!(best_vertex, 4);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = weight_step(&samples, &center, &sigma, cap, &mut rng);
        assert!(w.weights[4] < 1e-6, "outlier weight {}", w.weights[4]);
        for &wi in &w.weights[..4] {
            assert!((wi - 0.25).abs() < 1e-6);
        }
        let obj = weight_objective(&samples, &center, &sigma, &w.weights);
        assert!(obj <= best_obj + 1e-6);
    }

    #[test]
    fn test_weight_step_descends() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<DVector<f64>> = (0..40)
            .map(|i| {
                let base = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
                if i < 8 { base + DVector::from_element(4, 6.0) } else { base }
            })
            .collect();
        let center = geometric_median(&samples, 1e-10, 1000);
        let sigma = SpdMatrix::identity(4);
        let cap = 1.0 / (0.8 * 40.0);
        let w = weight_step(&samples, &center, &sigma, cap, &mut rng);
        let sum: f64 = w.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(w.weights.iter().all(|&x| (0.0..=cap + 1e-12).contains(&x)));
        let uniform = vec![1.0 / 40.0; 40];
        assert!(
            weight_objective(&samples, &center, &sigma, &w.weights)
                <= weight_objective(&samples, &center, &sigma, &uniform)
        );
    }

    #[test]
    fn test_iteration_count() {
        assert_eq!(itw_iteration_count(0.1, 5.0), 5);
        assert_eq!(itw_iteration_count(0.2, 5.0), 9);
    }

    #[test]
    fn test_itw_alpha_zero_is_mean() {
        let samples = vec![v2(1.0, 2.0), v2(3.0, -4.0), v2(100.0, 0.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = itw_estimate(&samples, &ContaminationSpec::new(0.0), &SpdMatrix::identity(2), &mut rng).unwrap();
        assert!((v - sample_mean(&samples)).norm() < 1e-15);
    }

    #[test]
    fn test_itw_identical_cluster() {
        let x = v2(-0.5, 0.25);
        let samples = vec![x.clone(); 10];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = itw_estimate(&samples, &ContaminationSpec::new(0.1), &SpdMatrix::identity(2), &mut rng).unwrap();
        assert!((v - x).norm() < 1e-12);
    }

    #[test]
    fn test_itw_two_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inliers: Vec<DVector<f64>> = (0..6)
            .map(|_| v2(1.0 + rng.sample::<f64, _>(StandardNormal), 1.0 + rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let mut samples = inliers.clone();
        samples.push(v2(100.0, -100.0));
        samples.push(v2(100.0, -100.0));
        let inlier_mean = sample_mean(&inliers);
        let plain = sample_mean(&samples);
        let v = itw_estimate(&samples, &ContaminationSpec::new(0.25), &SpdMatrix::identity(2), &mut rng).unwrap();
        let err = (&v - &inlier_mean).norm();
        assert!(err <= 1.5, "distance {err}");
        assert!(err < (&plain - &inlier_mean).norm());
    }

    #[test]
    fn test_itw_errors() {
        let samples = vec![v2(0.0, 0.0), v2(1.0, 1.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let id = SpdMatrix::identity(2);
        assert_eq!(
            itw_estimate(&samples, &ContaminationSpec::new(0.3), &id, &mut rng).unwrap_err(),
            StatsError::AlphaTooLarge(0.3)
        );
        assert_eq!(
            itw_estimate(&samples[..1], &ContaminationSpec::new(0.1), &id, &mut rng).unwrap_err(),
            StatsError::TooFewSamples(1)
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn median_permutation_and_translation(
                mut xs in proptest::collection::vec(-1e3f64..1e3, 1..40),
                shift in -100f64..100.0,
                seed in any::<u64>(),
            ) {
                let m = median(&xs).unwrap();
                let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(m >= lo && m <= hi);
                let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
                prop_assert!((median(&shifted).unwrap() - (m + shift)).abs() <= 1e-9 * (1.0 + m.abs() + shift.abs()));
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                use rand::seq::SliceRandom;
                xs.shuffle(&mut rng);
                prop_assert_eq!(median(&xs).unwrap(), m);
            }
        }
    }
}
