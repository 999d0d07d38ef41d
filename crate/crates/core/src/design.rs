//! Approximate G-optimal experimental design.
//!
//! For a design π over arms, `V(π) = Σ π(a) aa'` and
//! `g(π) = max_a ‖a‖²_{V(π)⁻¹}`. By Kiefer-Wolfowitz the optimum equals the
//! dimension `m` of the arms' span, and minimizing `g` is equivalent to
//! maximizing `log det V(π)`. The solver runs Frank-Wolfe on the log-det
//! surrogate with the closed-form step, starting from a small spanning
//! subset, and then prunes negligible weights.
//!
//! Arm sets that do not span ℝ^d are handled by working in an orthonormal
//! basis of their span; weights are reported against the original arms.

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{span_basis, weighted_outer_sum};

/// Norm slack accepted by [`ArmSet::new`].
pub const NORM_TOL: f64 = 1e-12;

pub const DEFAULT_MAX_ITERS: usize = 1000;
pub const DEFAULT_TOL: f64 = 0.01;
/// Weight floor applied after Frank-Wolfe terminates.
pub const DEFAULT_PRUNE_FLOOR: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("arm set is empty")]
    EmptyArmSet,
    #[error("every arm is the zero vector")]
    DegenerateArm,
    #[error("arm {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("arm {index} has norm {norm} > 1")]
    NormTooLarge { index: usize, norm: f64 },
    #[error("Frank-Wolfe stopped at g = {g} above the bound {bound}")]
    NotConverged { g: f64, bound: f64 },
}

/// An ordered list of `K` arms in ℝ^d with norms at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSet {
    arms: Vec<DVector<f64>>,
    dim: usize,
}

impl ArmSet {
    pub fn new(arms: Vec<DVector<f64>>) -> Result<Self, DesignError> {
        let first = arms.first().ok_or(DesignError::EmptyArmSet)?;
        let dim = first.len();
        for (index, a) in arms.iter().enumerate() {
            if a.len() != dim {
                return Err(DesignError::DimensionMismatch { index, expected: dim, got: a.len() });
            }
            let norm = a.norm();
            if norm > 1.0 + NORM_TOL {
                return Err(DesignError::NormTooLarge { index, norm });
            }
        }
        Ok(Self { arms, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DesignError> {
        Self::new(rows.iter().map(|r| DVector::from_column_slice(r)).collect())
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arm(&self, index: usize) -> &DVector<f64> {
        &self.arms[index]
    }

    pub fn arms(&self) -> &[DVector<f64>] {
        &self.arms
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DVector<f64>> {
        self.arms.iter()
    }

    /// Arms at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> ArmSet {
        ArmSet { arms: indices.iter().map(|&i| self.arms[i].clone()).collect(), dim: self.dim }
    }
}

/// A probability distribution over the arms of an [`ArmSet`].
#[derive(Debug, Clone)]
pub struct Design {
    weights: Vec<f64>,
    support: Vec<usize>,
    g_value: f64,
    rank: usize,
    basis: DMatrix<f64>,
    coords: Vec<DVector<f64>>,
    iterations: usize,
    logdet_history: Vec<f64>,
}

impl Design {
    /// Weight of every arm, aligned with the arm set the design was built on.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, arm: usize) -> f64 {
        self.weights[arm]
    }

    /// Indices with positive weight, ascending.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// `max_a ‖a‖²_{V(π)⁻¹}` over the arm set (in span coordinates).
    pub fn g_value(&self) -> f64 {
        self.g_value
    }

    /// Dimension of the span of the arm set.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Orthonormal basis of the span, one column per dimension.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `log det V(π)` after every Frank-Wolfe step, starting from the
    /// initial design.
    pub fn logdet_history(&self) -> &[f64] {
        &self.logdet_history
    }

    fn recompute(&mut self) {
        self.support = (0..self.weights.len()).filter(|&i| self.weights[i] > 0.0).collect();
        self.g_value = g_of(&self.coords, &self.weights, self.rank).map(|(g, _)| g).unwrap_or(f64::INFINITY);
    }
}

/// Upper bound on the support size used by the learners: `48·m·max(1, ln ln m)`.
pub fn support_bound(m: usize) -> usize {
    let m_f = m as f64;
    let loglog = if m >= 3 { m_f.ln().ln().max(1.0) } else { 1.0 };
    (48.0 * m_f * loglog).floor() as usize
}

/// Returns (g, argmax) for the design, or `None` if `V(π)` is singular.
fn g_of(coords: &[DVector<f64>], weights: &[f64], m: usize) -> Option<(f64, usize)> {
    let v = weighted_outer_sum(m, coords.iter().zip(weights).filter(|(_, w)| **w > 0.0).map(|(c, w)| (*w, c)));
    let chol = Cholesky::new(v)?;
    let l = chol.l();
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, c) in coords.iter().enumerate() {
        let y = l.solve_lower_triangular(c)?;
        let g = y.norm_squared();
        if g > best.0 {
            best = (g, i);
        }
    }
    Some(best)
}

fn logdet(coords: &[DVector<f64>], weights: &[f64], m: usize) -> f64 {
    let v = weighted_outer_sum(m, coords.iter().zip(weights).filter(|(_, w)| **w > 0.0).map(|(c, w)| (*w, c)));
    match Cholesky::new(v) {
        Some(ch) => 2.0 * ch.l().diagonal().iter().map(|x| x.ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    }
}

/// Greedy spanning subset: pivoted Gram-Schmidt picks `m` arms that span,
/// and each pick is paired with the arm most opposed to it.
fn initial_subset(coords: &[DVector<f64>], m: usize) -> Vec<usize> {
    let mut residual: Vec<DVector<f64>> = coords.to_vec();
    let mut chosen: Vec<usize> = Vec::with_capacity(2 * m);
    for _ in 0..m {
        let (pick, norm) = residual
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.norm()))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        if norm <= 0.0 {
            break;
        }
        let dir = &residual[pick] / norm;
        for r in residual.iter_mut() {
            let proj = r.dot(&dir);
            r.axpy(-proj, &dir, 1.0);
        }
        if !chosen.contains(&pick) {
            chosen.push(pick);
        }
    }
    let primary: Vec<usize> = chosen.clone();
    for &p in &primary {
        let opposite = (0..coords.len())
            .min_by(|&a, &b| coords[a].dot(&coords[p]).total_cmp(&coords[b].dot(&coords[p])))
            .expect("non-empty");
        if !chosen.contains(&opposite) {
            chosen.push(opposite);
        }
    }
    chosen
}

/// Solves the approximate G-optimal design problem on `arms`.
///
/// Frank-Wolfe stops once `g ≤ m·(1 + tol)` or after `max_iters` steps. An
/// error is returned only when the final design violates `g ≤ 2m`.
pub fn solve_g_optimal(arms: &ArmSet, max_iters: usize, tol: f64) -> Result<Design, DesignError> {
    if arms.is_empty() {
        return Err(DesignError::EmptyArmSet);
    }
    let d = arms.dim();
    let refs: Vec<&DVector<f64>> = arms.iter().collect();
    let basis = span_basis(d, &refs);
    let m = basis.ncols();
    if m == 0 {
        return Err(DesignError::DegenerateArm);
    }
    let coords: Vec<DVector<f64>> = arms.iter().map(|a| basis.tr_mul(a)).collect();
    let k = coords.len();

    let init = initial_subset(&coords, m);
    let mut weights = vec![0.0; k];
    for &i in &init {
        weights[i] = 1.0 / init.len() as f64;
    }

    let target = m as f64 * (1.0 + tol);
    let mut logdet_history = vec![logdet(&coords, &weights, m)];
    let mut best_weights = weights.clone();
    let mut best_g = f64::INFINITY;
    let mut iterations = 0;
    loop {
        let Some((g, pick)) = g_of(&coords, &weights, m) else {
            // Numerical breakdown; fall back to the best iterate seen.
            break;
        };
        if g < best_g {
            best_g = g;
            best_weights.clone_from(&weights);
        }
        if g <= target || iterations >= max_iters || g <= 1.0 {
            break;
        }
        let step = (g / m as f64 - 1.0) / (g - 1.0);
        for w in weights.iter_mut() {
            *w *= 1.0 - step;
        }
        weights[pick] += step;
        iterations += 1;
        logdet_history.push(logdet(&coords, &weights, m));
    }

    let mut design = Design {
        weights: best_weights,
        support: Vec::new(),
        g_value: best_g,
        rank: m,
        basis,
        coords,
        iterations,
        logdet_history,
    };
    design.recompute();

    let pruned = support_prune(&design, DEFAULT_PRUNE_FLOOR);
    if pruned.g_value <= 2.0 * m as f64 {
        design = pruned;
    }
    if design.g_value > 2.0 * m as f64 {
        return Err(DesignError::NotConverged { g: design.g_value, bound: 2.0 * m as f64 });
    }
    Ok(design)
}

/// Zeroes weights below `floor`, renormalizes, and recomputes `g`. The
/// largest weight is always kept.
pub fn support_prune(design: &Design, floor: f64) -> Design {
    let mut out = design.clone();
    if design.weights.iter().all(|&w| w >= floor || w == 0.0) {
        return out;
    }
    let keep_max = design
        .weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    for (i, w) in out.weights.iter_mut().enumerate() {
        if *w < floor && i != keep_max {
            *w = 0.0;
        }
    }
    let total: f64 = out.weights.iter().sum();
    for w in out.weights.iter_mut() {
        *w /= total;
    }
    out.recompute();
    out
}
