//! Server-side estimation for generalized-linear rewards.
//!
//! With `h(θ) = Σ_a m_a μ(⟨θ, a⟩) a`, the server whitens the agents'
//! statistics `Y_i` by `Ṽ^{-1/2}`, takes their robust mean `X`, and solves
//! `h(θ) = Ṽ^{1/2} X`. The Jacobian `Σ m_a μ̇(⟨θ, a⟩) aa'` is positive
//! definite whenever the support spans, so damped Newton converges.

use nalgebra::{Cholesky, DVector};
use rand::Rng;

use super::AlgoError;
use crate::env::LinkFunction;
use crate::linalg::{weighted_outer_sum, SpdMatrix};
use crate::robust_stats::{itw_estimate, ContaminationSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iters: usize,
    pub max_backtracks: usize,
    pub backtrack_factor: f64,
    /// Residual tolerance relative to `1 + ‖target‖`.
    pub rel_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iters: 100, max_backtracks: 30, backtrack_factor: 0.5, rel_tol: 1e-8 }
    }
}

/// `h(θ) = Σ wᵢ μ(⟨θ, pᵢ⟩) pᵢ`.
pub fn h_map(link: &LinkFunction, points: &[DVector<f64>], weights: &[f64], theta: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(theta.len());
    for (p, w) in points.iter().zip(weights) {
        out.axpy(w * link.mu(theta.dot(p)), p, 1.0);
    }
    out
}

fn jacobian(link: &LinkFunction, points: &[DVector<f64>], weights: &[f64], theta: &DVector<f64>) -> nalgebra::DMatrix<f64> {
    weighted_outer_sum(theta.len(), points.iter().zip(weights).map(|(p, w)| (w * link.mu_dot(theta.dot(p)), p)))
}

/// Solves `h(θ) = target` by damped Newton from `start`. Returns the
/// solution and the number of outer iterations.
pub fn newton_solve(
    link: &LinkFunction,
    points: &[DVector<f64>],
    weights: &[f64],
    target: &DVector<f64>,
    start: &DVector<f64>,
    opts: &NewtonOptions,
) -> Result<(DVector<f64>, usize), AlgoError> {
    let tol = opts.rel_tol * (1.0 + target.norm());
    let mut theta = start.clone();
    let mut resid = h_map(link, points, weights, &theta) - target;
    let mut rnorm = resid.norm();
    let mut converged_at = None;
    for iter in 0..opts.max_iters {
        if rnorm <= tol && converged_at.is_none() {
            converged_at = Some(iter);
        }
        // Two extra steps past the tolerance, kept only if they help.
        if let Some(c) = converged_at {
            if iter >= c + 2 {
                break;
            }
        }
        let jac = jacobian(link, points, weights, &theta);
        let Some(chol) = Cholesky::new(jac) else {
            break;
        };
        let step = chol.solve(&resid);
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..=opts.max_backtracks {
            let cand = &theta - &step * scale;
            let cand_resid = h_map(link, points, weights, &cand) - target;
            let cand_norm = cand_resid.norm();
            if cand_norm < rnorm {
                theta = cand;
                resid = cand_resid;
                rnorm = cand_norm;
                improved = true;
                break;
            }
            scale *= opts.backtrack_factor;
        }
        if !improved {
            break;
        }
    }
    if rnorm <= tol {
        Ok((theta, converged_at.unwrap_or(opts.max_iters)))
    } else {
        Err(AlgoError::NewtonDivergence { residual: rnorm, tol })
    }
}

/// Robust estimate of `θ*` from the agents' statistics `Y_i`.
///
/// `points`/`weights` are the support arms and per-agent pull counts in the
/// coordinates of `vtilde = Σ m_a aa'`.
#[allow(clippy::too_many_arguments)]
pub fn glm_server_estimate<R: Rng + ?Sized>(
    link: &LinkFunction,
    points: &[DVector<f64>],
    weights: &[f64],
    vtilde: &SpdMatrix,
    messages: &[DVector<f64>],
    spec: &ContaminationSpec,
    start: &DVector<f64>,
    opts: &NewtonOptions,
    rng: &mut R,
) -> Result<DVector<f64>, AlgoError> {
    let (half, inv_half) = vtilde.sqrt_pair();
    let whitened: Vec<DVector<f64>> = messages.iter().map(|y| &inv_half * y).collect();
    let x = if whitened.len() >= 2 {
        itw_estimate(&whitened, spec, &SpdMatrix::identity(vtilde.dim()), rng)?
    } else {
        whitened[0].clone()
    };
    let target = half * x;
    Ok(newton_solve(link, points, weights, &target, start, opts)?.0)
}
