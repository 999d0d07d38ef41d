//! Plain re-implementations used as oracles: phased elimination without the
//! library's design solver, samplers or linear algebra helpers, and the
//! single-phase SupLinUCB estimate with a dense explicit inverse.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use robust_bandits::algorithms::{base_linucb, SupLinState};
use robust_bandits::env::BanditInstance;
use robust_bandits::robust_stats::ContaminationSpec;

/// D-optimal weights by the multiplicative algorithm (equivalent to the
/// G-optimal design by Kiefer–Wolfowitz).
fn design(arms: &[DVector<f64>]) -> Vec<f64> {
    let d = arms[0].len() as f64;
    let mut w = vec![1.0 / arms.len() as f64; arms.len()];
    for _ in 0..20_000 {
        let mut v = DMatrix::zeros(arms[0].len(), arms[0].len());
        for (a, wa) in arms.iter().zip(&w) {
            v += a * a.transpose() * *wa;
        }
        let inv = v.try_inverse().expect("arms span the space");
        let g: Vec<f64> = arms.iter().map(|a| (a.transpose() * &inv * a)[(0, 0)]).collect();
        let gmax = g.iter().cloned().fold(0.0, f64::max);
        if gmax <= d * (1.0 + 1e-9) {
            break;
        }
        for (wa, ga) in w.iter_mut().zip(&g) {
            *wa *= ga / d;
        }
    }
    let w: Vec<f64> = w.iter().map(|&x| if x < 1e-4 { 0.0 } else { x }).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Group regret of one run, α = 0.
pub fn oracle_group_regret(inst: &BanditInstance, m: usize, horizon: u64, delta: f64, c: f64, seed: u64) -> f64 {
    let k = inst.n_arms();
    let d = inst.dim();
    let arms: Vec<DVector<f64>> = (0..k).map(|a| inst.arms().arm(a).clone()).collect();
    let theta = inst.theta_star().clone();
    let means: Vec<f64> = arms.iter().map(|a| a.dot(&theta)).collect();
    let best = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dbar = delta / (10.0 * k as f64);
    let mut active: Vec<usize> = (0..k).collect();
    let mut used = 0u64;
    let mut regret = 0.0;
    let mut ell = 0;
    while used < horizon {
        if active.len() == 1 {
            regret += (horizon - used) as f64 * (best - means[active[0]]);
            break;
        }
        ell += 1;
        let eps = 0.5f64.powi(ell);
        let dl = dbar / (k as f64 * (ell * ell) as f64);
        let act_arms: Vec<DVector<f64>> = active.iter().map(|&a| arms[a].clone()).collect();
        let w = design(&act_arms);
        let support: Vec<usize> = (0..active.len()).filter(|&j| w[j] > 0.0).collect();
        let mut counts: Vec<u64> = support
            .iter()
            .map(|&j| {
                let ta = (w[j] * d as f64 * (1.0 / dl).ln() / (eps * eps)).ceil();
                (ta / m as f64).ceil() as u64
            })
            .collect();
        let total: u64 = counts.iter().sum();
        let truncated = used + total > horizon;
        if truncated {
            let mut left = horizon - used;
            for c in counts.iter_mut() {
                *c = (*c).min(left);
                left -= *c;
            }
        }
        for (&j, &c) in support.iter().zip(&counts) {
            regret += c as f64 * (best - means[active[j]]);
        }
        used += counts.iter().sum::<u64>();
        if counts.contains(&0) {
            break;
        }
        let mut vt = DMatrix::zeros(d, d);
        for (&j, &c) in support.iter().zip(&counts) {
            vt += &act_arms[j] * act_arms[j].transpose() * c as f64;
        }
        let vinv = vt.try_inverse().expect("support spans");
        let mut thetas = Vec::new();
        for _ in 0..m {
            let mut y = DVector::zeros(d);
            for (&j, &c) in support.iter().zip(&counts) {
                let mut sum = 0.0;
                for _ in 0..c {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    sum += means[active[j]] + z;
                }
                y += &act_arms[j] * sum;
            }
            thetas.push(&vinv * y);
        }
        let mu: Vec<f64> = act_arms.iter().map(|b| median(thetas.iter().map(|t| t.dot(b)).collect())).collect();
        let gamma = 2f64.sqrt() * c * eps;
        let top = mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        active = active.iter().zip(&mu).filter(|(_, &u)| top - u <= 2.0 * gamma).map(|(&a, _)| a).collect();
        if truncated {
            break;
        }
    }
    regret * m as f64
}

pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn random_vec(d: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.random_range(-0.5..0.5))
}

/// Largest deviation of `base_linucb` from a dense explicit-inverse
/// computation on a random three-round phase.
pub fn linucb_max_error(seed: u64, robust: bool) -> f64 {
    let (d, m, k) = (3, 5, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = SupLinState::new(d, m, 1);
    let mut xs = Vec::new();
    let mut rs = Vec::new();
    for t in 0..3 {
        let x = random_vec(d, &mut rng);
        let r: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        state.phases[0].update(t, &x, &r);
        xs.push(x);
        rs.push(r);
    }
    let features: Vec<DVector<f64>> = (0..k).map(|_| random_vec(d, &mut rng)).collect();
    let spec = ContaminationSpec::new(0.2);
    let delta_bar = 1e-3;
    let got = base_linucb(&mut state.phases[0], &features, &(0..k).collect::<Vec<_>>(), &spec, delta_bar, robust);

    let mut a = DMatrix::identity(d, d) / m as f64;
    for x in &xs {
        a += x * x.transpose();
    }
    let inv = a.try_inverse().unwrap();
    let thetas: Vec<DVector<f64>> = (0..m)
        .map(|i| {
            let mut b = DVector::zeros(d);
            for (x, r) in xs.iter().zip(&rs) {
                b += x * r[i];
            }
            &inv * b
        })
        .collect();
    let alpha = if robust { spec.alpha } else { 0.0 };
    let factor = alpha + 2.0 * spec.c_univariate * ((1.0 / delta_bar).ln() / m as f64).sqrt();
    let mut worst: f64 = 0.0;
    for (x, (r_hat, w)) in features.iter().zip(&got) {
        let vals: Vec<f64> = thetas.iter().map(|t| t.dot(x)).collect();
        let expect_r = if robust { median(vals) } else { vals.iter().sum::<f64>() / m as f64 };
        let expect_w = factor * (x.transpose() * &inv * x)[(0, 0)].sqrt();
        worst = worst.max((r_hat - expect_r).abs()).max((w - expect_w).abs());
    }
    worst
}
