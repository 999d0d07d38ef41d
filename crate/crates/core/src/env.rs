//! Ground-truth environments: linear, generalized linear, and contextual.
//!
//! Rewards are `μ(⟨θ*, a⟩) + η` with `η ~ N(0, σ²)` and `σ = 1` unless a
//! test overrides it. Optimal arms are found by exact argmax over the true
//! means, lowest index first on ties.
//!
//! Plain-text formats (whitespace separated, one vector per line):
//!
//! * instance: `d K`, an optional `# link <name>` line, `θ*`, then the K arms;
//! * contexts: `d K T`, then `T·K` feature vectors in time-major order.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use statrs::function::erf::erf;
use thiserror::Error;

use crate::design::{ArmSet, DesignError, NORM_TOL};
use crate::rng::{labels, StreamKey};

/// Grid used to compute the derivative bounds of a link function.
pub const LINK_GRID_STEP: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("theta has dimension {got}, arms have {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("theta norm {0} exceeds 1")]
    ThetaNorm(f64),
    #[error("unknown link function '{0}'")]
    UnknownLink(String),
    #[error("unknown instance style '{0}'")]
    UnknownStyle(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Arms(#[from] DesignError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkKind {
    Identity,
    Logistic,
    Probit,
}

impl LinkKind {
    pub fn name(self) -> &'static str {
        match self {
            LinkKind::Identity => "identity",
            LinkKind::Logistic => "logistic",
            LinkKind::Probit => "probit",
        }
    }
}

impl FromStr for LinkKind {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, EnvError> {
        match s {
            "identity" | "linear" => Ok(LinkKind::Identity),
            "logistic" => Ok(LinkKind::Logistic),
            "probit" => Ok(LinkKind::Probit),
            other => Err(EnvError::UnknownLink(other.to_string())),
        }
    }
}

/// A link `μ` with `k1 = min(1, inf μ̇)` and `k2 = max(1, sup μ̇)` over
/// `|z| ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkFunction {
    kind: LinkKind,
    k1: f64,
    k2: f64,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl LinkFunction {
    pub fn new(kind: LinkKind) -> Self {
        let mut link = LinkFunction { kind, k1: 1.0, k2: 1.0 };
        let n = (2.0 / LINK_GRID_STEP).round() as i64;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=n {
            let z = -1.0 + i as f64 * LINK_GRID_STEP;
            let g = link.mu_dot(z);
            lo = lo.min(g);
            hi = hi.max(g);
        }
        link.k1 = lo.min(1.0);
        link.k2 = hi.max(1.0);
        link
    }

    pub fn identity() -> Self {
        Self::new(LinkKind::Identity)
    }

    pub fn logistic() -> Self {
        Self::new(LinkKind::Logistic)
    }

    pub fn probit() -> Self {
        Self::new(LinkKind::Probit)
    }

    pub fn kind(&self) -> LinkKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn k2(&self) -> f64 {
        self.k2
    }

    pub fn mu(&self, z: f64) -> f64 {
        match self.kind {
            LinkKind::Identity => z,
            LinkKind::Logistic => 1.0 / (1.0 + (-z).exp()),
            LinkKind::Probit => std_normal_cdf(z),
        }
    }

    pub fn mu_dot(&self, z: f64) -> f64 {
        match self.kind {
            LinkKind::Identity => 1.0,
            LinkKind::Logistic => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s)
            }
            LinkKind::Probit => std_normal_pdf(z),
        }
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A fixed arm set with a hidden parameter and a link.
#[derive(Debug, Clone)]
pub struct BanditInstance {
    theta_star: DVector<f64>,
    arms: ArmSet,
    link: LinkFunction,
    linear_means: Vec<f64>,
    means: Vec<f64>,
    optimal: usize,
    noise_sd: f64,
}

impl BanditInstance {
    pub fn new(theta_star: DVector<f64>, arms: ArmSet, link: LinkFunction) -> Result<Self, EnvError> {
        if theta_star.len() != arms.dim() {
            return Err(EnvError::DimensionMismatch { expected: arms.dim(), got: theta_star.len() });
        }
        let norm = theta_star.norm();
        if norm > 1.0 + NORM_TOL {
            return Err(EnvError::ThetaNorm(norm));
        }
        let linear_means: Vec<f64> = arms.iter().map(|a| theta_star.dot(a)).collect();
        let means: Vec<f64> = linear_means.iter().map(|&z| link.mu(z)).collect();
        let optimal = argmax_lowest(&means);
        Ok(Self { theta_star, arms, link, linear_means, means, optimal, noise_sd: 1.0 })
    }

    /// Same instance with a different link function.
    pub fn with_link(self, link: LinkFunction) -> Self {
        let sd = self.noise_sd;
        let mut out = Self::new(self.theta_star, self.arms, link).expect("validated on construction");
        out.noise_sd = sd;
        out
    }

    /// Overrides the noise standard deviation; meant for tests.
    pub fn with_noise_sd(mut self, sd: f64) -> Self {
        self.noise_sd = sd;
        self
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn arms(&self) -> &ArmSet {
        &self.arms
    }

    pub fn link(&self) -> &LinkFunction {
        &self.link
    }

    pub fn dim(&self) -> usize {
        self.arms.dim()
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn optimal_arm(&self) -> usize {
        self.optimal
    }

    /// Expected payoff `μ(⟨θ*, a⟩)`.
    pub fn mean(&self, arm: usize) -> f64 {
        self.means[arm]
    }

    /// `⟨θ*, a⟩`.
    pub fn linear_mean(&self, arm: usize) -> f64 {
        self.linear_means[arm]
    }

    /// Attack benchmark `⟨θ*, a*⟩`.
    pub fn benchmark(&self) -> f64 {
        self.linear_means[self.optimal]
    }

    fn check(&self, arm: usize) -> Result<(), EnvError> {
        if arm >= self.n_arms() {
            return Err(EnvError::IndexOutOfRange { index: arm, len: self.n_arms() });
        }
        Ok(())
    }

    /// One noisy reward of `arm`.
    pub fn sample_reward<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> Result<f64, EnvError> {
        self.check(arm)?;
        let eta: f64 = StandardNormal.sample(rng);
        Ok(self.means[arm] + self.noise_sd * eta)
    }

    /// Average of `n ≥ 1` independent rewards of `arm`, drawn in one step
    /// from its exact Gaussian law.
    pub fn sample_mean_reward<R: Rng + ?Sized>(&self, arm: usize, n: u64, rng: &mut R) -> Result<f64, EnvError> {
        self.check(arm)?;
        let eta: f64 = StandardNormal.sample(rng);
        Ok(self.means[arm] + self.noise_sd * eta / (n.max(1) as f64).sqrt())
    }

    /// `μ(⟨θ*, a*⟩) − μ(⟨θ*, a⟩)`.
    pub fn instantaneous_regret(&self, arm: usize) -> f64 {
        (self.means[self.optimal] - self.means[arm]).max(0.0)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.dim(), self.n_arms());
        if self.link.kind() != LinkKind::Identity {
            let _ = writeln!(s, "# link {}", self.link.name());
        }
        write_vector(&mut s, &self.theta_star);
        for a in self.arms.iter() {
            write_vector(&mut s, a);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, EnvError> {
        let mut link = LinkFunction::identity();
        let mut lines = Vec::new();
        for line in text.lines() {
            let t = line.trim();
            if let Some(rest) = t.strip_prefix('#') {
                let mut parts = rest.split_whitespace();
                if parts.next() == Some("link") {
                    let name = parts.next().ok_or_else(|| EnvError::Parse("missing link name".into()))?;
                    link = LinkFunction::new(name.parse()?);
                }
                continue;
            }
            if !t.is_empty() {
                lines.push(t);
            }
        }
        let header = parse_numbers::<usize>(lines.first().ok_or_else(|| EnvError::Parse("empty file".into()))?)?;
        let (d, k) = match header.as_slice() {
            [d, k] | [d, k, _] => (*d, *k),
            _ => return Err(EnvError::Parse("header must be 'd K'".into())),
        };
        if lines.len() != k + 2 {
            return Err(EnvError::Parse(format!("expected {} vector lines, found {}", k + 1, lines.len() - 1)));
        }
        let theta = parse_vector(lines[1], d)?;
        let arms = lines[2..].iter().map(|l| parse_vector(l, d)).collect::<Result<Vec<_>, _>>()?;
        Self::new(theta, ArmSet::new(arms)?, link)
    }
}

fn write_vector(s: &mut String, v: &DVector<f64>) {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
    s.push_str(&parts.join(" "));
    s.push('\n');
}

fn parse_numbers<T: FromStr>(line: &str) -> Result<Vec<T>, EnvError> {
    line.split_whitespace()
        .map(|tok| tok.parse::<T>().map_err(|_| EnvError::Parse(format!("bad number '{tok}'"))))
        .collect()
}

fn parse_vector(line: &str, d: usize) -> Result<DVector<f64>, EnvError> {
    let xs = parse_numbers::<f64>(line)?;
    if xs.len() != d {
        return Err(EnvError::Parse(format!("expected {d} entries, found {}", xs.len())));
    }
    Ok(DVector::from_vec(xs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceStyle {
    /// `θ* = 1/√d · 1`, arm coordinates i.i.d. uniform on `[−1/√d, 1/√d]`.
    UniformCube,
    /// `θ*` and every arm uniform on the unit ball.
    Random,
}

impl FromStr for InstanceStyle {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, EnvError> {
        match s {
            "uniform-cube" => Ok(InstanceStyle::UniformCube),
            "random" => Ok(InstanceStyle::Random),
            other => Err(EnvError::UnknownStyle(other.to_string())),
        }
    }
}

impl InstanceStyle {
    pub fn name(self) -> &'static str {
        match self {
            InstanceStyle::UniformCube => "uniform-cube",
            InstanceStyle::Random => "random",
        }
    }
}

fn uniform_cube<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    let h = 1.0 / (d as f64).sqrt();
    let u = Uniform::new_inclusive(-h, h).expect("valid bounds");
    DVector::from_fn(d, |_, _| u.sample(rng))
}

fn uniform_ball<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = g.norm();
        if n > 0.0 {
            let r: f64 = rng.random::<f64>().powf(1.0 / d as f64);
            return g * (r / n);
        }
    }
}

/// Seeded instance generator with identity link.
pub fn generate_instance(d: usize, k: usize, seed: u64, style: InstanceStyle) -> BanditInstance {
    assert!(d >= 1 && k >= 1, "need d, K >= 1");
    let mut rng = StreamKey::root(seed).split(labels::INSTANCE).stream();
    let (theta, arms) = match style {
        InstanceStyle::UniformCube => {
            let theta = DVector::from_element(d, 1.0 / (d as f64).sqrt());
            let arms = (0..k).map(|_| uniform_cube(d, rng.rng())).collect();
            (theta, arms)
        }
        InstanceStyle::Random => {
            let theta = uniform_ball(d, rng.rng());
            let arms = (0..k).map(|_| uniform_ball(d, rng.rng())).collect();
            (theta, arms)
        }
    };
    BanditInstance::new(theta, ArmSet::new(arms).expect("generated arms lie in the unit ball"), LinkFunction::identity())
        .expect("generated theta lies in the unit ball")
}

/// Feature vectors `x_{t,a}` for `t = 0..T`, either drawn lazily from a
/// seed or held in memory.
#[derive(Debug, Clone)]
pub enum ContextSequence {
    Seeded { d: usize, k: usize, horizon: usize, seed: u64 },
    Loaded { d: usize, k: usize, rounds: Vec<Vec<DVector<f64>>> },
}

impl ContextSequence {
    pub fn dim(&self) -> usize {
        match self {
            ContextSequence::Seeded { d, .. } | ContextSequence::Loaded { d, .. } => *d,
        }
    }

    pub fn n_arms(&self) -> usize {
        match self {
            ContextSequence::Seeded { k, .. } | ContextSequence::Loaded { k, .. } => *k,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            ContextSequence::Seeded { horizon, .. } => *horizon,
            ContextSequence::Loaded { rounds, .. } => rounds.len(),
        }
    }

    /// The `K` feature vectors of round `t` (zero-based).
    pub fn features(&self, t: usize) -> Result<Vec<DVector<f64>>, EnvError> {
        if t >= self.horizon() {
            return Err(EnvError::IndexOutOfRange { index: t, len: self.horizon() });
        }
        Ok(match self {
            ContextSequence::Seeded { d, k, seed, .. } => {
                let mut rng = StreamKey::root(*seed).split2(labels::CONTEXT, t as u64).stream();
                (0..*k).map(|_| uniform_cube(*d, rng.rng())).collect()
            }
            ContextSequence::Loaded { rounds, .. } => rounds[t].clone(),
        })
    }

    pub fn materialize(&self) -> Result<ContextSequence, EnvError> {
        let rounds = (0..self.horizon()).map(|t| self.features(t)).collect::<Result<Vec<_>, _>>()?;
        Ok(ContextSequence::Loaded { d: self.dim(), k: self.n_arms(), rounds })
    }

    pub fn to_text(&self) -> Result<String, EnvError> {
        let mut s = format!("{} {} {}\n", self.dim(), self.n_arms(), self.horizon());
        for t in 0..self.horizon() {
            for x in self.features(t)? {
                write_vector(&mut s, &x);
            }
        }
        Ok(s)
    }

    pub fn from_text(text: &str) -> Result<Self, EnvError> {
        let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
        let header = parse_numbers::<usize>(lines.first().ok_or_else(|| EnvError::Parse("empty file".into()))?)?;
        let [d, k, horizon] = header[..] else {
            return Err(EnvError::Parse("header must be 'd K T'".into()));
        };
        if lines.len() != 1 + k * horizon {
            return Err(EnvError::Parse(format!("expected {} vector lines, found {}", k * horizon, lines.len() - 1)));
        }
        let mut rounds = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let mut round = Vec::with_capacity(k);
            for a in 0..k {
                let x = parse_vector(lines[1 + t * k + a], d)?;
                let n = x.norm();
                if n > 1.0 + NORM_TOL {
                    return Err(EnvError::Arms(DesignError::NormTooLarge { index: t * k + a, norm: n }));
                }
                round.push(x);
            }
            rounds.push(round);
        }
        Ok(ContextSequence::Loaded { d, k, rounds })
    }
}

/// Seeded contexts with entries i.i.d. uniform on `[−1/√d, 1/√d]`.
pub fn generate_contexts(d: usize, k: usize, horizon: usize, seed: u64) -> ContextSequence {
    assert!(horizon >= 1, "need T >= 1");
    ContextSequence::Seeded { d, k, horizon, seed }
}

/// Contextual linear environment.
#[derive(Debug, Clone)]
pub struct ContextualEnv {
    theta_star: DVector<f64>,
    contexts: ContextSequence,
    noise_sd: f64,
}

/// The true means of one round and its optimal arm.
#[derive(Debug, Clone)]
pub struct Round {
    pub features: Vec<DVector<f64>>,
    pub means: Vec<f64>,
    pub optimal: usize,
}

impl Round {
    /// `⟨θ*, x_{t,a*} − x_{t,a}⟩`.
    pub fn regret(&self, arm: usize) -> f64 {
        (self.means[self.optimal] - self.means[arm]).max(0.0)
    }

    /// Attack benchmark `⟨θ*, x_{t,a*_t}⟩`.
    pub fn benchmark(&self) -> f64 {
        self.means[self.optimal]
    }
}

impl ContextualEnv {
    pub fn new(theta_star: DVector<f64>, contexts: ContextSequence) -> Result<Self, EnvError> {
        if theta_star.len() != contexts.dim() {
            return Err(EnvError::DimensionMismatch { expected: contexts.dim(), got: theta_star.len() });
        }
        let norm = theta_star.norm();
        if norm > 1.0 + NORM_TOL {
            return Err(EnvError::ThetaNorm(norm));
        }
        Ok(Self { theta_star, contexts, noise_sd: 1.0 })
    }

    /// `θ* = 1/√d · 1` with seeded uniform contexts.
    pub fn standard_setup(d: usize, k: usize, horizon: usize, seed: u64) -> Self {
        let theta = DVector::from_element(d, 1.0 / (d as f64).sqrt());
        Self::new(theta, generate_contexts(d, k, horizon, seed)).expect("valid setup")
    }

    pub fn with_noise_sd(mut self, sd: f64) -> Self {
        self.noise_sd = sd;
        self
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn contexts(&self) -> &ContextSequence {
        &self.contexts
    }

    pub fn dim(&self) -> usize {
        self.contexts.dim()
    }

    pub fn n_arms(&self) -> usize {
        self.contexts.n_arms()
    }

    pub fn horizon(&self) -> usize {
        self.contexts.horizon()
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn round(&self, t: usize) -> Result<Round, EnvError> {
        let features = self.contexts.features(t)?;
        let means: Vec<f64> = features.iter().map(|x| self.theta_star.dot(x)).collect();
        let optimal = argmax_lowest(&means);
        Ok(Round { features, means, optimal })
    }

    pub fn sample_reward<R: Rng + ?Sized>(&self, round: &Round, arm: usize, rng: &mut R) -> Result<f64, EnvError> {
        if arm >= round.means.len() {
            return Err(EnvError::IndexOutOfRange { index: arm, len: round.means.len() });
        }
        let eta: f64 = StandardNormal.sample(rng);
        Ok(round.means[arm] + self.noise_sd * eta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(d: usize, i: usize) -> DVector<f64> {
        DVector::from_fn(d, |j, _| if i == j { 1.0 } else { 0.0 })
    }

    fn two_arm(link: LinkFunction, arms: Vec<DVector<f64>>) -> BanditInstance {
        BanditInstance::new(e(2, 0), ArmSet::new(arms).unwrap(), link).unwrap()
    }

    #[test]
    fn test_zero_noise_identity() {
        let inst = two_arm(LinkFunction::identity(), vec![e(2, 0), e(2, 1)]).with_noise_sd(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(inst.sample_reward(0, &mut rng).unwrap(), 1.0);
    }

    #[test]
    fn test_zero_noise_logistic_at_zero() {
        let inst = two_arm(LinkFunction::logistic(), vec![e(2, 1)]).with_noise_sd(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(inst.sample_reward(0, &mut rng).unwrap(), 0.5);
    }

    #[test]
    fn test_sample_reward_deterministic_and_checked() {
        let inst = generate_instance(3, 4, 9, InstanceStyle::UniformCube);
        let key = StreamKey::root(1).split2(2, 3);
        let a = inst.sample_reward(2, &mut key.stream()).unwrap();
        let b = inst.sample_reward(2, &mut key.stream()).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            inst.sample_reward(4, &mut key.stream()).unwrap_err(),
            EnvError::IndexOutOfRange { index: 4, len: 4 }
        );
    }

    #[test]
    fn test_noise_mean() {
        let inst = generate_instance(5, 3, 2, InstanceStyle::UniformCube);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| inst.sample_reward(1, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - inst.mean(1)).abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn test_regret_examples() {
        let inst = two_arm(LinkFunction::identity(), vec![e(2, 0), e(2, 1)]);
        assert_eq!(inst.instantaneous_regret(0), 0.0);
        assert_eq!(inst.instantaneous_regret(1), 1.0);
        let glm = two_arm(LinkFunction::logistic(), vec![e(2, 0), -e(2, 0)]);
        let expected = 1.0 / (1.0 + (-1.0f64).exp()) - 1.0 / (1.0 + 1.0f64.exp());
        assert!((glm.instantaneous_regret(1) - expected).abs() < 1e-15);
        assert!((expected - 0.4621).abs() < 1e-4);
    }

    #[test]
    fn test_ties_lowest_index() {
        let inst = two_arm(LinkFunction::identity(), vec![e(2, 1), e(2, 0), e(2, 0)]);
        assert_eq!(inst.optimal_arm(), 1);
        assert_eq!(inst.instantaneous_regret(2), 0.0);
    }

    #[test]
    fn test_link_constants() {
        let id = LinkFunction::identity();
        assert_eq!((id.k1(), id.k2()), (1.0, 1.0));
        let lg = LinkFunction::logistic();
        assert!((lg.k1() - 0.196_611_933).abs() < 1e-8);
        assert_eq!(lg.k2(), 1.0);
        let pb = LinkFunction::probit();
        assert!((pb.k1() - std_normal_pdf(1.0)).abs() < 1e-12);
        assert_eq!(pb.k2(), 1.0);
        assert!((pb.mu(0.0) - 0.5).abs() < 1e-15);
        for link in [id, lg, pb] {
            for i in 0..=200 {
                let z = -1.0 + 0.01 * i as f64;
                assert!(link.mu_dot(z) >= link.k1() - 1e-15 && link.mu_dot(z) <= link.k2());
            }
        }
    }

    #[test]
    fn test_uniform_cube_instance() {
        let inst = generate_instance(5, 50, 0, InstanceStyle::UniformCube);
        assert!((inst.theta_star().norm() - 1.0).abs() < 1e-12);
        assert!(inst.arms().iter().all(|a| a.norm() <= 1.0 + 1e-12));
        let again = generate_instance(5, 50, 0, InstanceStyle::UniformCube);
        assert_eq!(inst.arms(), again.arms());
        let other = generate_instance(5, 50, 1, InstanceStyle::UniformCube);
        assert_ne!(inst.arms(), other.arms());
    }

    #[test]
    fn test_random_instance_in_ball() {
        let inst = generate_instance(4, 30, 3, InstanceStyle::Random);
        assert!(inst.theta_star().norm() <= 1.0);
        assert!(inst.arms().iter().all(|a| a.norm() <= 1.0));
    }

    #[test]
    fn test_single_arm_instance() {
        let inst = generate_instance(1, 1, 5, InstanceStyle::UniformCube);
        assert_eq!(inst.optimal_arm(), 0);
        assert_eq!(inst.instantaneous_regret(0), 0.0);
    }

    #[test]
    fn test_contexts() {
        let c = generate_contexts(5, 50, 20, 7);
        for t in 0..20 {
            let f = c.features(t).unwrap();
            assert_eq!(f.len(), 50);
            assert!(f.iter().all(|x| x.norm() <= 1.0 + 1e-12));
        }
        assert_eq!(c.features(3).unwrap(), generate_contexts(5, 50, 20, 7).features(3).unwrap());
        assert!(c.features(20).is_err());
        let single = ContextualEnv::standard_setup(3, 1, 5, 1);
        for t in 0..5 {
            assert_eq!(single.round(t).unwrap().optimal, 0);
        }
    }

    #[test]
    fn test_instance_text_round_trip() {
        let inst = generate_instance(3, 6, 11, InstanceStyle::UniformCube).with_link(LinkFunction::probit());
        let back = BanditInstance::from_text(&inst.to_text()).unwrap();
        assert_eq!(back.theta_star(), inst.theta_star());
        assert_eq!(back.arms(), inst.arms());
        assert_eq!(back.link().kind(), LinkKind::Probit);
    }

    #[test]
    fn test_context_text_round_trip() {
        let c = generate_contexts(2, 3, 4, 1);
        let back = ContextSequence::from_text(&c.to_text().unwrap()).unwrap();
        assert_eq!(back.horizon(), 4);
        for t in 0..4 {
            assert_eq!(back.features(t).unwrap(), c.features(t).unwrap());
        }
    }

    #[test]
    fn test_parse_errors() {
        assert!(matches!(BanditInstance::from_text("2 1\n1 0\n"), Err(EnvError::Parse(_))));
        assert!(matches!(BanditInstance::from_text("2 1\n1 0\n1 0 0\n"), Err(EnvError::Parse(_))));
        assert!(matches!(BanditInstance::from_text("2 1\n# link cubic\n1 0\n1 0\n"), Err(EnvError::UnknownLink(_))));
    }
}
