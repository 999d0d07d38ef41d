//! Collaborative stochastic bandits with adversarial agents.
//!
//! A server coordinates `M` agents, a fixed fraction of which may send
//! arbitrary messages. The crate contains the learners (robust phased
//! elimination for linear and generalized-linear rewards, a robust
//! SupLinUCB for contextual rewards, and the non-robust baselines), the
//! estimators they rely on, the attack models, and seeded environments.
//!
//! Module map:
//!
//! * [`linalg`] and [`design`]: positive-definite helpers and approximate
//!   G-optimal designs.
//! * [`robust_stats`]: median with contamination-aware width, geometric
//!   median, and the iteratively reweighted mean estimator.
//! * [`env`]: bandit instances, link functions, contexts, reward sampling.
//! * [`adversary`]: attack models and message interception.
//! * [`algorithms`]: the learners.
//! * [`trace`]: regret traces and the learner event stream.

pub mod adversary;
pub mod algorithms;
pub mod design;
pub mod env;
pub mod linalg;
pub mod rng;
pub mod robust_stats;
pub mod trace;

pub use nalgebra::{DMatrix, DVector};
