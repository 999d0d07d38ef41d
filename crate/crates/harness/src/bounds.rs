//! Regret envelopes drawn next to the empirical curves.
//!
//! `f1 = 40√(dT)` and `f2 = 40(α + √(1/M))√(dT)` for the linear setting,
//! `g1 = 3√(dT)` and `g2 = 17(α + √(1/M))√(dT)` for the contextual one.

use std::fmt;
use std::str::FromStr;

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundCurve {
    F1,
    F2,
    G1,
    G2,
}

impl BoundCurve {
    pub fn name(self) -> &'static str {
        match self {
            BoundCurve::F1 => "f1",
            BoundCurve::F2 => "f2",
            BoundCurve::G1 => "g1",
            BoundCurve::G2 => "g2",
        }
    }

    /// Value at horizon `t`.
    pub fn eval(self, d: usize, t: f64, alpha: f64, m: f64) -> f64 {
        let root = (d as f64 * t).sqrt();
        let collab = alpha + (1.0 / m).sqrt();
        match self {
            BoundCurve::F1 => 40.0 * root,
            BoundCurve::F2 => 40.0 * collab * root,
            BoundCurve::G1 => 3.0 * root,
            BoundCurve::G2 => 17.0 * collab * root,
        }
    }
}

impl FromStr for BoundCurve {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f1" => Ok(BoundCurve::F1),
            "f2" => Ok(BoundCurve::F2),
            "g1" => Ok(BoundCurve::G1),
            "g2" => Ok(BoundCurve::G2),
            other => Err(HarnessError::UnknownCurve(other.to_string())),
        }
    }
}

impl fmt::Display for BoundCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Pointwise evaluation of the named curve on `t_grid`.
pub fn bound_curve(name: &str, d: usize, t_grid: &[u64], alpha: f64, m: usize) -> Result<Vec<f64>, HarnessError> {
    let curve: BoundCurve = name.parse()?;
    Ok(t_grid.iter().map(|&t| curve.eval(d, t as f64, alpha, m as f64)).collect())
}
