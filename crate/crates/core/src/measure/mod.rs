//! Atomic probability measures on the circle and the transport distance
//! between them.
//!
//! The distance is the supremum of `|∫ f dμ − ∫ f dη|` over 1-Lipschitz `f`,
//! which by Kantorovich–Rubinstein duality is the Wasserstein-1 distance for
//! the arc-length metric. On the circle it has the closed form
//! `min_t ∫₀^{2π} |F_μ(x) − F_η(x) − t| dx`, attained at a weighted median
//! of the CDF difference.

mod family;
pub(crate) mod initial;

pub use family::{
    d_alpha, dbar, dbar_refined, empirical_from_phases, MeasureFamily, MeasureTrajectory,
    DEFAULT_ALPHA,
};
pub use initial::{initial_family, InitialDensity, InitMode};

use std::f64::consts::PI;

use crate::dynamics::reduce_phase;
use crate::error::{Error, Result};
use crate::TAU;

/// Allowed deviation of the total mass from 1.
pub const MASS_TOL: f64 = 1e-12;

/// Arc-length distance `min{|θ−θ′|, 2π−|θ−θ′|}` after reduction mod 2π.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (reduce_phase(a) - reduce_phase(b)).abs();
    d.min(TAU - d).max(0.0)
}

/// Finite atomic probability measure on the circle.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleMeasure {
    positions: Vec<f64>,
    masses: Vec<f64>,
}

impl CircleMeasure {
    /// Positions are reduced to `[0, 2π)`; masses must be positive and sum to 1.
    pub fn new(positions: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if positions.len() != masses.len() {
            return Err(Error::DimensionMismatch {
                expected: positions.len(),
                got: masses.len(),
            });
        }
        if positions.is_empty() {
            return Err(Error::NotNormalized(0.0));
        }
        if let Some(&m) = masses.iter().find(|&&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidParameter(format!("atom mass {m} is not positive")));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("non-finite atom position".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::NotNormalized(total));
        }
        Ok(Self {
            positions: positions.into_iter().map(reduce_phase).collect(),
            masses,
        })
    }

    /// Equal masses `1/len` at the given positions.
    pub fn uniform_atoms(positions: &[f64]) -> Result<Self> {
        let m = positions.len();
        if m == 0 {
            return Err(Error::NotNormalized(0.0));
        }
        Ok(Self {
            positions: positions.iter().map(|&p| reduce_phase(p)).collect(),
            masses: vec![1.0 / m as f64; m],
        })
    }

    pub fn dirac(theta: f64) -> Self {
        Self {
            positions: vec![reduce_phase(theta)],
            masses: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.positions.iter().copied().zip(self.masses.iter().copied())
    }

    /// Pushforward under the rotation `θ ↦ θ + c`.
    pub fn rotated(&self, c: f64) -> Self {
        Self {
            positions: self.positions.iter().map(|&p| reduce_phase(p + c)).collect(),
            masses: self.masses.clone(),
        }
    }

    /// `∫ f dμ`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.atoms().map(|(p, m)| m * f(p)).sum()
    }
}

/// Transport (bounded Lipschitz) distance between two measures on the circle.
pub fn bl_distance(mu: &CircleMeasure, eta: &CircleMeasure) -> f64 {
    // signed atoms sorted by position
    let mut events: Vec<(f64, f64)> = mu
        .atoms()
        .chain(eta.atoms().map(|(p, m)| (p, -m)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    // piecewise-constant CDF difference: (value, length) per segment
    let mut segments = Vec::with_capacity(events.len() + 1);
    let mut cdf = 0.0;
    let mut left = 0.0;
    for &(p, m) in &events {
        if p > left {
            segments.push((cdf, p - left));
            left = p;
        }
        cdf += m;
    }
    if TAU > left {
        segments.push((cdf, TAU - left));
    }

    let shift = weighted_median(&mut segments);
    let w1: f64 = segments.iter().map(|&(v, len)| len * (v - shift).abs()).sum();
    w1.clamp(0.0, PI)
}

/// Minimizer of `Σ len |v − t|`; the midpoint when the minimizers form an interval.
fn weighted_median(segments: &mut [(f64, f64)]) -> f64 {
    segments.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = segments.iter().map(|s| s.1).sum();
    let half = 0.5 * total;
    let mut acc = 0.0;
    for (k, &(v, len)) in segments.iter().enumerate() {
        acc += len;
        if acc > half {
            return v;
        }
        if acc == half {
            return match segments.get(k + 1) {
                Some(&(next, _)) => 0.5 * (v + next),
                None => v,
            };
        }
    }
    segments.last().map_or(0.0, |s| s.0)
}
