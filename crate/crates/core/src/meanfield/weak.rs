//! Residual of the weak form of the transport equation for a finite-volume
//! solution.
//!
//! For a `C¹` test function `w(t, u)` a weak solution satisfies, in every
//! spatial cell,
//!
//! ```text
//! ∫₀ᵀ ∫ ρ (∂_t w + V ∂_u w) du dt + ∫ w(0) ρ⁰ du − ∫ w(T) ρ(T) du = 0.
//! ```
//!
//! The terminal term vanishes for test functions with `w(T, ·) = 0`. The
//! `∂_t w` term is integrated step by step as `ρ̄ (w(t₁) − w(t₀))` with `ρ̄`
//! the average of the endpoint densities, so constant densities give an
//! exactly telescoping sum. The transport term uses the trapezoid rule in
//! `t` and cell centres in `u`.

use super::fv::{grid_velocity, FvSolution};
use super::VelocityFieldSpec;
use crate::error::{Error, Result};

/// A test function given by its value and `u`-derivative.
pub trait TestFunction: Sync {
    fn value(&self, t: f64, u: f64) -> f64;
    fn d_u(&self, t: f64, u: f64) -> f64;
}

/// `w(t, u) = amplitude · cos(ω t) · cos(k u + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigTest {
    pub amplitude: f64,
    pub omega: f64,
    pub k: f64,
    pub phase: f64,
}

impl TrigTest {
    /// Vanishes at `t = horizon`: `ω = π / (2 horizon)`.
    pub fn ending_at(horizon: f64, k: f64, phase: f64) -> Self {
        Self {
            amplitude: 1.0,
            omega: std::f64::consts::FRAC_PI_2 / horizon,
            k,
            phase,
        }
    }
}

impl TestFunction for TrigTest {
    fn value(&self, t: f64, u: f64) -> f64 {
        self.amplitude * (self.omega * t).cos() * (self.k * u + self.phase).cos()
    }

    fn d_u(&self, t: f64, u: f64) -> f64 {
        -self.amplitude * self.k * (self.omega * t).cos() * (self.k * u + self.phase).sin()
    }
}

/// Largest absolute weak-form residual over the test functions and spatial
/// cells. Accuracy follows the recording grid of `sol`, so record every step.
pub fn weak_residual(sol: &FvSolution, spec: &VelocityFieldSpec, tests: &[&dyn TestFunction]) -> Result<f64> {
    let first = sol.fields.first().ok_or(Error::InvalidParameter("empty solution".into()))?;
    if first.n() != spec.n() {
        return Err(Error::DimensionMismatch {
            expected: spec.n(),
            got: first.n(),
        });
    }
    if sol.times.len() != sol.fields.len() {
        return Err(Error::DimensionMismatch {
            expected: sol.times.len(),
            got: sol.fields.len(),
        });
    }
    let (n, g, du) = (first.n(), first.g(), first.du());
    let centres: Vec<f64> = (0..g).map(|j| (j as f64 + 0.5) * du).collect();
    let velocities: Vec<Vec<f64>> = sol.fields.iter().map(|f| grid_velocity(spec, f, 0.5)).collect();

    let mut worst: f64 = 0.0;
    for test in tests {
        let values: Vec<Vec<f64>> = sol
            .times
            .iter()
            .map(|&t| centres.iter().map(|&u| test.value(t, u)).collect())
            .collect();
        let slopes: Vec<Vec<f64>> = sol
            .times
            .iter()
            .map(|&t| centres.iter().map(|&u| test.d_u(t, u)).collect())
            .collect();
        for i in 0..n {
            let transport = |r: usize| -> f64 {
                let rho = sol.fields[r].cell(i);
                let vel = &velocities[r][i * g..(i + 1) * g];
                du * (0..g).map(|j| rho[j] * vel[j] * slopes[r][j]).sum::<f64>()
            };
            let pairing = |r: usize, s: usize| -> f64 {
                du * sol.fields[r].cell(i).iter().zip(&values[s]).map(|(a, b)| a * b).sum::<f64>()
            };
            let mut total = 0.0;
            let mut prev_transport = transport(0);
            for r in 1..sol.times.len() {
                let h = sol.times[r] - sol.times[r - 1];
                let (a, b) = (sol.fields[r - 1].cell(i), sol.fields[r].cell(i));
                let time_term: f64 = du
                    * (0..g)
                        .map(|j| 0.5 * (a[j] + b[j]) * (values[r][j] - values[r - 1][j]))
                        .sum::<f64>();
                let next_transport = transport(r);
                total += time_term + 0.5 * h * (prev_transport + next_transport);
                prev_transport = next_transport;
            }
            let last = sol.times.len() - 1;
            total += pairing(0, 0) - pairing(last, last);
            worst = worst.max(total.abs());
        }
    }
    Ok(worst)
}
