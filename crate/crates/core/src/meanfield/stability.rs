//! Stability of the particle solution with respect to initial data and to
//! the graphon.
//!
//! Two mean-field solutions with initial families `μ̄₀, η̄₀` stay within
//! `e^T d̄(μ̄₀, η̄₀)`; solutions driven by kernels `W, U` from the same initial
//! data stay within `e^{2T} ‖W − U‖_{L¹}`.

use serde::Serialize;

use super::particles::{solve_particles_from, ParticleEnsemble};
use super::VelocityFieldSpec;
use crate::error::{Error, Result};
use crate::graphon::StepGraphon;
use crate::measure::dbar;

/// One stability comparison.
#[derive(Debug, Clone)]
pub enum StabilityExperiment {
    /// Same kernel, two initial ensembles of equal shape.
    InitialData {
        spec: VelocityFieldSpec,
        first: ParticleEnsemble,
        second: ParticleEnsemble,
    },
    /// Same initial ensemble, two step kernels.
    Kernel {
        first: VelocityFieldSpec,
        second: VelocityFieldSpec,
        initial: ParticleEnsemble,
    },
}

/// Measured `sup_t d̄` next to the theoretical bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    /// `d̄(μ̄₀, η̄₀)` or `‖W − U‖_{L¹}`.
    pub input_distance: f64,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
}

/// `‖W − U‖_{L¹(I²)}` for two step graphons on the same grid.
pub fn step_l1_distance(w: &StepGraphon, u: &StepGraphon) -> Result<f64> {
    if w.n() != u.n() {
        return Err(Error::DimensionMismatch {
            expected: w.n(),
            got: u.n(),
        });
    }
    let n2 = (w.n() * w.n()) as f64;
    Ok(w.values().iter().zip(u.values()).map(|(a, b)| (a - b).abs()).sum::<f64>() / n2)
}

/// Runs both particle solutions on a common grid and compares.
pub fn run_stability(exp: &StabilityExperiment, horizon: f64, dt: f64) -> Result<StabilityReport> {
    let (a, b, input, factor) = match exp {
        StabilityExperiment::InitialData { spec, first, second } => {
            if first.m() != second.m() || first.n() != second.n() {
                return Err(Error::DimensionMismatch {
                    expected: first.n() * first.m(),
                    got: second.n() * second.m(),
                });
            }
            let input = dbar(&first.family(), &second.family())?;
            let a = solve_particles_from(spec, first, horizon, dt, 1)?;
            let b = solve_particles_from(spec, second, horizon, dt, 1)?;
            (a, b, input, horizon.exp())
        }
        StabilityExperiment::Kernel { first, second, initial } => {
            let input = step_l1_distance(&first.weights, &second.weights)?;
            let a = solve_particles_from(first, initial, horizon, dt, 1)?;
            let b = solve_particles_from(second, initial, horizon, dt, 1)?;
            (a, b, input, (2.0 * horizon).exp())
        }
    };
    let measured = a.sup_dbar(&b)?;
    let bound = factor * input;
    Ok(StabilityReport {
        input_distance: input,
        measured,
        bound,
        passed: measured <= bound,
    })
}
