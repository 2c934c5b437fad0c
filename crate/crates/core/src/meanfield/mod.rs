//! Solvers for the mean-field transport equation on a step graphon `W_n`:
//!
//! ```text
//! ∂_t ρ + ∂_u (V ρ) = 0,   V(t, u, x) = ∫_I W_n(x, y) ∫_S D(v − u) ρ(t, v, y) dv dy
//! ```
//!
//! Three routes are provided: the `n × m` particle system ([`solve_particles`]),
//! Picard iteration on the pushforward fixed-point map ([`picard_solve`]) and a
//! first-order upwind finite-volume scheme ([`solve_fv`]). Intrinsic
//! frequencies are zero throughout.

mod fv;
mod gronwall;
mod particles;
mod picard;
mod stability;
mod weak;

pub use fv::{solve_fv, DensityField, FvSolution, CFL_LIMIT};
pub use gronwall::{gronwall_bound, gronwall_hypothesis_holds};
pub use particles::{solve_particles, solve_particles_from, ParticleEnsemble, MAX_PARTICLES};
pub use picard::{picard_solve, IterationReport, PicardSolution};
pub use stability::{run_stability, step_l1_distance, StabilityExperiment, StabilityReport};
pub use weak::{weak_residual, TestFunction, TrigTest};

use crate::dynamics::CouplingFunction;
use crate::error::{Error, Result};
use crate::graphon::StepGraphon;
use crate::measure::MeasureFamily;

/// Slack allowed on the runtime check `|V| ≤ 1`.
const VELOCITY_SLACK: f64 = 1e-12;

/// The data defining `V[W_n, μ̄]`: a step graphon and the coupling `D`.
#[derive(Debug, Clone)]
pub struct VelocityFieldSpec {
    pub weights: StepGraphon,
    pub coupling: CouplingFunction,
}

impl VelocityFieldSpec {
    pub fn new(weights: StepGraphon, coupling: CouplingFunction) -> Self {
        Self { weights, coupling }
    }

    pub fn n(&self) -> usize {
        self.weights.n()
    }
}

/// `V(u, x)` for `x` in cell `cell`: `n⁻¹ Σ_i W_{n,ki} ∫ D(v − u) dμ^i(v)`.
pub fn velocity(spec: &VelocityFieldSpec, family: &MeasureFamily, u: f64, cell: usize) -> Result<f64> {
    let n = spec.n();
    if family.n_cells() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: family.n_cells(),
        });
    }
    if cell >= n {
        return Err(Error::OutOfRange { index: cell, len: n });
    }
    let d = &spec.coupling;
    let v: f64 = spec
        .weights
        .row(cell)
        .iter()
        .zip(family.cells())
        .map(|(&w, mu)| if w == 0.0 { 0.0 } else { w * mu.integrate(|v| d.eval(v - u)) })
        .sum::<f64>()
        / n as f64;
    assert!(v.abs() <= 1.0 + VELOCITY_SLACK, "velocity bound violated: {v}");
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphon::{cell_average, Graphon};
    use crate::measure::{initial_family, CircleMeasure, InitMode, InitialDensity};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn er(n: usize, p: f64) -> StepGraphon {
        StepGraphon::constant(n, p).unwrap()
    }

    #[test]
    fn zero_kernel_gives_zero_velocity() {
        let spec = VelocityFieldSpec::new(er(3, 0.0), CouplingFunction::Sine);
        let fam = initial_family(&InitialDensity::VonMises { kappa: 2.0, mean: 1.0 }, 3, 5, InitMode::Quantile)
            .unwrap();
        for u in [0.0, 1.0, 4.0] {
            assert_eq!(velocity(&spec, &fam, u, 1).unwrap(), 0.0);
        }
    }

    #[test]
    fn uniform_quantiles_cancel() {
        let w = cell_average(&Graphon::small_world(0.1, 0.25).unwrap(), 4).unwrap();
        let spec = VelocityFieldSpec::new(w, CouplingFunction::Sine);
        let fam = initial_family(&InitialDensity::Uniform, 4, 256, InitMode::Quantile).unwrap();
        for k in 0..4 {
            for u in [0.0, 0.7, 3.0, 5.5] {
                assert!(velocity(&spec, &fam, u, k).unwrap().abs() < 1e-10);
            }
        }
    }

    #[test]
    fn single_atom_cells() {
        let w = cell_average(&Graphon::small_world(0.2, 0.15).unwrap(), 5).unwrap();
        let theta = 2.2;
        let fam = MeasureFamily::new(vec![CircleMeasure::dirac(theta); 5]).unwrap();
        let spec = VelocityFieldSpec::new(w.clone(), CouplingFunction::Sine);
        for k in 0..5 {
            let degree: f64 = w.row(k).iter().sum::<f64>() / 5.0;
            for u in [0.0, 1.0, 5.0] {
                let v = velocity(&spec, &fam, u, k).unwrap();
                assert!((v - degree * (theta - u).sin()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn errors_on_bad_cell_or_size() {
        let spec = VelocityFieldSpec::new(er(2, 0.5), CouplingFunction::Sine);
        let fam = MeasureFamily::new(vec![CircleMeasure::dirac(0.0); 2]).unwrap();
        assert!(matches!(velocity(&spec, &fam, 0.0, 2), Err(Error::OutOfRange { .. })));
        let three = MeasureFamily::new(vec![CircleMeasure::dirac(0.0); 3]).unwrap();
        assert!(velocity(&spec, &three, 0.0, 0).is_err());
    }

    #[test]
    fn velocity_is_bounded_and_lipschitz_in_u() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = cell_average(&Graphon::nearest_neighbor(0.2).unwrap(), 6).unwrap();
        let fam = initial_family(
            &InitialDensity::TwistedVonMises { kappa: 3.0, mean: 0.0, twist: 0.5 },
            6,
            20,
            InitMode::Iid { seed: 2 },
        )
        .unwrap();
        for coupling in [CouplingFunction::Sine, CouplingFunction::SineShift { alpha: 1.0 }] {
            let spec = VelocityFieldSpec::new(w.clone(), coupling);
            for _ in 0..500 {
                let k = rng.random_range(0..6);
                let (u, v) = (rng.random::<f64>() * 7.0, rng.random::<f64>() * 7.0);
                let a = velocity(&spec, &fam, u, k).unwrap();
                let b = velocity(&spec, &fam, v, k).unwrap();
                assert!(a.abs() <= 1.0);
                assert!((a - b).abs() <= (u - v).abs() + 1e-14);
            }
        }
    }
}
