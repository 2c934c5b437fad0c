use super::VelocityFieldSpec;
use crate::dynamics::{integrate, Interaction, OscillatorSystem, PhaseState};
use crate::error::{Error, Result};
use crate::measure::{empirical_from_phases, InitMode, InitialDensity, MeasureFamily, MeasureTrajectory};

/// Largest particle count `N = n·m` accepted.
pub const MAX_PARTICLES: usize = 1 << 20;

/// `N = n·m` particle phases, cell-major, each of mass `1/m` within its cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    n: usize,
    m: usize,
    phases: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn new(n: usize, m: usize, phases: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidParameter("need n, m >= 1".into()));
        }
        if n * m > MAX_PARTICLES {
            return Err(Error::Capacity {
                what: "particles",
                value: n * m,
                limit: MAX_PARTICLES,
            });
        }
        if phases.len() != n * m {
            return Err(Error::DimensionMismatch {
                expected: n * m,
                got: phases.len(),
            });
        }
        Ok(Self { n, m, phases })
    }

    /// Atoms of `ρ⁰` placed according to `mode`.
    pub fn from_density(density: &InitialDensity, n: usize, m: usize, mode: InitMode) -> Result<Self> {
        if n * m > MAX_PARTICLES {
            return Err(Error::Capacity {
                what: "particles",
                value: n * m,
                limit: MAX_PARTICLES,
            });
        }
        let phases = crate::measure::initial::initial_phases(density, n, m, mode)?;
        Self::new(n, m, phases)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn family(&self) -> MeasureFamily {
        empirical_from_phases(&self.phases, self.n, self.m).expect("ensemble shape is valid")
    }

    /// The oscillator system whose trajectories are the characteristics:
    /// block weights `W_{n,ki}`, `K = 1`, `ω ≡ 0`.
    pub fn system(&self, spec: &VelocityFieldSpec) -> Result<OscillatorSystem> {
        if spec.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: spec.n(),
                got: self.n,
            });
        }
        OscillatorSystem::new(
            Interaction::Blocks {
                weights: spec.weights.clone(),
                per_cell: self.m,
            },
            spec.coupling.clone(),
            1.0,
            vec![0.0; self.n * self.m],
        )
    }
}

/// Integrates the particle system from `ensemble` and records the empirical
/// measure families every `record_every` steps (plus the start and end).
pub fn solve_particles_from(
    spec: &VelocityFieldSpec,
    ensemble: &ParticleEnsemble,
    horizon: f64,
    dt: f64,
    record_every: usize,
) -> Result<MeasureTrajectory> {
    let sys = ensemble.system(spec)?;
    let traj = integrate(&sys, &PhaseState::new(ensemble.phases.clone()), horizon, dt, record_every)?;
    let times = traj.times();
    let families = traj
        .states
        .iter()
        .map(|s| empirical_from_phases(&s.phases, ensemble.n, ensemble.m))
        .collect::<Result<_>>()?;
    MeasureTrajectory::new(times, families)
}

/// Particle solution with `m` atoms per cell drawn from `density`.
pub fn solve_particles(
    spec: &VelocityFieldSpec,
    density: &InitialDensity,
    m: usize,
    mode: InitMode,
    horizon: f64,
    dt: f64,
    record_every: usize,
) -> Result<MeasureTrajectory> {
    let ensemble = ParticleEnsemble::from_density(density, spec.n(), m, mode)?;
    solve_particles_from(spec, &ensemble, horizon, dt, record_every)
}
