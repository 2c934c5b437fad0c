//! Picard iteration `μ̄^{(k+1)} = A[W, μ̄^{(k)}]` on the pushforward map.
//!
//! An iterate is stored as the positions of every atom of `μ̄0` at each step
//! of the time grid. Applying the map freezes those positions (linearly
//! interpolated between grid times), integrates each atom along the
//! characteristics of the frozen velocity field with RK4, and collects the
//! transported atoms with their original masses.

use serde::Serialize;

use super::VelocityFieldSpec;
use crate::dynamics::TimeGrid;
use crate::error::{Error, Result};
use crate::measure::{d_alpha, CircleMeasure, MeasureFamily, MeasureTrajectory};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationReport {
    pub alpha: f64,
    pub tol: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `d_α(μ̄^{(k)}, μ̄^{(k−1)})` for `k = 1, 2, …`.
    pub d_alpha: Vec<f64>,
    /// Successive quotients of `d_alpha`; the theory bounds them by `1/(α − 1)`.
    pub contraction_ratios: Vec<f64>,
}

impl IterationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub trajectory: MeasureTrajectory,
    pub report: IterationReport,
}

/// Atoms of `μ̄0` flattened cell by cell.
struct Atoms {
    cell_offsets: Vec<usize>,
    masses: Vec<f64>,
}

impl Atoms {
    fn cell_of(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.masses.len());
        for (k, w) in self.cell_offsets.windows(2).enumerate() {
            out.extend(std::iter::repeat_n(k, w[1] - w[0]));
        }
        out
    }

    fn family(&self, positions: &[f64]) -> Result<MeasureFamily> {
        let cells = self
            .cell_offsets
            .windows(2)
            .map(|w| {
                CircleMeasure::new(positions[w[0]..w[1]].to_vec(), self.masses[w[0]..w[1]].to_vec())
            })
            .collect::<Result<_>>()?;
        MeasureFamily::new(cells)
    }
}

/// Velocity field induced by a frozen snapshot of atom positions.
struct Snapshot<'a> {
    spec: &'a VelocityFieldSpec,
    atoms: &'a Atoms,
    positions: Vec<f64>,
    /// `n⁻¹ Σ_i W_ki Σ_{a∈i} m_a e^{i x_a}` per cell, for harmonic couplings.
    field: Option<Vec<(f64, f64)>>,
}

impl<'a> Snapshot<'a> {
    fn new(spec: &'a VelocityFieldSpec, atoms: &'a Atoms, positions: Vec<f64>) -> Self {
        let field = spec.coupling.harmonic_shift().map(|_| {
            let n = spec.n();
            let moments: Vec<(f64, f64)> = atoms
                .cell_offsets
                .windows(2)
                .map(|w| {
                    (w[0]..w[1]).fold((0.0, 0.0), |(c, s), a| {
                        let (sin, cos) = positions[a].sin_cos();
                        (c + atoms.masses[a] * cos, s + atoms.masses[a] * sin)
                    })
                })
                .collect();
            (0..n)
                .map(|k| {
                    let (c, s) = spec
                        .weights
                        .row(k)
                        .iter()
                        .zip(&moments)
                        .fold((0.0, 0.0), |(c, s), (&w, &(mc, ms))| (c + w * mc, s + w * ms));
                    (c / n as f64, s / n as f64)
                })
                .collect()
        });
        Self {
            spec,
            atoms,
            positions,
            field,
        }
    }

    fn velocity(&self, u: f64, cell: usize) -> f64 {
        match (&self.field, self.spec.coupling.harmonic_shift()) {
            (Some(field), Some(alpha)) => {
                let (fc, fs) = field[cell];
                let (s, c) = (alpha - u).sin_cos();
                c * fs + s * fc
            }
            _ => {
                let n = self.spec.n();
                let d = &self.spec.coupling;
                let mut v = 0.0;
                for (i, w) in self.atoms.cell_offsets.windows(2).enumerate() {
                    let weight = self.spec.weights.get(cell, i);
                    if weight == 0.0 {
                        continue;
                    }
                    let inner: f64 = (w[0]..w[1])
                        .map(|a| self.atoms.masses[a] * d.eval(self.positions[a] - u))
                        .sum();
                    v += weight * inner;
                }
                v / n as f64
            }
        }
    }
}

/// One application of the pushforward map to the iterate `path`.
fn apply_map(
    spec: &VelocityFieldSpec,
    atoms: &Atoms,
    cell_of: &[usize],
    grid: &TimeGrid,
    path: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(path.len());
    let mut y = path[0].clone();
    out.push(y.clone());
    for k in 0..grid.steps() {
        let (_, h) = grid.step(k);
        let start = Snapshot::new(spec, atoms, path[k].clone());
        let mid_pos: Vec<f64> = path[k]
            .iter()
            .zip(&path[k + 1])
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let mid = Snapshot::new(spec, atoms, mid_pos);
        let end = Snapshot::new(spec, atoms, path[k + 1].clone());
        for (a, u) in y.iter_mut().enumerate() {
            let c = cell_of[a];
            let k1 = start.velocity(*u, c);
            let k2 = mid.velocity(*u + 0.5 * h * k1, c);
            let k3 = mid.velocity(*u + 0.5 * h * k2, c);
            let k4 = end.velocity(*u + h * k3, c);
            *u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out.push(y.clone());
    }
    out
}

/// Picard iteration from the constant-in-time trajectory `μ̄0`, stopping once
/// `d_α` between successive iterates drops below `tol`. When `max_iter` is
/// reached first the last iterate is returned with `converged = false`.
pub fn picard_solve(
    spec: &VelocityFieldSpec,
    mu0: &MeasureFamily,
    horizon: f64,
    dt: f64,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PicardSolution> {
    if !(alpha > 2.0) {
        return Err(Error::InvalidParameter(format!(
            "contraction needs alpha > 2, got {alpha}"
        )));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidParameter("need tol > 0 and max_iter >= 1".into()));
    }
    if mu0.n_cells() != spec.n() {
        return Err(Error::DimensionMismatch {
            expected: spec.n(),
            got: mu0.n_cells(),
        });
    }
    let grid = TimeGrid::new(horizon, dt)?;
    let mut cell_offsets = vec![0];
    let mut positions = Vec::new();
    let mut masses = Vec::new();
    for mu in mu0.cells() {
        positions.extend_from_slice(mu.positions());
        masses.extend_from_slice(mu.masses());
        cell_offsets.push(positions.len());
    }
    let atoms = Atoms {
        cell_offsets,
        masses,
    };
    let cell_of = atoms.cell_of();
    let times: Vec<f64> = std::iter::once(0.0)
        .chain((0..grid.steps()).map(|k| grid.time_after(k)))
        .collect();
    let to_traj = |path: &[Vec<f64>]| -> Result<MeasureTrajectory> {
        let fams = path.iter().map(|p| atoms.family(p)).collect::<Result<_>>()?;
        MeasureTrajectory::new(times.clone(), fams)
    };

    let mut path = vec![positions; times.len()];
    let mut current = to_traj(&path)?;
    let mut distances = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let next_path = apply_map(spec, &atoms, &cell_of, &grid, &path);
        if next_path.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: distances.len() });
        }
        let next = to_traj(&next_path)?;
        let d = d_alpha(&next, &current, alpha)?;
        distances.push(d);
        path = next_path;
        current = next;
        if d < tol {
            converged = true;
            break;
        }
    }
    let contraction_ratios = distances
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    Ok(PicardSolution {
        trajectory: current,
        report: IterationReport {
            alpha,
            tol,
            iterations: distances.len(),
            converged,
            d_alpha: distances,
            contraction_ratios,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::CouplingFunction;
    use crate::graphon::StepGraphon;
    use crate::meanfield::{solve_particles_from, ParticleEnsemble};
    use crate::measure::{initial_family, InitMode, InitialDensity};

    #[test]
    fn uniform_is_an_immediate_fixed_point() {
        let spec = VelocityFieldSpec::new(StepGraphon::constant(4, 0.5).unwrap(), CouplingFunction::Sine);
        let mu0 = initial_family(&InitialDensity::Uniform, 4, 32, InitMode::Quantile).unwrap();
        let sol = picard_solve(&spec, &mu0, 1.0, 0.01, 3.0, 1e-8, 10).unwrap();
        assert!(sol.report.converged);
        assert_eq!(sol.report.iterations, 1);
    }

    #[test]
    fn contracts_and_matches_particles() {
        let spec = VelocityFieldSpec::new(StepGraphon::constant(3, 0.5).unwrap(), CouplingFunction::Sine);
        let density = InitialDensity::TwoCluster {
            theta1: 0.5,
            theta2: 3.0,
            weight: 0.5,
            kappa: 8.0,
        };
        let ens = ParticleEnsemble::from_density(&density, 3, 16, InitMode::Quantile).unwrap();
        let tol = 1e-5;
        let sol = picard_solve(&spec, &ens.family(), 1.0, 0.01, 3.0, tol, 20).unwrap();
        assert!(sol.report.converged, "{:?}", sol.report);
        for r in &sol.report.contraction_ratios {
            assert!(*r <= 0.5 + 0.05, "ratio {r}");
        }
        let particles = solve_particles_from(&spec, &ens, 1.0, 0.01, 1).unwrap();
        let gap = sol.trajectory.sup_dbar(&particles).unwrap();
        assert!(gap < 10.0 * tol, "gap {gap}");
        assert!(sol.trajectory.max_mass_error() <= 1e-12);
    }

    #[test]
    fn generic_coupling_path_agrees_with_harmonic() {
        let w = StepGraphon::new(2, vec![0.9, 0.3, 0.3, 0.6]).unwrap();
        let density = InitialDensity::VonMises { kappa: 1.0, mean: 1.0 };
        let mu0 = initial_family(&density, 2, 8, InitMode::Quantile).unwrap();
        let fast = picard_solve(&VelocityFieldSpec::new(w.clone(), CouplingFunction::Sine), &mu0, 0.5, 0.05, 3.0, 1e-10, 30)
            .unwrap();
        let generic = CouplingFunction::custom(f64::sin, 1.0).unwrap();
        let slow = picard_solve(&VelocityFieldSpec::new(w, generic), &mu0, 0.5, 0.05, 3.0, 1e-10, 30).unwrap();
        assert!(fast.trajectory.sup_dbar(&slow.trajectory).unwrap() < 1e-12);
    }

    #[test]
    fn rejects_small_alpha_and_reports_non_convergence() {
        let spec = VelocityFieldSpec::new(StepGraphon::constant(1, 1.0).unwrap(), CouplingFunction::Sine);
        let mu0 = initial_family(&InitialDensity::VonMises { kappa: 2.0, mean: 0.0 }, 1, 8, InitMode::Quantile).unwrap();
        assert!(picard_solve(&spec, &mu0, 1.0, 0.1, 2.0, 1e-6, 5).is_err());
        let sol = picard_solve(&spec, &mu0, 1.0, 0.1, 3.0, 1e-14, 2).unwrap();
        assert!(!sol.report.converged);
        assert_eq!(sol.report.iterations, 2);
        assert!(sol.report.to_json().contains("contraction_ratios"));
    }
}
