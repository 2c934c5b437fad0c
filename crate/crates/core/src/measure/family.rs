use rayon::prelude::*;

use super::{bl_distance, CircleMeasure, MASS_TOL};
use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// Weight exponent used by [`d_alpha`] unless told otherwise; contraction of
/// the fixed-point map needs `α > 2`.
pub const DEFAULT_ALPHA: f64 = 3.0;

/// One measure per spatial cell `I_{n,i}`; a step function `x ↦ μ^x`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureFamily {
    per_cell: Vec<CircleMeasure>,
}

impl MeasureFamily {
    pub fn new(per_cell: Vec<CircleMeasure>) -> Result<Self> {
        if per_cell.is_empty() {
            return Err(Error::InvalidParameter("family needs at least one cell".into()));
        }
        Ok(Self { per_cell })
    }

    pub fn n_cells(&self) -> usize {
        self.per_cell.len()
    }

    pub fn cell(&self, i: usize) -> &CircleMeasure {
        &self.per_cell[i]
    }

    pub fn cells(&self) -> &[CircleMeasure] {
        &self.per_cell
    }

    /// The same step function on `n_cells · factor` cells.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidParameter("refinement factor must be >= 1".into()));
        }
        Ok(Self {
            per_cell: self
                .per_cell
                .iter()
                .flat_map(|m| std::iter::repeat_n(m.clone(), factor))
                .collect(),
        })
    }

    /// Largest `|mass − 1|` over cells.
    pub fn max_mass_error(&self) -> f64 {
        self.per_cell
            .iter()
            .map(|m| (m.total_mass() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `cell, position, mass` (cells numbered from 0).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,position,mass\n");
        for (i, m) in self.per_cell.iter().enumerate() {
            for (p, w) in m.atoms() {
                out.push_str(&format!("{i},{},{}\n", fmt_f64(p), fmt_f64(w)));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        match lines.next() {
            Some("cell,position,mass") => {}
            Some(h) => return Err(Error::Parse(format!("unexpected header '{h}'"))),
            None => return Err(Error::Parse("empty measure file".into())),
        }
        let mut cells: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for (r, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("row {r}: expected 3 fields")));
            }
            let cell: usize = fields[0]
                .parse()
                .map_err(|e| Error::Parse(format!("row {r}: cell: {e}")))?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {r}: '{s}': {e}")))
            };
            let (p, w) = (parse(fields[1])?, parse(fields[2])?);
            if cell >= cells.len() {
                cells.resize(cell + 1, (Vec::new(), Vec::new()));
            }
            cells[cell].0.push(p);
            cells[cell].1.push(w);
        }
        if cells.is_empty() {
            return Err(Error::Parse("measure file has no atoms".into()));
        }
        let per_cell = cells
            .into_iter()
            .enumerate()
            .map(|(i, (p, w))| {
                if p.is_empty() {
                    Err(Error::Parse(format!("cell {i} has no atoms")))
                } else {
                    CircleMeasure::new(p, w)
                }
            })
            .collect::<Result<_>>()?;
        Self::new(per_cell)
    }
}

/// `d̄(μ̄, η̄) = ∫_I d(μ^x, η^x) dx` for families on the same cells.
pub fn dbar(a: &MeasureFamily, b: &MeasureFamily) -> Result<f64> {
    if a.n_cells() != b.n_cells() {
        return Err(Error::DimensionMismatch {
            expected: a.n_cells(),
            got: b.n_cells(),
        });
    }
    let sum: f64 = a
        .per_cell
        .par_iter()
        .zip(&b.per_cell)
        .map(|(x, y)| bl_distance(x, y))
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(sum / a.n_cells() as f64)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// [`dbar`] after refining both families to `lcm(n₁, n₂)` cells.
pub fn dbar_refined(a: &MeasureFamily, b: &MeasureFamily) -> Result<f64> {
    let (n1, n2) = (a.n_cells(), b.n_cells());
    if n1 == n2 {
        return dbar(a, b);
    }
    let l = n1 / gcd(n1, n2) * n2;
    dbar(&a.refine(l / n1)?, &b.refine(l / n2)?)
}

/// Measure families sampled at increasing times starting from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTrajectory {
    times: Vec<f64>,
    families: Vec<MeasureFamily>,
}

impl MeasureTrajectory {
    pub fn new(times: Vec<f64>, families: Vec<MeasureFamily>) -> Result<Self> {
        if times.len() != families.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: families.len(),
            });
        }
        if times.first() != Some(&0.0) {
            return Err(Error::InvalidParameter("trajectory must start at t = 0".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("times must be strictly increasing".into()));
        }
        Ok(Self { times, families })
    }

    /// The family `μ̄0` held fixed at each of `times`.
    pub fn constant(family: MeasureFamily, times: Vec<f64>) -> Result<Self> {
        let families = vec![family; times.len()];
        Self::new(times, families)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn families(&self) -> &[MeasureFamily] {
        &self.families
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &MeasureFamily {
        self.families.last().expect("trajectory is non-empty")
    }

    /// Largest per-cell mass error over all recorded families.
    pub fn max_mass_error(&self) -> f64 {
        self.families
            .iter()
            .map(MeasureFamily::max_mass_error)
            .fold(0.0, f64::max)
    }

    /// `d̄` between the two trajectories at each shared time (cells refined
    /// to a common grid when counts differ).
    pub fn dbar_series(&self, other: &Self) -> Result<Vec<f64>> {
        self.check_grid(other)?;
        self.families
            .iter()
            .zip(&other.families)
            .map(|(a, b)| dbar_refined(a, b))
            .collect()
    }

    /// `sup_t d̄(μ̄_t, η̄_t)`.
    pub fn sup_dbar(&self, other: &Self) -> Result<f64> {
        Ok(self.dbar_series(other)?.into_iter().fold(0.0, f64::max))
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        let same = self.times.len() == other.times.len()
            && self
                .times
                .iter()
                .zip(&other.times)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
        if same {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// `d_α(A, B) = max_t e^{−αt} d̄(A_t, B_t)` over the shared sample times.
pub fn d_alpha(a: &MeasureTrajectory, b: &MeasureTrajectory, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let series = a.dbar_series(b)?;
    Ok(a
        .times
        .iter()
        .zip(series)
        .map(|(&t, d)| (-alpha * t).exp() * d)
        .fold(0.0, f64::max))
}

/// Empirical measures: cell `i` holds `phases[i·m .. (i+1)·m]`, mass `1/m` each.
pub fn empirical_from_phases(phases: &[f64], n: usize, m: usize) -> Result<MeasureFamily> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter("need n, m >= 1".into()));
    }
    if phases.len() != n * m {
        return Err(Error::DimensionMismatch {
            expected: n * m,
            got: phases.len(),
        });
    }
    let per_cell = phases
        .chunks(m)
        .map(CircleMeasure::uniform_atoms)
        .collect::<Result<_>>()?;
    let fam = MeasureFamily::new(per_cell)?;
    debug_assert!(fam.max_mass_error() <= MASS_TOL);
    Ok(fam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn fam(cells: &[&[f64]]) -> MeasureFamily {
        MeasureFamily::new(cells.iter().map(|c| CircleMeasure::uniform_atoms(c).unwrap()).collect()).unwrap()
    }

    #[test]
    fn dbar_examples() {
        let a = fam(&[&[0.0, 1.0], &[2.0]]);
        assert_eq!(dbar(&a, &a).unwrap(), 0.0);

        let single_a = fam(&[&[0.0]]);
        let single_b = fam(&[&[0.7]]);
        assert!((dbar(&single_a, &single_b).unwrap() - 0.7).abs() < 1e-15);

        let b = fam(&[&[0.3], &[1.0]]);
        let c = fam(&[&[0.0], &[1.5]]);
        assert!((dbar(&b, &c).unwrap() - (0.3 + 0.5) / 2.0).abs() < 1e-15);

        assert!(dbar(&a, &single_a).is_err());
    }

    #[test]
    fn refinement_for_mismatched_cells() {
        let coarse = fam(&[&[0.0], &[1.0]]);
        let fine = fam(&[&[0.0], &[0.0], &[1.0], &[1.5]]);
        // cells: (0 vs 0), (0 vs 0), (1 vs 1), (1 vs 1.5)
        assert!((dbar_refined(&coarse, &fine).unwrap() - 0.125).abs() < 1e-15);
        let three = fam(&[&[0.0], &[0.0], &[0.0]]);
        // lcm(2, 3) = 6: cells 3..6 of coarse sit at 1.0
        assert!((dbar_refined(&coarse, &three).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn d_alpha_examples() {
        let a0 = fam(&[&[0.0]]);
        let b0 = fam(&[&[0.1]]);
        let a1 = fam(&[&[0.0]]);
        let b1 = fam(&[&[0.2]]);
        let a = MeasureTrajectory::new(vec![0.0, 1.0], vec![a0.clone(), a1]).unwrap();
        let b = MeasureTrajectory::new(vec![0.0, 1.0], vec![b0.clone(), b1]).unwrap();
        assert_eq!(d_alpha(&a, &a, 3.0).unwrap(), 0.0);
        let d = d_alpha(&a, &b, 3.0).unwrap();
        assert!((d - 0.1f64.max(0.2 * (-3.0f64).exp())).abs() < 1e-15);

        let single_a = MeasureTrajectory::new(vec![0.0], vec![a0]).unwrap();
        let single_b = MeasureTrajectory::new(vec![0.0], vec![b0]).unwrap();
        assert!((d_alpha(&single_a, &single_b, 3.0).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(d_alpha(&a, &single_b, 3.0), Err(Error::GridMismatch)));
    }

    #[test]
    fn trajectory_validation() {
        let f = fam(&[&[0.0]]);
        assert!(MeasureTrajectory::new(vec![0.5], vec![f.clone()]).is_err());
        assert!(MeasureTrajectory::new(vec![0.0, 0.0], vec![f.clone(), f.clone()]).is_err());
        assert!(MeasureTrajectory::new(vec![0.0, 1.0], vec![f]).is_err());
    }

    #[test]
    fn empirical_examples() {
        let f = empirical_from_phases(&[0.0, PI, PI / 2.0, PI / 2.0], 2, 2).unwrap();
        assert_eq!(f.cell(0), &CircleMeasure::uniform_atoms(&[0.0, PI]).unwrap());
        assert_eq!(dbar(&f, &fam(&[&[0.0, PI], &[PI / 2.0]])).unwrap(), 0.0);

        let one = empirical_from_phases(&[0.1, 0.2, 0.3], 1, 3).unwrap();
        assert_eq!(one.n_cells(), 1);
        assert_eq!(one.cell(0).len(), 3);

        let p = empirical_from_phases(&[0.1, 0.9, 2.0, 3.0], 1, 4).unwrap();
        let q = empirical_from_phases(&[3.0, 2.0, 0.1, 0.9], 1, 4).unwrap();
        assert_eq!(dbar(&p, &q).unwrap(), 0.0);

        assert!(empirical_from_phases(&[0.0; 5], 2, 2).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let f = fam(&[&[0.1, 0.2], &[3.0]]);
        let back = MeasureFamily::from_csv(&f.to_csv()).unwrap();
        assert_eq!(back, f);
        assert!(MeasureFamily::from_csv("").is_err());
        assert!(MeasureFamily::from_csv("cell,position,mass\n0,0.0,0.5\n").is_err());
    }
}
