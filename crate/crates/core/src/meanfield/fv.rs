//! First-order upwind finite volumes for `∂_t ρ + ∂_u (V ρ) = 0` on a
//! periodic `u`-grid, one grid per spatial cell.
//!
//! Cell `j` covers `[jΔu, (j+1)Δu)`; face `j` sits at `u = jΔu` between
//! cells `j − 1` and `j`. Face velocities come from the midpoint rule in `v`
//! applied to the current densities, which is exact in `x` because `W_n` is
//! cell-constant.

use rayon::prelude::*;

use super::VelocityFieldSpec;
use crate::dynamics::TimeGrid;
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::measure::initial::cell_point;
use crate::measure::{CircleMeasure, InitialDensity, MeasureFamily};
use crate::TAU;

/// Largest admissible Courant number `dt·max|V|/Δu`.
pub const CFL_LIMIT: f64 = 0.9;

/// Densities `ρ(u_j, x_i)` on an `n × g` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    n: usize,
    g: usize,
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(n: usize, g: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || g < 2 {
            return Err(Error::InvalidParameter("density grid needs n >= 1, g >= 2".into()));
        }
        if values.len() != n * g {
            return Err(Error::DimensionMismatch {
                expected: n * g,
                got: values.len(),
            });
        }
        if values.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("densities must be finite and >= 0".into()));
        }
        let field = Self { n, g, values };
        let err = field.max_mass_error();
        if err > 1e-10 {
            return Err(Error::NotNormalized(1.0 + err));
        }
        Ok(field)
    }

    /// Cell averages in `u` of `ρ⁰(·, x)` at each cell's representative point.
    pub fn from_density(density: &InitialDensity, n: usize, g: usize) -> Result<Self> {
        if n == 0 || g < 2 {
            return Err(Error::InvalidParameter("density grid needs n >= 1, g >= 2".into()));
        }
        let du = TAU / g as f64;
        let mut values = Vec::with_capacity(n * g);
        for i in 0..n {
            let rho = density.at(cell_point(i, n))?;
            let cdf: Vec<f64> = (0..=g).map(|j| rho.cdf(j as f64 * du)).collect();
            values.extend(cdf.windows(2).map(|w| ((w[1] - w[0]) / du).max(0.0)));
        }
        Self::new(n, g, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn du(&self) -> f64 {
        TAU / self.g as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        &self.values[i * self.g..(i + 1) * self.g]
    }

    /// `Δu Σ_j ρ_ij`.
    pub fn mass(&self, i: usize) -> f64 {
        self.du() * self.cell(i).iter().sum::<f64>()
    }

    pub fn max_mass_error(&self) -> f64 {
        (0..self.n)
            .map(|i| (self.mass(i) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `m` atoms per cell at the quantiles `(k − ½)/m` of the piecewise
    /// constant density.
    pub fn to_quantile_family(&self, m: usize) -> Result<MeasureFamily> {
        if m == 0 {
            return Err(Error::InvalidParameter("need m >= 1".into()));
        }
        let du = self.du();
        let cells = (0..self.n)
            .map(|i| {
                let rho = self.cell(i);
                let total: f64 = rho.iter().sum::<f64>() * du;
                let mut cum = Vec::with_capacity(self.g + 1);
                let mut acc = 0.0;
                cum.push(0.0);
                for &r in rho {
                    acc += r * du / total;
                    cum.push(acc);
                }
                let atoms: Vec<f64> = (0..m)
                    .map(|k| {
                        let q = (k as f64 + 0.5) / m as f64;
                        let j = cum.partition_point(|&c| c <= q).saturating_sub(1).min(self.g - 1);
                        let frac = if rho[j] > 0.0 {
                            ((q - cum[j]) * total / (rho[j] * du)).clamp(0.0, 1.0)
                        } else {
                            0.0
                        };
                        (j as f64 + frac) * du
                    })
                    .collect();
                CircleMeasure::uniform_atoms(&atoms)
            })
            .collect::<Result<_>>()?;
        MeasureFamily::new(cells)
    }

    /// CSV with columns `cell, u_index, value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,u_index,value\n");
        for i in 0..self.n {
            for (j, &v) in self.cell(i).iter().enumerate() {
                out.push_str(&format!("{i},{j},{}\n", fmt_f64(v)));
            }
        }
        out
    }
}

/// Velocity of the density field on the `u`-grid shifted by `offset·Δu`
/// (`offset = 0` for faces, `½` for cell centres), for every spatial cell.
pub(crate) fn grid_velocity(spec: &VelocityFieldSpec, field: &DensityField, offset: f64) -> Vec<f64> {
    let (n, g) = (field.n, field.g);
    let du = field.du();
    // C_i(u) = Δu Σ_l D(v_l − u) ρ_il, v_l = (l + ½)Δu
    let conv: Vec<Vec<f64>> = match spec.coupling.harmonic_shift() {
        Some(alpha) => (0..n)
            .map(|i| {
                let (c, s) = field.cell(i).iter().enumerate().fold((0.0, 0.0), |(c, s), (l, &r)| {
                    let (sin, cos) = ((l as f64 + 0.5) * du).sin_cos();
                    (c + r * cos, s + r * sin)
                });
                (0..g)
                    .map(|j| {
                        let (sa, ca) = (alpha - (j as f64 + offset) * du).sin_cos();
                        du * (ca * s + sa * c)
                    })
                    .collect()
            })
            .collect(),
        None => {
            let table: Vec<f64> = (0..g)
                .map(|o| spec.coupling.eval((o as f64 + 0.5 - offset) * du))
                .collect();
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let rho = field.cell(i);
                    (0..g)
                        .map(|j| {
                            let mut acc = 0.0;
                            for (l, &r) in rho.iter().enumerate() {
                                acc += table[(l + g - j) % g] * r;
                            }
                            du * acc
                        })
                        .collect()
                })
                .collect()
        }
    };
    let mut out = vec![0.0; n * g];
    for k in 0..n {
        let row = spec.weights.row(k);
        let dst = &mut out[k * g..(k + 1) * g];
        for (i, &w) in row.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (d, &c) in dst.iter_mut().zip(&conv[i]) {
                *d += w * c;
            }
        }
        for d in dst.iter_mut() {
            *d /= n as f64;
        }
    }
    out
}

/// Densities at the recorded times of a finite-volume run.
#[derive(Debug, Clone)]
pub struct FvSolution {
    pub times: Vec<f64>,
    pub fields: Vec<DensityField>,
}

impl FvSolution {
    pub fn last(&self) -> &DensityField {
        self.fields.last().expect("solution holds the initial field")
    }
}

/// Upwind finite-volume solve up to `horizon`, recording every
/// `record_every` steps plus the start and end.
pub fn solve_fv(
    spec: &VelocityFieldSpec,
    rho0: &DensityField,
    horizon: f64,
    dt: f64,
    record_every: usize,
) -> Result<FvSolution> {
    if rho0.n != spec.n() {
        return Err(Error::DimensionMismatch {
            expected: spec.n(),
            got: rho0.n,
        });
    }
    if record_every == 0 {
        return Err(Error::InvalidParameter("record_every must be >= 1".into()));
    }
    let du = rho0.du();
    // |V| ≤ 1, so dt/Δu bounds the Courant number
    let courant = dt / du;
    if courant > CFL_LIMIT {
        return Err(Error::Cfl(courant));
    }
    let grid = TimeGrid::new(horizon, dt)?;
    let (n, g) = (rho0.n, rho0.g);
    let mut field = rho0.clone();
    let mut times = vec![0.0];
    let mut fields = vec![rho0.clone()];
    let mut next = vec![0.0; n * g];
    for step in 0..grid.steps() {
        let (_, h) = grid.step(step);
        let v = grid_velocity(spec, &field, 0.0);
        debug_assert!(v.iter().all(|x| x.abs() <= 1.0 + 1e-12));
        let ratio = h / du;
        next.par_chunks_mut(g).enumerate().for_each(|(i, dst)| {
            let rho = field.cell(i);
            let vel = &v[i * g..(i + 1) * g];
            // flux through face j, from cell j−1 into cell j
            let flux = |j: usize| {
                let left = rho[(j + g - 1) % g];
                let right = rho[j];
                let vf = vel[j];
                vf.max(0.0) * left + vf.min(0.0) * right
            };
            let mut f_in = flux(0);
            for j in 0..g {
                let f_out = flux((j + 1) % g);
                dst[j] = rho[j] - ratio * (f_out - f_in);
                f_in = f_out;
            }
        });
        std::mem::swap(&mut field.values, &mut next);
        if field.values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { step });
        }
        if grid.records_after(step, record_every) {
            times.push(grid.time_after(step));
            fields.push(field.clone());
        }
    }
    Ok(FvSolution { times, fields })
}
