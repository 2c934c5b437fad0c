//! Initial phase densities `ρ⁰(·, x)` and their discretization into atoms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{empirical_from_phases, MeasureFamily};
use crate::error::{Error, Result};
use crate::TAU;

const TABLE_INTERVALS: usize = 4096;
const BESSEL_NODES: usize = 1024;
const MAX_KAPPA: f64 = 1000.0;

/// Initial density on the circle, possibly varying with the spatial variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDensity {
    Uniform,
    VonMises {
        kappa: f64,
        mean: f64,
    },
    /// `w·VM(θ₁, κ) + (1 − w)·VM(θ₂, κ)`.
    TwoCluster {
        theta1: f64,
        theta2: f64,
        weight: f64,
        #[serde(default = "default_cluster_kappa")]
        kappa: f64,
    },
    /// Von Mises with mean `mean + 2π·twist·x`.
    TwistedVonMises {
        kappa: f64,
        mean: f64,
        twist: f64,
    },
    /// Von Mises with concentration interpolated linearly from `kappa_start`
    /// at `x = 0` to `kappa_end` at `x = 1`.
    VonMisesRamp {
        kappa_start: f64,
        kappa_end: f64,
        mean: f64,
    },
}

fn default_cluster_kappa() -> f64 {
    10.0
}

/// How atoms are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitMode {
    /// Independent draws, stream `i` of the seeded generator for cell `i`.
    Iid { seed: u64 },
    /// Atoms at the conditional quantiles `(k − ½)/m`.
    Quantile,
}

impl Default for InitMode {
    fn default() -> Self {
        Self::Quantile
    }
}

fn check_kappa(k: f64) -> Result<()> {
    if !(0.0..=MAX_KAPPA).contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "von Mises concentration must lie in [0, {MAX_KAPPA}], got {k}"
        )));
    }
    Ok(())
}

impl InitialDensity {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Uniform => Ok(()),
            Self::VonMises { kappa, mean } => {
                check_kappa(kappa)?;
                finite(mean)
            }
            Self::TwoCluster {
                theta1,
                theta2,
                weight,
                kappa,
            } => {
                check_kappa(kappa)?;
                finite(theta1)?;
                finite(theta2)?;
                if !(0.0..=1.0).contains(&weight) {
                    return Err(Error::InvalidParameter(format!(
                        "cluster weight must lie in [0, 1], got {weight}"
                    )));
                }
                Ok(())
            }
            Self::TwistedVonMises { kappa, mean, twist } => {
                check_kappa(kappa)?;
                finite(mean)?;
                finite(twist)
            }
            Self::VonMisesRamp {
                kappa_start,
                kappa_end,
                mean,
            } => {
                check_kappa(kappa_start)?;
                check_kappa(kappa_end)?;
                finite(mean)
            }
        }
    }

    /// Mixture components `(weight, κ, mean)` of `ρ⁰(·, x)`.
    fn components(&self, x: f64) -> Vec<(f64, f64, f64)> {
        match *self {
            Self::Uniform => vec![(1.0, 0.0, 0.0)],
            Self::VonMises { kappa, mean } => vec![(1.0, kappa, mean)],
            Self::TwoCluster {
                theta1,
                theta2,
                weight,
                kappa,
            } => vec![(weight, kappa, theta1), (1.0 - weight, kappa, theta2)],
            Self::TwistedVonMises { kappa, mean, twist } => {
                vec![(1.0, kappa, mean + TAU * twist * x)]
            }
            Self::VonMisesRamp {
                kappa_start,
                kappa_end,
                mean,
            } => vec![(1.0, kappa_start + (kappa_end - kappa_start) * x, mean)],
        }
    }

    /// Density `ρ⁰(·, x)` with its CDF table.
    pub fn at(&self, x: f64) -> Result<ConditionalDensity> {
        self.validate()?;
        Ok(ConditionalDensity::new(self.components(x)))
    }
}

fn finite(v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("parameter {v} is not finite")))
    }
}

/// `e^{−κ} I₀(κ)` by the periodic trapezoid rule.
fn scaled_bessel_i0(kappa: f64) -> f64 {
    let h = TAU / BESSEL_NODES as f64;
    (0..BESSEL_NODES)
        .map(|k| (kappa * ((k as f64 * h).cos() - 1.0)).exp())
        .sum::<f64>()
        / BESSEL_NODES as f64
}

/// A single density on the circle with a tabulated CDF on `[0, 2π]`.
#[derive(Debug, Clone)]
pub struct ConditionalDensity {
    /// `(weight / (2π e^{−κ}I₀(κ)), κ, mean)`
    terms: Vec<(f64, f64, f64)>,
    uniform: bool,
    cdf_table: Vec<f64>,
    /// Simpson total used to normalize the table.
    norm: f64,
}

impl ConditionalDensity {
    fn new(components: Vec<(f64, f64, f64)>) -> Self {
        let uniform = components.iter().all(|&(w, k, _)| k == 0.0 || w == 0.0);
        let terms: Vec<(f64, f64, f64)> = components
            .into_iter()
            .filter(|&(w, _, _)| w > 0.0)
            .map(|(w, k, m)| (w / (TAU * scaled_bessel_i0(k)), k, m))
            .collect();
        let mut d = Self {
            terms,
            uniform,
            cdf_table: Vec::new(),
            norm: 1.0,
        };
        if !uniform {
            let h = TAU / TABLE_INTERVALS as f64;
            let mut table = Vec::with_capacity(TABLE_INTERVALS + 1);
            let mut acc = 0.0;
            table.push(0.0);
            for k in 0..TABLE_INTERVALS {
                acc += d.simpson(k as f64 * h, (k + 1) as f64 * h);
                table.push(acc);
            }
            for v in &mut table {
                *v /= acc;
            }
            d.cdf_table = table;
            d.norm = acc;
        }
        d
    }

    pub fn pdf(&self, u: f64) -> f64 {
        if self.uniform {
            return 1.0 / TAU;
        }
        self.terms
            .iter()
            .map(|&(c, k, m)| c * (k * ((u - m).cos() - 1.0)).exp())
            .sum()
    }

    fn simpson(&self, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (self.pdf(a) + 4.0 * self.pdf(0.5 * (a + b)) + self.pdf(b))
    }

    /// `P(0 ≤ θ ≤ u)` for `u ∈ [0, 2π]`.
    pub fn cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, TAU);
        if self.uniform {
            return u / TAU;
        }
        let h = TAU / TABLE_INTERVALS as f64;
        let k = ((u / h) as usize).min(TABLE_INTERVALS - 1);
        let a = k as f64 * h;
        (self.cdf_table[k] + self.simpson(a, u) / self.norm).min(1.0)
    }

    /// Smallest `u ∈ [0, 2π)` with `cdf(u) = q`.
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        if self.uniform {
            return (TAU * q).min(TAU * (1.0 - f64::EPSILON));
        }
        let h = TAU / TABLE_INTERVALS as f64;
        let k = self
            .cdf_table
            .partition_point(|&c| c <= q)
            .saturating_sub(1)
            .min(TABLE_INTERVALS - 1);
        let (mut lo, mut hi) = (k as f64 * h, (k + 1) as f64 * h);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let u = 0.5 * (lo + hi);
        if u >= TAU {
            0.0
        } else {
            u
        }
    }
}

/// Representative point `x = i/n` of cell `i` (one-based).
pub(crate) fn cell_point(cell: usize, n: usize) -> f64 {
    (cell + 1) as f64 / n as f64
}

/// Initial phases for `n` cells of `m` particles, cell-major.
pub(crate) fn initial_phases(
    density: &InitialDensity,
    n: usize,
    m: usize,
    mode: InitMode,
) -> Result<Vec<f64>> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter("need n, m >= 1".into()));
    }
    density.validate()?;
    let mut phases = Vec::with_capacity(n * m);
    for i in 0..n {
        let rho = density.at(cell_point(i, n))?;
        match mode {
            InitMode::Quantile => {
                phases.extend((0..m).map(|k| rho.quantile((k as f64 + 0.5) / m as f64)));
            }
            InitMode::Iid { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                phases.extend((0..m).map(|_| rho.quantile(rng.random::<f64>())));
            }
        }
    }
    Ok(phases)
}

/// Atoms of `ρ⁰` on `n` cells with `m` atoms of mass `1/m` per cell.
pub fn initial_family(
    density: &InitialDensity,
    n: usize,
    m: usize,
    mode: InitMode,
) -> Result<MeasureFamily> {
    empirical_from_phases(&initial_phases(density, n, m, mode)?, n, m)
}
