//! Integral form of Gronwall's inequality on a sampled time grid.
//!
//! If `φ(t) ≤ A∫₀ᵗ φ + B∫₀ᵗ a + C` with `A ≥ 0`, then
//! `φ(t) ≤ e^{At} (B∫₀ᵗ a(s) e^{−As} ds + C)`. Integrals use the trapezoid
//! rule on the given samples.

use crate::error::{Error, Result};

fn check_grid(times: &[f64], series: &[&[f64]]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("times must be strictly increasing".into()));
    }
    for s in series {
        if s.len() != times.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: s.len(),
            });
        }
    }
    Ok(())
}

/// Running trapezoid integrals `∫_{t₀}^{t_k} f`.
fn cumulative(times: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..times.len() {
        acc += 0.5 * (times[k] - times[k - 1]) * (f[k] + f[k - 1]);
        out.push(acc);
    }
    out
}

/// The bound `e^{At}(B∫₀ᵗ a e^{−As} ds + C)` at every grid time.
pub fn gronwall_bound(times: &[f64], a: &[f64], big_a: f64, big_b: f64, big_c: f64) -> Result<Vec<f64>> {
    check_grid(times, &[a])?;
    if !(big_a >= 0.0) {
        return Err(Error::InvalidParameter(format!("A = {big_a} must be >= 0")));
    }
    let t0 = times[0];
    let weighted: Vec<f64> = times.iter().zip(a).map(|(&t, &v)| v * (-big_a * (t - t0)).exp()).collect();
    Ok(cumulative(times, &weighted)
        .into_iter()
        .zip(times)
        .map(|(int, &t)| (big_a * (t - t0)).exp() * (big_b * int + big_c))
        .collect())
}

/// Whether `φ(t) ≤ A∫₀ᵗ φ + B∫₀ᵗ a + C + slack` at every grid time.
pub fn gronwall_hypothesis_holds(
    times: &[f64],
    phi: &[f64],
    a: &[f64],
    big_a: f64,
    big_b: f64,
    big_c: f64,
    slack: f64,
) -> Result<bool> {
    check_grid(times, &[phi, a])?;
    let int_phi = cumulative(times, phi);
    let int_a = cumulative(times, a);
    Ok((0..times.len()).all(|k| phi[k] <= big_a * int_phi[k] + big_b * int_a[k] + big_c + slack))
}
