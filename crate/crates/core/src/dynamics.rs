//! Finite coupled oscillator systems
//! `u̇_i = ω_i + (K/n) Σ_j W_ij D(u_j − u_i)` and their time integration.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::graphon::StepGraphon;
use crate::io::fmt_f64;
use crate::TAU;

/// Rows above this size are evaluated in parallel.
const PAR_THRESHOLD: usize = 256;

pub type CouplingFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The 2π-periodic interaction function `D` with `|D| ≤ 1` and Lipschitz
/// constant at most 1.
#[derive(Clone)]
pub enum CouplingFunction {
    Sine,
    SineShift { alpha: f64 },
    Custom { f: CouplingFn, lipschitz_bound: f64 },
}

impl fmt::Debug for CouplingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sine => write!(f, "Sine"),
            Self::SineShift { alpha } => write!(f, "SineShift({alpha})"),
            Self::Custom { lipschitz_bound, .. } => {
                write!(f, "Custom(lipschitz <= {lipschitz_bound})")
            }
        }
    }
}

impl CouplingFunction {
    /// Wraps a closure after sampling periodicity, `|D| ≤ 1` and the declared
    /// Lipschitz bound (which must not exceed 1) on a 4096-point grid.
    pub fn custom<F>(f: F, lipschitz_bound: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(lipschitz_bound > 0.0 && lipschitz_bound <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "coupling Lipschitz bound must lie in (0, 1], got {lipschitz_bound}"
            )));
        }
        const SAMPLES: usize = 4096;
        let h = TAU / SAMPLES as f64;
        let mut prev = f(0.0);
        for k in 1..=SAMPLES {
            let u = k as f64 * h;
            let v = f(u);
            if !v.is_finite() || v.abs() > 1.0 {
                return Err(Error::InvalidParameter(format!("|D({u})| = {} > 1", v.abs())));
            }
            if (v - prev).abs() > lipschitz_bound * h * (1.0 + 1e-9) + 1e-15 {
                return Err(Error::InvalidParameter(format!(
                    "coupling exceeds Lipschitz bound near u = {u}"
                )));
            }
            if (f(u - TAU) - v).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("coupling not 2π-periodic at {u}")));
            }
            prev = v;
        }
        Ok(Self::Custom {
            f: Arc::new(f),
            lipschitz_bound,
        })
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Self::Sine => u.sin(),
            Self::SineShift { alpha } => (u + alpha).sin(),
            Self::Custom { f, .. } => f(u),
        }
    }

    /// Phase shift `α` when `D(u) = sin(u + α)`.
    pub fn harmonic_shift(&self) -> Option<f64> {
        match self {
            Self::Sine => Some(0.0),
            Self::SineShift { alpha } => Some(*alpha),
            Self::Custom { .. } => None,
        }
    }
}

/// Phases interpreted mod 2π at a given model time.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub phases: Vec<f64>,
    pub time: f64,
}

impl PhaseState {
    pub fn new(phases: Vec<f64>) -> Self {
        Self { phases, time: 0.0 }
    }

    pub fn n(&self) -> usize {
        self.phases.len()
    }

    /// Copy with every phase reduced to `[0, 2π)`.
    pub fn reduced(&self) -> Self {
        Self {
            phases: self.phases.iter().map(|&u| reduce_phase(u)).collect(),
            time: self.time,
        }
    }
}

pub fn reduce_phase(u: f64) -> f64 {
    let r = u.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Who couples to whom.
#[derive(Debug, Clone)]
pub enum Interaction {
    /// Arbitrary dense weight matrix.
    Dense(WeightedGraph),
    /// `n` cells of `per_cell` oscillators each; oscillators in cells `k` and
    /// `i` interact with weight `W_ki`. This is the dense matrix with
    /// constant `per_cell × per_cell` blocks, stored compactly.
    Blocks { weights: StepGraphon, per_cell: usize },
}

impl Interaction {
    pub fn len(&self) -> usize {
        match self {
            Self::Dense(g) => g.n(),
            Self::Blocks { weights, per_cell } => weights.n() * per_cell,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Expands block weights into the equivalent dense graph.
    pub fn to_dense(&self) -> Result<WeightedGraph> {
        match self {
            Self::Dense(g) => Ok(g.clone()),
            Self::Blocks { weights, per_cell } => {
                let big = weights.n() * per_cell;
                let mut values = Vec::with_capacity(big * big);
                for a in 0..big {
                    for b in 0..big {
                        values.push(weights.get(a / per_cell, b / per_cell));
                    }
                }
                WeightedGraph::from_matrix(big, values)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct OscillatorSystem {
    interaction: Interaction,
    coupling: CouplingFunction,
    strength: f64,
    omega: Vec<f64>,
}

impl OscillatorSystem {
    pub fn new(
        interaction: Interaction,
        coupling: CouplingFunction,
        strength: f64,
        omega: Vec<f64>,
    ) -> Result<Self> {
        if omega.len() != interaction.len() {
            return Err(Error::DimensionMismatch {
                expected: interaction.len(),
                got: omega.len(),
            });
        }
        if let Interaction::Blocks { per_cell: 0, .. } = interaction {
            return Err(Error::InvalidParameter("blocks need at least one oscillator".into()));
        }
        Ok(Self {
            interaction,
            coupling,
            strength,
            omega,
        })
    }

    /// `K = 1`, `ω ≡ 0` on a dense graph.
    pub fn plain(graph: WeightedGraph, coupling: CouplingFunction) -> Self {
        let n = graph.n();
        Self::new(Interaction::Dense(graph), coupling, 1.0, vec![0.0; n]).unwrap()
    }

    pub fn n(&self) -> usize {
        self.interaction.len()
    }

    pub fn interaction(&self) -> &Interaction {
        &self.interaction
    }

    pub fn coupling(&self) -> &CouplingFunction {
        &self.coupling
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// Phase velocities at `state`.
    pub fn rhs(&self, state: &PhaseState) -> Result<Vec<f64>> {
        if state.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: state.n(),
            });
        }
        let mut out = vec![0.0; self.n()];
        self.rhs_into(&state.phases, &mut out);
        Ok(out)
    }

    pub(crate) fn rhs_into(&self, u: &[f64], out: &mut [f64]) {
        match &self.interaction {
            Interaction::Dense(g) => self.dense_rhs(g, u, out),
            Interaction::Blocks { weights, per_cell } => self.block_rhs(weights, *per_cell, u, out),
        }
    }

    fn dense_rhs(&self, g: &WeightedGraph, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        let scale = self.strength / n as f64;
        if let Some(alpha) = self.coupling.harmonic_shift() {
            // Σ_j w_ij sin(u_j − u_i + α) = Im(e^{i(α−u_i)} Σ_j w_ij e^{i u_j})
            let phasors: Vec<(f64, f64)> = u.iter().map(|&v| v.sin_cos()).collect();
            let (sa, ca) = alpha.sin_cos();
            let row = |i: usize| {
                let (fs, fc) = g
                    .row(i)
                    .iter()
                    .zip(&phasors)
                    .fold((0.0, 0.0), |(s, c), (&w, &(sj, cj))| (s + w * sj, c + w * cj));
                let (su, cu) = phasors[i];
                let re = ca * cu + sa * su;
                let im = sa * cu - ca * su;
                self.omega[i] + scale * (re * fs + im * fc)
            };
            if n >= PAR_THRESHOLD {
                out.par_iter_mut().enumerate().for_each(|(i, o)| *o = row(i));
            } else {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = row(i);
                }
            }
            return;
        }
        let d = &self.coupling;
        let row = |i: usize| {
            let ui = u[i];
            let sum: f64 = g
                .row(i)
                .iter()
                .zip(u)
                .map(|(&w, &uj)| if w == 0.0 { 0.0 } else { w * d.eval(uj - ui) })
                .sum();
            self.omega[i] + scale * sum
        };
        if n >= PAR_THRESHOLD {
            out.par_iter_mut().enumerate().for_each(|(i, o)| *o = row(i));
        } else {
            for (i, o) in out.iter_mut().enumerate() {
                *o = row(i);
            }
        }
    }

    fn block_rhs(&self, weights: &StepGraphon, m: usize, u: &[f64], out: &mut [f64]) {
        let n = weights.n();
        let big = (n * m) as f64;
        let scale = self.strength / big;
        match self.coupling.harmonic_shift() {
            Some(alpha) => {
                // Σ_j sin(v_j − u + α) = Im(e^{i(α−u)} Σ_j e^{i v_j})
                let moments: Vec<(f64, f64)> = u
                    .chunks(m)
                    .map(|cell| {
                        cell.iter()
                            .fold((0.0, 0.0), |(c, s), &v| (c + v.cos(), s + v.sin()))
                    })
                    .collect();
                let field: Vec<(f64, f64)> = (0..n)
                    .map(|k| {
                        weights
                            .row(k)
                            .iter()
                            .zip(&moments)
                            .fold((0.0, 0.0), |(c, s), (&w, &(mc, ms))| (c + w * mc, s + w * ms))
                    })
                    .collect();
                let (sa, ca) = alpha.sin_cos();
                let kernel = |idx: usize| {
                    let (fc, fs) = field[idx / m];
                    let (su, cu) = u[idx].sin_cos();
                    // e^{i(α−u)} = (cos α cos u + sin α sin u) + i(sin α cos u − cos α sin u)
                    let re = ca * cu + sa * su;
                    let im = sa * cu - ca * su;
                    self.omega[idx] + scale * (re * fs + im * fc)
                };
                if u.len() >= PAR_THRESHOLD * 16 {
                    out.par_iter_mut().enumerate().for_each(|(i, o)| *o = kernel(i));
                } else {
                    for (i, o) in out.iter_mut().enumerate() {
                        *o = kernel(i);
                    }
                }
            }
            None => {
                let d = &self.coupling;
                let kernel = |idx: usize| {
                    let ui = u[idx];
                    let row = weights.row(idx / m);
                    let mut sum = 0.0;
                    for (cell, &w) in u.chunks(m).zip(row) {
                        if w != 0.0 {
                            sum += w * cell.iter().map(|&v| d.eval(v - ui)).sum::<f64>();
                        }
                    }
                    self.omega[idx] + scale * sum
                };
                out.par_iter_mut().enumerate().for_each(|(i, o)| *o = kernel(i));
            }
        }
    }
}

/// Scratch space for classic fourth-order Runge–Kutta steps.
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// Advances `y` from `t` to `t + h` with the field `f(t, y, out)`.
    pub(crate) fn step<F>(&mut self, f: &mut F, t: f64, y: &mut [f64], h: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let half = 0.5 * h;
        f(t, y, &mut self.k1);
        for ((tmp, &y), &k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k1) {
            *tmp = y + half * k;
        }
        f(t + half, &self.tmp, &mut self.k2);
        for ((tmp, &y), &k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k2) {
            *tmp = y + half * k;
        }
        f(t + half, &self.tmp, &mut self.k3);
        for ((tmp, &y), &k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k3) {
            *tmp = y + h * k;
        }
        f(t + h, &self.tmp, &mut self.k4);
        let sixth = h / 6.0;
        for i in 0..y.len() {
            y[i] += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Time grid of a fixed-step run: full steps of `dt`, then one shortened
/// step landing on `horizon` when `dt` does not divide it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub dt: f64,
    pub full_steps: usize,
    pub remainder: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("T must be >= 0, got {horizon}")));
        }
        let ratio = horizon / dt;
        let mut full_steps = ratio.floor() as usize;
        // absorb round-off such as 1.0 / 0.1 = 9.999...
        if ratio - full_steps as f64 > 1.0 - 1e-9 {
            full_steps += 1;
        }
        let remainder = horizon - full_steps as f64 * dt;
        let remainder = if remainder.abs() <= 1e-12 * dt.max(horizon) {
            0.0
        } else {
            remainder
        };
        Ok(Self {
            horizon,
            dt,
            full_steps,
            remainder,
        })
    }

    pub fn steps(&self) -> usize {
        self.full_steps + usize::from(self.remainder > 0.0)
    }

    /// Start time and length of step `k`.
    pub fn step(&self, k: usize) -> (f64, f64) {
        let t = k as f64 * self.dt;
        if k < self.full_steps {
            (t, self.dt)
        } else {
            (t, self.horizon - t)
        }
    }

    pub fn time_after(&self, k: usize) -> f64 {
        if k + 1 >= self.steps() {
            self.horizon
        } else {
            (k + 1) as f64 * self.dt
        }
    }

    /// Whether the state after step `k` is recorded.
    pub fn records_after(&self, k: usize, record_every: usize) -> bool {
        (k + 1) % record_every == 0 || k + 1 == self.steps()
    }
}

/// Recorded states of a run, phases kept as unreduced reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<PhaseState>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.time).collect()
    }

    pub fn last(&self) -> &PhaseState {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    /// CSV with columns `t, u_1..u_n, r, psi`; phases reduced to `[0, 2π)`.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, PhaseState::n);
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",u_{i}"));
        }
        out.push_str(",r,psi\n");
        for s in &self.states {
            let red = s.reduced();
            let (r, psi) = order_parameter(&s.phases);
            let mut fields = vec![fmt_f64(s.time)];
            fields.extend(red.phases.iter().map(|&u| fmt_f64(u)));
            fields.push(fmt_f64(r));
            fields.push(fmt_f64(psi));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

/// Classic RK4 with fixed step `dt` up to `horizon`. Records the initial
/// state, every `record_every`-th step and the final state.
pub fn integrate(
    sys: &OscillatorSystem,
    state0: &PhaseState,
    horizon: f64,
    dt: f64,
    record_every: usize,
) -> Result<Trajectory> {
    if state0.n() != sys.n() {
        return Err(Error::DimensionMismatch {
            expected: sys.n(),
            got: state0.n(),
        });
    }
    if record_every == 0 {
        return Err(Error::InvalidParameter("record_every must be >= 1".into()));
    }
    let grid = TimeGrid::new(horizon, dt)?;
    let mut y = state0.phases.clone();
    let t0 = state0.time;
    let mut rk = Rk4::new(y.len());
    let mut field = |_: f64, u: &[f64], out: &mut [f64]| sys.rhs_into(u, out);
    let mut states = vec![state0.clone()];
    for k in 0..grid.steps() {
        let (t, h) = grid.step(k);
        rk.step(&mut field, t0 + t, &mut y, h);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k });
        }
        if grid.records_after(k, record_every) {
            states.push(PhaseState {
                phases: y.clone(),
                time: t0 + grid.time_after(k),
            });
        }
    }
    Ok(Trajectory { states })
}

/// `r e^{iψ} = n⁻¹ Σ_j e^{i u_j}`, with `ψ = 0` when `r < 10⁻¹⁵`.
pub fn order_parameter(phases: &[f64]) -> (f64, f64) {
    if phases.is_empty() {
        return (0.0, 0.0);
    }
    let n = phases.len() as f64;
    let (c, s) = phases
        .iter()
        .fold((0.0, 0.0), |(c, s), &u| (c + u.cos(), s + u.sin()));
    let (c, s) = (c / n, s / n);
    let r = c.hypot(s).min(1.0);
    if r < 1e-15 {
        (r, 0.0)
    } else {
        (r, reduce_phase(s.atan2(c)))
    }
}

/// Discrete `L²` norm `√(n⁻¹ Σ (a_i − b_i)²)` of unwrapped differences.
pub fn norm_1n(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((s / a.len() as f64).sqrt())
}

/// True when some component pair differs by more than π, making the
/// unwrapped comparison chart dependent.
pub fn exceeds_half_turn(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).any(|(x, y)| (x - y).abs() > PI)
}

/// `max_t ‖u(t) − ũ(t)‖_{1,n}` over two trajectories on the same time grid.
pub fn sup_norm_1n(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.states.len() != b.states.len() {
        return Err(Error::GridMismatch);
    }
    let mut worst: f64 = 0.0;
    for (x, y) in a.states.iter().zip(&b.states) {
        if x.time != y.time {
            return Err(Error::GridMismatch);
        }
        worst = worst.max(norm_1n(&x.phases, &y.phases)?);
    }
    Ok(worst)
}

/// Intrinsic frequency assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OmegaSpec {
    Zero,
    Constant { c: f64 },
    Normal { mean: f64, sd: f64, seed: u64 },
}

impl Default for OmegaSpec {
    fn default() -> Self {
        Self::Zero
    }
}

impl OmegaSpec {
    pub fn build(&self, n: usize) -> Result<Vec<f64>> {
        Ok(match *self {
            Self::Zero => vec![0.0; n],
            Self::Constant { c } => vec![c; n],
            Self::Normal { mean, sd, seed } => {
                if !(sd >= 0.0 && sd.is_finite() && mean.is_finite()) {
                    return Err(Error::InvalidParameter(format!("omega normal: sd = {sd}, mean = {mean}")));
                }
                let dist = Normal::new(mean, sd)
                    .map_err(|e| Error::InvalidParameter(format!("omega normal: {e}")))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n).map(|_| dist.sample(&mut rng)).collect()
            }
        })
    }
}
