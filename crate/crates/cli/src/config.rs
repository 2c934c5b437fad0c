//! Experiment configuration. Unknown keys are rejected so that typos fail
//! loudly instead of silently falling back to defaults.

use std::path::{Path, PathBuf};

use gkm_core::dynamics::{CouplingFunction, OmegaSpec};
use gkm_core::graphon::GraphonSpec;
use gkm_core::meanfield::MAX_PARTICLES;
use gkm_core::measure::{InitMode, InitialDensity};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Simulate,
    SampleGraph,
    MeanfieldParticles,
    MeanfieldFv,
    Picard,
    ConvergenceMain,
    ConvergenceAve,
    StabilityKernel,
    StabilityInitial,
    Distance,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::SampleGraph => "sample_graph",
            Self::MeanfieldParticles => "meanfield_particles",
            Self::MeanfieldFv => "meanfield_fv",
            Self::Picard => "picard",
            Self::ConvergenceMain => "convergence_main",
            Self::ConvergenceAve => "convergence_ave",
            Self::StabilityKernel => "stability_kernel",
            Self::StabilityInitial => "stability_initial",
            Self::Distance => "distance",
        }
    }

    fn needs_m(self) -> bool {
        matches!(
            self,
            Self::MeanfieldParticles
                | Self::Picard
                | Self::ConvergenceMain
                | Self::StabilityKernel
                | Self::StabilityInitial
        )
    }
}

/// `D(u) = sin(u + α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingSpec {
    #[default]
    Sine,
    SineShift {
        alpha: f64,
    },
}

impl CouplingSpec {
    pub fn build(self) -> CouplingFunction {
        match self {
            Self::Sine => CouplingFunction::Sine,
            Self::SineShift { alpha } => CouplingFunction::SineShift { alpha },
        }
    }
}

/// Whether `simulate` runs on `G(W, X_n)` or on a sampled W-random graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    #[default]
    Deterministic,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_graphon")]
    pub graphon: GraphonSpec,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub m: Vec<usize>,
    #[serde(default = "default_horizon", alias = "T")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub coupling: CouplingSpec,
    /// Coupling strength `K` of the finite oscillator model.
    #[serde(default = "default_strength")]
    pub strength: f64,
    #[serde(default)]
    pub omega: OmegaSpec,
    #[serde(default = "default_initial")]
    pub initial: InitialDensity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_mode: Option<InitMode>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub graph_mode: GraphMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
    /// Grid size `g` of the finite-volume solver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    /// Reference resolution for `convergence_main`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Resolution>,
    /// Second kernel for `stability_kernel`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_graphon: Option<GraphonSpec>,
    /// Compare against the cell average at this coarser resolution instead
    /// of `second_graphon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse_n: Option<usize>,
    /// Amplitude of the uniform phase perturbation for `stability_initial`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<f64>,
    /// Two serialized measure families for `distance`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<PathBuf>,
}

fn default_graphon() -> GraphonSpec {
    GraphonSpec::Constant { p: 0.5 }
}

fn default_horizon() -> f64 {
    1.0
}

fn default_dt() -> f64 {
    0.01
}

fn default_strength() -> f64 {
    1.0
}

fn default_initial() -> InitialDensity {
    InitialDensity::VonMises {
        kappa: 2.0,
        mean: std::f64::consts::PI,
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// A config with every optional field at its default.
    pub fn new(experiment: Experiment) -> Self {
        serde_json::from_value(serde_json::json!({ "experiment": experiment.name() }))
            .expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Fills experiment-specific defaults so that the manifest records the
    /// values actually used, then validates.
    pub fn resolved(mut self) -> Result<Self> {
        use Experiment::*;
        let e = self.experiment;
        if self.n.is_empty() && e != Distance {
            self.n = match e {
                ConvergenceMain => vec![4, 8],
                ConvergenceAve => vec![64, 256, 1024],
                SampleGraph | Simulate => vec![64],
                _ => vec![8],
            };
        }
        if self.m.is_empty() && e.needs_m() {
            self.m = match e {
                ConvergenceMain => vec![16, 64, 256],
                _ => vec![64],
            };
        }
        if self.seeds.is_empty() && matches!(e, SampleGraph | ConvergenceAve | StabilityInitial) {
            self.seeds = (0..5).collect();
        }
        if self.seeds.is_empty() && e == Simulate {
            self.seeds = vec![0];
        }
        if self.init_mode.is_none() && e != Distance && e != SampleGraph {
            self.init_mode = Some(match e {
                Simulate => InitMode::Iid { seed: self.seeds[0] },
                _ => InitMode::Quantile,
            });
        }
        if self.record_every.is_none() && e != Distance && e != SampleGraph {
            self.record_every = Some(match e {
                Picard => 1,
                _ => 10,
            });
        }
        match e {
            MeanfieldFv => {
                self.grid.get_or_insert(256);
            }
            Picard => {
                self.alpha.get_or_insert(gkm_core::measure::DEFAULT_ALPHA);
                self.tol.get_or_insert(1e-4);
                self.max_iter.get_or_insert(15);
            }
            ConvergenceMain => {
                let n_max = *self.n.iter().max().unwrap_or(&1);
                let m_max = *self.m.iter().max().unwrap_or(&1);
                self.reference.get_or_insert(Resolution {
                    n: 2 * n_max,
                    m: 4 * m_max,
                });
            }
            StabilityInitial => {
                self.perturbation.get_or_insert(0.1);
            }
            _ => {}
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        use Experiment::*;
        let e = self.experiment;
        if e != Distance {
            self.graphon.build()?;
            self.initial.validate()?;
            if self.n.contains(&0) || self.m.contains(&0) {
                return Err(config_err("n and m entries must be positive"));
            }
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(config_err(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(config_err(format!("dt must lie in (0, horizon], got {}", self.dt)));
        }
        if self.record_every == Some(0) {
            return Err(config_err("record_every must be >= 1"));
        }
        if e.needs_m() {
            let mut pairs: Vec<(usize, usize)> =
                self.n.iter().flat_map(|&n| self.m.iter().map(move |&m| (n, m))).collect();
            if let Some(r) = self.reference {
                pairs.push((r.n, r.m));
            }
            for (n, m) in pairs {
                if n.checked_mul(m).is_none_or(|big| big > MAX_PARTICLES) {
                    return Err(CliError::Core(gkm_core::Error::Capacity {
                        what: "particles",
                        value: n.saturating_mul(m),
                        limit: MAX_PARTICLES,
                    }));
                }
            }
        }
        match e {
            ConvergenceMain => {
                let r = self.reference.expect("resolved");
                let n_max = *self.n.iter().max().unwrap();
                let m_max = *self.m.iter().max().unwrap();
                if r.n < 2 * n_max || r.m < 4 * m_max {
                    return Err(config_err(format!(
                        "reference ({}, {}) must satisfy n >= 2·{n_max} and m >= 4·{m_max}",
                        r.n, r.m
                    )));
                }
            }
            StabilityKernel => {
                if self.second_graphon.is_none() == self.coarse_n.is_none() {
                    return Err(config_err("stability_kernel needs exactly one of second_graphon, coarse_n"));
                }
                if let Some(g) = &self.second_graphon {
                    g.build()?;
                }
                if let Some(c) = self.coarse_n {
                    if c == 0 || self.n.iter().any(|&n| n % c != 0) {
                        return Err(config_err("coarse_n must divide every n"));
                    }
                }
            }
            StabilityInitial => {
                let p = self.perturbation.expect("resolved");
                if !(p >= 0.0 && p.is_finite()) {
                    return Err(config_err("perturbation must be >= 0"));
                }
            }
            Picard => {
                if self.alpha.expect("resolved") <= 2.0 {
                    return Err(config_err("alpha must exceed 2"));
                }
            }
            MeanfieldFv => {
                if self.grid.expect("resolved") < 2 {
                    return Err(config_err("grid must be >= 2"));
                }
            }
            Distance if self.inputs.len() != 2 => {
                return Err(config_err("distance needs exactly two input files"));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
