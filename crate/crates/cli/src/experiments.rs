//! One function per experiment. Each writes `results.csv` plus experiment
//! specific artifacts into the output directory; [`run`] adds the manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gkm_core::dynamics::{integrate, order_parameter, sup_norm_1n, Interaction, OscillatorSystem, PhaseState};
use gkm_core::graph::{deterministic_graph, pixel_picture, sample_w_random, WeightedGraph};
use gkm_core::graphon::{cell_average, StepGraphon};
use gkm_core::io::fmt_f64;
use gkm_core::meanfield::{
    picard_solve, run_stability, solve_fv, solve_particles, DensityField, ParticleEnsemble,
    StabilityExperiment, StabilityReport, VelocityFieldSpec,
};
use gkm_core::measure::{dbar_refined, initial_family, InitMode, MeasureFamily, MeasureTrajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig, GraphMode};
use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const RESULTS: &str = "results.csv";

/// What a run wrote, recorded next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|source| CliError::Io { path, source })?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Runs the experiment named by `config` (after resolving defaults) and
/// returns the manifest it wrote.
pub fn run(config: ExperimentConfig) -> Result<Manifest> {
    let config = config.resolved()?;
    let mut out = Output::create(&config.output_dir)?;
    let results = match config.experiment {
        Experiment::Simulate => simulate(&config, &mut out)?,
        Experiment::SampleGraph => sample_graph(&config, &mut out)?,
        Experiment::MeanfieldParticles => meanfield_particles(&config, &mut out)?,
        Experiment::MeanfieldFv => meanfield_fv(&config, &mut out)?,
        Experiment::Picard => picard(&config, &mut out)?,
        Experiment::ConvergenceMain => convergence_main(&config)?,
        Experiment::ConvergenceAve => convergence_ave(&config, &mut out)?,
        Experiment::StabilityKernel => stability_kernel(&config)?,
        Experiment::StabilityInitial => stability_initial(&config)?,
        Experiment::Distance => distance(&config)?,
    };
    out.write(RESULTS, results)?;
    let manifest = Manifest {
        tool: "gkm".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config,
        files: out.files.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    out.write(MANIFEST, text + "\n")?;
    Ok(manifest)
}

/// Re-runs a manifest, optionally into a different directory.
pub fn rerun(manifest: &Path, output_dir: Option<PathBuf>) -> Result<Manifest> {
    let mut config = Manifest::load(manifest)?.config;
    if let Some(dir) = output_dir {
        config.output_dir = dir;
    }
    run(config)
}

/// Writes the pixel picture of a CSV matrix as binary PGM.
pub fn render(input: &Path, output: &Path) -> Result<()> {
    let text = std::fs::read_to_string(input).map_err(|source| CliError::Io {
        path: input.to_path_buf(),
        source,
    })?;
    let (n, values) = gkm_core::io::matrix_from_csv(&text)?;
    let img = gkm_core::graph::matrix_picture(n, &values);
    std::fs::write(output, img.to_pgm()).map_err(|source| CliError::Io {
        path: output.to_path_buf(),
        source,
    })
}

fn velocity_spec(config: &ExperimentConfig, n: usize) -> Result<VelocityFieldSpec> {
    Ok(VelocityFieldSpec::new(
        cell_average(&config.graphon.build()?, n)?,
        config.coupling.build(),
    ))
}

fn init_mode(config: &ExperimentConfig) -> InitMode {
    config.init_mode.unwrap_or_default()
}

fn record_every(config: &ExperimentConfig) -> usize {
    config.record_every.unwrap_or(1)
}

/// Order parameter of the union of all cells, each cell with weight `1/n`.
fn family_order(fam: &MeasureFamily) -> f64 {
    let (mut c, mut s) = (0.0, 0.0);
    for cell in fam.cells() {
        for (p, w) in cell.atoms() {
            c += w * p.cos();
            s += w * p.sin();
        }
    }
    let n = fam.n_cells() as f64;
    (c / n).hypot(s / n)
}

fn simulate(config: &ExperimentConfig, out: &mut Output) -> Result<String> {
    let w = config.graphon.build()?;
    let mut table = String::from("n,t,r,psi\n");
    for &n in &config.n {
        let graph = match config.graph_mode {
            GraphMode::Deterministic => deterministic_graph(&w, n)?,
            GraphMode::Sampled => sample_w_random(&w, n, config.seeds[0])?,
        };
        out.write(&format!("graph_n{n}.pgm"), pixel_picture(&graph).to_pgm())?;
        let sys = OscillatorSystem::new(
            Interaction::Dense(graph),
            config.coupling.build(),
            config.strength,
            config.omega.build(n)?,
        )?;
        let u0 = ParticleEnsemble::from_density(&config.initial, n, 1, init_mode(config))?;
        let traj = integrate(&sys, &PhaseState::new(u0.phases().to_vec()), config.horizon, config.dt, record_every(config))?;
        for st in &traj.states {
            let (r, psi) = order_parameter(&st.phases);
            writeln!(table, "{n},{},{},{}", fmt_f64(st.time), fmt_f64(r), fmt_f64(psi)).unwrap();
        }
        out.write(&format!("trajectory_n{n}.csv"), traj.to_csv())?;
    }
    Ok(table)
}

fn sample_graph(config: &ExperimentConfig, out: &mut Output) -> Result<String> {
    let w = config.graphon.build()?;
    let mut table = String::from("n,seed,edge_density\n");
    for &n in &config.n {
        let graphs: Vec<(u64, WeightedGraph)> = config
            .seeds
            .par_iter()
            .map(|&seed| sample_w_random(&w, n, seed).map(|g| (seed, g)))
            .collect::<gkm_core::Result<_>>()?;
        for (seed, g) in graphs {
            out.write(&format!("graph_n{n}_seed{seed}.csv"), g.to_csv())?;
            out.write(&format!("graph_n{n}_seed{seed}.pgm"), pixel_picture(&g).to_pgm())?;
            writeln!(table, "{n},{seed},{}", fmt_f64(g.edge_density())).unwrap();
        }
    }
    Ok(table)
}

fn pairs(config: &ExperimentConfig) -> Vec<(usize, usize)> {
    config.n.iter().flat_map(|&n| config.m.iter().map(move |&m| (n, m))).collect()
}

fn meanfield_particles(config: &ExperimentConfig, out: &mut Output) -> Result<String> {
    let mut table = String::from("n,m,t,r,max_mass_error\n");
    for (n, m) in pairs(config) {
        let spec = velocity_spec(config, n)?;
        let traj = solve_particles(
            &spec,
            &config.initial,
            m,
            init_mode(config),
            config.horizon,
            config.dt,
            record_every(config),
        )?;
        for (t, fam) in traj.times().iter().zip(traj.families()) {
            writeln!(
                table,
                "{n},{m},{},{},{}",
                fmt_f64(*t),
                fmt_f64(family_order(fam)),
                fmt_f64(fam.max_mass_error())
            )
            .unwrap();
        }
        out.write(&format!("final_n{n}_m{m}.csv"), traj.last().to_csv())?;
    }
    Ok(table)
}

fn meanfield_fv(config: &ExperimentConfig, out: &mut Output) -> Result<String> {
    let g = config.grid.expect("resolved");
    let mut table = String::from("n,t,max_mass_error\n");
    for &n in &config.n {
        let spec = velocity_spec(config, n)?;
        let rho0 = DensityField::from_density(&config.initial, n, g)?;
        let sol = solve_fv(&spec, &rho0, config.horizon, config.dt, record_every(config))?;
        for (t, f) in sol.times.iter().zip(&sol.fields) {
            writeln!(table, "{n},{},{}", fmt_f64(*t), fmt_f64(f.max_mass_error())).unwrap();
        }
        out.write(&format!("density_n{n}.csv"), sol.last().to_csv())?;
    }
    Ok(table)
}

fn picard(config: &ExperimentConfig, out: &mut Output) -> Result<String> {
    let mut table = String::from("n,m,iteration,d_alpha,contraction_ratio\n");
    for (n, m) in pairs(config) {
        let spec = velocity_spec(config, n)?;
        let mu0 = initial_family(&config.initial, n, m, init_mode(config))?;
        let sol = picard_solve(
            &spec,
            &mu0,
            config.horizon,
            config.dt,
            config.alpha.expect("resolved"),
            config.tol.expect("resolved"),
            config.max_iter.expect("resolved"),
        )?;
        let r = &sol.report;
        for (k, d) in r.d_alpha.iter().enumerate() {
            let ratio = if k == 0 { String::new() } else { fmt_f64(r.contraction_ratios[k - 1]) };
            writeln!(table, "{n},{m},{},{},{ratio}", k + 1, fmt_f64(*d)).unwrap();
        }
        out.write(&format!("report_n{n}_m{m}.json"), r.to_json() + "\n")?;
        out.write(&format!("final_n{n}_m{m}.csv"), sol.trajectory.last().to_csv())?;
    }
    Ok(table)
}

fn convergence_main(config: &ExperimentConfig) -> Result<String> {
    let reference = config.reference.expect("resolved");
    let solve = |n: usize, m: usize| -> Result<MeasureTrajectory> {
        let spec = velocity_spec(config, n)?;
        Ok(solve_particles(
            &spec,
            &config.initial,
            m,
            init_mode(config),
            config.horizon,
            config.dt,
            record_every(config),
        )?)
    };
    let target = solve(reference.n, reference.m)?;
    let rows: Vec<(usize, usize, f64)> = pairs(config)
        .par_iter()
        .map(|&(n, m)| {
            let traj = solve(n, m)?;
            Ok((n, m, traj.sup_dbar(&target)?))
        })
        .collect::<Result<_>>()?;
    let mut table = String::from("n,m,sup_dbar\n");
    for (n, m, d) in rows {
        writeln!(table, "{n},{m},{}", fmt_f64(d)).unwrap();
    }
    Ok(table)
}

fn convergence_ave(config: &ExperimentConfig, out: &mut Output) -> Result<String> {
    let w = config.graphon.build()?;
    let mut table = String::from("n,seed,sup_norm_1n\n");
    let mut summary = String::from("n,mean_sup_norm_1n\n");
    for &n in &config.n {
        let det = deterministic_graph(&w, n)?;
        let omega = config.omega.build(n)?;
        let values: Vec<f64> = config
            .seeds
            .par_iter()
            .map(|&seed| -> Result<f64> {
                let u0 = ParticleEnsemble::from_density(&config.initial, n, 1, InitMode::Iid { seed })?;
                let u0 = PhaseState::new(u0.phases().to_vec());
                let run = |g: WeightedGraph| -> Result<_> {
                    let sys = OscillatorSystem::new(
                        Interaction::Dense(g),
                        config.coupling.build(),
                        config.strength,
                        omega.clone(),
                    )?;
                    Ok(integrate(&sys, &u0, config.horizon, config.dt, record_every(config))?)
                };
                let a = run(det.clone())?;
                let b = run(sample_w_random(&w, n, seed)?)?;
                Ok(sup_norm_1n(&a, &b)?)
            })
            .collect::<Result<_>>()?;
        for (seed, v) in config.seeds.iter().zip(&values) {
            writeln!(table, "{n},{seed},{}", fmt_f64(*v)).unwrap();
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        writeln!(summary, "{n},{}", fmt_f64(mean)).unwrap();
    }
    out.write("summary.csv", summary)?;
    Ok(table)
}

fn report_row(prefix: &str, r: &StabilityReport) -> String {
    format!(
        "{prefix},{},{},{},{}\n",
        fmt_f64(r.input_distance),
        fmt_f64(r.measured),
        fmt_f64(r.bound),
        r.passed
    )
}

fn stability_kernel(config: &ExperimentConfig) -> Result<String> {
    let mut table = String::from("n,m,l1_distance,measured,bound,passed\n");
    for (n, m) in pairs(config) {
        let first = velocity_spec(config, n)?;
        let second: StepGraphon = match (&config.second_graphon, config.coarse_n) {
            (Some(g), _) => cell_average(&g.build()?, n)?,
            (None, Some(c)) => cell_average(&config.graphon.build()?, c)?.refine(n / c)?,
            (None, None) => unreachable!("validated"),
        };
        let second = VelocityFieldSpec::new(second, config.coupling.build());
        let initial = ParticleEnsemble::from_density(&config.initial, n, m, init_mode(config))?;
        let report = run_stability(
            &StabilityExperiment::Kernel { first, second, initial },
            config.horizon,
            config.dt,
        )?;
        table.push_str(&report_row(&format!("{n},{m}"), &report));
    }
    Ok(table)
}

fn stability_initial(config: &ExperimentConfig) -> Result<String> {
    let amp = config.perturbation.expect("resolved");
    let mut table = String::from("n,m,seed,dbar_initial,measured,bound,passed\n");
    for (n, m) in pairs(config) {
        let spec = velocity_spec(config, n)?;
        let base = ParticleEnsemble::from_density(&config.initial, n, m, init_mode(config))?;
        let reports: Vec<StabilityReport> = config
            .seeds
            .par_iter()
            .map(|&seed| -> Result<StabilityReport> {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let phases = base
                    .phases()
                    .iter()
                    .map(|p| p + amp * (2.0 * rng.random::<f64>() - 1.0))
                    .collect();
                let second = ParticleEnsemble::new(n, m, phases)?;
                Ok(run_stability(
                    &StabilityExperiment::InitialData {
                        spec: spec.clone(),
                        first: base.clone(),
                        second,
                    },
                    config.horizon,
                    config.dt,
                )?)
            })
            .collect::<Result<_>>()?;
        for (seed, r) in config.seeds.iter().zip(&reports) {
            table.push_str(&report_row(&format!("{n},{m},{seed}"), r));
        }
    }
    Ok(table)
}

fn read_family(path: &Path) -> Result<MeasureFamily> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(MeasureFamily::from_csv(&text)?)
}

fn distance(config: &ExperimentConfig) -> Result<String> {
    let a = read_family(&config.inputs[0])?;
    let b = read_family(&config.inputs[1])?;
    Ok(format!("dbar\n{}\n", fmt_f64(dbar_refined(&a, &b)?)))
}
