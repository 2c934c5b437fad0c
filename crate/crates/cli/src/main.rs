use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gkm_cli::config::{CouplingSpec, GraphMode, Resolution};
use gkm_cli::shorthand::{parse_coupling, parse_graphon, parse_initial};
use gkm_cli::{Experiment, ExperimentConfig, Manifest};
use gkm_core::dynamics::OmegaSpec;
use gkm_core::graphon::GraphonSpec;
use gkm_core::measure::{InitMode, InitialDensity};

/// Kuramoto oscillators on graphons: simulations, mean-field solvers and
/// convergence experiments.
#[derive(Parser)]
#[command(name = "gkm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the finite oscillator model on G(W, X_n) or a W-random graph.
    Simulate(Common),
    /// Sample W-random graphs and write them as CSV and PGM.
    SampleGraph(Common),
    /// Solve the mean-field equation with the particle method.
    MeanfieldParticles(Common),
    /// Solve the mean-field equation with the finite-volume scheme.
    MeanfieldFv(Common),
    /// Run the Picard iteration on the fixed-point map.
    Picard(Common),
    /// Measure particle solutions against a fine reference solution.
    ConvergenceMain(Common),
    /// Compare dynamics on W-random graphs with the averaged graph.
    ConvergenceAve(Common),
    /// Check the kernel stability bound.
    StabilityKernel(Common),
    /// Check the initial-data stability bound.
    StabilityInitial(Common),
    /// Distance between two measure-family CSV files.
    Distance(Common),
    /// Run a JSON config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Re-run the config recorded in a manifest.json.
    Rerun {
        manifest: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Render a CSV matrix as a binary PGM pixel picture.
    Render { input: PathBuf, output: PathBuf },
}

/// Flags shared by every experiment. Flags override values from `--config`.
#[derive(Args)]
struct Common {
    /// Base JSON config; its `experiment` must match the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    /// e.g. `er:0.5`, `sw:0.1,0.25`, `nn:0.2` or JSON.
    #[arg(long, value_parser = parse_graphon)]
    graphon: Option<GraphonSpec>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long, alias = "T")]
    horizon: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// `sine` or `sine_shift:<alpha>`.
    #[arg(long, value_parser = parse_coupling)]
    coupling: Option<CouplingSpec>,
    #[arg(long)]
    strength: Option<f64>,
    /// Natural frequencies as JSON, e.g. `{"kind":"constant","c":1}`.
    #[arg(long, value_parser = parse_json::<OmegaSpec>)]
    omega: Option<OmegaSpec>,
    /// e.g. `uniform`, `von_mises:2,3.14`, `two_cluster:0,3,0.5` or JSON.
    #[arg(long, value_parser = parse_initial)]
    initial: Option<InitialDensity>,
    /// Draw atoms iid with this seed instead of using quantiles.
    #[arg(long)]
    iid_seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, short = 'o')]
    output_dir: Option<PathBuf>,
    /// Run `simulate` on a sampled W-random graph.
    #[arg(long)]
    sampled: bool,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Reference resolution `n,m`.
    #[arg(long, value_parser = parse_resolution)]
    reference: Option<Resolution>,
    #[arg(long, value_parser = parse_graphon)]
    second_graphon: Option<GraphonSpec>,
    #[arg(long)]
    coarse_n: Option<usize>,
    #[arg(long)]
    perturbation: Option<f64>,
    /// Input files for `distance`.
    inputs: Vec<PathBuf>,
}

fn parse_resolution(s: &str) -> Result<Resolution, String> {
    let (n, m) = s.split_once(',').ok_or_else(|| format!("expected n,m, got '{s}'"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("'{v}': {e}"));
    Ok(Resolution { n: parse(n)?, m: parse(m)? })
}

fn parse_json<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_str(s).map_err(|e| e.to_string())
}

impl Common {
    fn into_config(self, experiment: Experiment) -> gkm_cli::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::new(experiment),
        };
        if c.experiment != experiment {
            return Err(gkm_cli::CliError::Config(format!(
                "config is for '{}' but the subcommand is '{}'",
                c.experiment.name(),
                experiment.name()
            )));
        }
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { c.$field = v; } )* };
        }
        macro_rules! set_opt {
            ($($field:ident),*) => { $( if self.$field.is_some() { c.$field = self.$field; } )* };
        }
        set!(graphon, n, m, horizon, dt, coupling, strength, omega, initial, seeds, output_dir);
        set_opt!(record_every, reference, grid, alpha, tol, max_iter, second_graphon, coarse_n, perturbation);
        if let Some(seed) = self.iid_seed {
            c.init_mode = Some(InitMode::Iid { seed });
        }
        if self.sampled {
            c.graph_mode = GraphMode::Sampled;
        }
        if !self.inputs.is_empty() {
            c.inputs = self.inputs;
        }
        Ok(c)
    }
}

fn report(manifest: &Manifest) {
    let dir = &manifest.config.output_dir;
    let mut stdout = std::io::stdout().lock();
    // a closed pipe (e.g. `| head`) is not an error worth reporting
    let _ = writeln!(stdout, "{}: results in {}", manifest.config.experiment.name(), dir.display());
    let results = dir.join(gkm_cli::experiments::RESULTS);
    if let Ok(text) = std::fs::read_to_string(results) {
        // short tables are worth echoing; long trajectories are not
        if text.lines().count() <= 40 {
            let _ = stdout.write_all(text.as_bytes());
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, output_dir } => ExperimentConfig::load(&config).and_then(|mut c| {
            if let Some(d) = output_dir {
                c.output_dir = d;
            }
            gkm_cli::run(c).map(|m| report(&m))
        }),
        Command::Rerun { manifest, output_dir } => gkm_cli::rerun(&manifest, output_dir).map(|m| report(&m)),
        Command::Render { input, output } => gkm_cli::render(&input, &output),
        Command::Simulate(a) => experiment(a, Experiment::Simulate),
        Command::SampleGraph(a) => experiment(a, Experiment::SampleGraph),
        Command::MeanfieldParticles(a) => experiment(a, Experiment::MeanfieldParticles),
        Command::MeanfieldFv(a) => experiment(a, Experiment::MeanfieldFv),
        Command::Picard(a) => experiment(a, Experiment::Picard),
        Command::ConvergenceMain(a) => experiment(a, Experiment::ConvergenceMain),
        Command::ConvergenceAve(a) => experiment(a, Experiment::ConvergenceAve),
        Command::StabilityKernel(a) => experiment(a, Experiment::StabilityKernel),
        Command::StabilityInitial(a) => experiment(a, Experiment::StabilityInitial),
        Command::Distance(a) => experiment(a, Experiment::Distance),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn experiment(args: Common, exp: Experiment) -> gkm_cli::Result<()> {
    let config = args.into_config(exp)?;
    gkm_cli::run(config).map(|m| report(&m))
}
