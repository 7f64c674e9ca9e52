//! `contagion`: default-cascade simulations and experiments from the command line.

mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "contagion", version, about = "Default cascades on weighted directed financial networks")]
pub struct Cli {
    /// Master seed; overrides the seed in --config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON experiment configuration, merged over the command's defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file for single results, output directory for experiments.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a random financial network.
    Generate(GenerateArgs),
    /// Run the default cascade on a network file.
    Cascade {
        #[arg(long)]
        network: PathBuf,
    },
    /// Smallest fixed point and derived quantities of a limit model.
    FixedPoint {
        #[arg(long)]
        model: PathBuf,
        /// Seed fraction for the amplification ratio.
        #[arg(long, default_value_t = 0.001)]
        epsilon: f64,
    },
    /// Resilience of a limit model or of a network's empirical measures.
    Resilience(ResilienceArgs),
    /// Fluid-limit counters and default functions on a time grid.
    Ode {
        #[arg(long)]
        model: PathBuf,
        /// Number of grid points in [0, λ).
        #[arg(long, default_value_t = 100)]
        tau_grid: usize,
    },
    /// Largest strongly connected component of the contagious skeleton.
    SkeletonScc {
        /// Analyse this network; otherwise run trials from the configured generator.
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Amplification ratio against the minimal capital ratio.
    AmplificationSweep,
    /// Defaults caused by single nodes against their in-degree.
    IndegreeImpact,
    /// Amplification sweeps on scale-free and Erdős-Rényi topologies.
    TopologyCompare,
    /// Finite-size convergence of default fractions and chain counters.
    ConvergenceStudy,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Blanchard,
    Er,
    Classes,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = Model::Blanchard)]
    pub model: Model,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Out-degree tail exponent.
    #[arg(long, default_value_t = 2.19)]
    pub gamma_plus: f64,
    /// Attachment exponent; the in-degree tail is gamma_plus / alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// In-degree tail exponent (ignored when --alpha is given).
    #[arg(long, default_value_t = 1.98)]
    pub gamma_minus: f64,
    /// Mean degree of the Erdős-Rényi model.
    #[arg(long, default_value_t = 3.0)]
    pub mean_degree: f64,
    /// Degree classes `j:k:mass`, comma separated.
    #[arg(long, default_value = "3:3:1")]
    pub classes: String,
    /// Pareto tail of the exposures; 0 gives equal unit exposures.
    #[arg(long, default_value_t = 2.61)]
    pub exposure_tail: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gamma_min: f64,
    #[arg(long, default_value_t = 0.0)]
    pub recovery: f64,
    /// Keep parallel edges instead of merging them.
    #[arg(long)]
    pub keep_parallel: bool,
    /// Also write nodes.csv and edges.csv into this directory.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct ResilienceArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub network: Option<PathBuf>,
}

fn fail(kind: &str, message: &str) -> ExitCode {
    let body = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{body}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail("invalid_arguments", &e.to_string());
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            return fail("invalid_arguments", &e.to_string());
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}

