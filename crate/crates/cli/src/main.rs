//! Batch command-line front end for elastic shape analysis of closed planar
//! contours: distances, geodesics, means and PCA, clustering, permutation
//! tests, enrichment, simulation and leave-one-out reconstruction.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eshape::registration::DistanceMode;
use eshape::AnalysisConfig;

mod commands;

/// Exit code for malformed input (manifests, files, covariates).
const EXIT_INPUT: u8 = 2;
/// Exit code for numerical non-convergence.
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "eshape",
    about = "Elastic shape analysis of closed planar contours",
    version
)]
struct Cli {
    /// JSON config file; missing fields fall back to built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// RNG seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Elastic,
    Nonelastic,
}

impl From<ModeArg> for DistanceMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Elastic => DistanceMode::Elastic,
            ModeArg::Nonelastic => DistanceMode::Nonelastic,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Pairwise distance matrix over an ensemble of contours.
    Distance {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "elastic")]
        mode: ModeArg,
    },
    /// Elastic and nonelastic geodesic paths between two shapes.
    Geodesic {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        id1: String,
        #[arg(long)]
        id2: String,
    },
    /// Karcher mean, shape PCA and principal-coefficient export.
    MeanPca {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Complete-linkage clustering with MDS plot and cluster-wise PCA.
    Cluster {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "elastic")]
        mode: ModeArg,
        /// Number of clusters (overrides the config).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Permutation two-sample tests on mean shapes across survival cutoffs.
    Permtest {
        #[arg(long)]
        manifest: PathBuf,
        /// Numeric covariate to dichotomize.
        #[arg(long)]
        label_covariate: String,
        /// Comma-separated cutoffs; each produces one test.
        #[arg(long, value_delimiter = ',')]
        cutoffs: Vec<f64>,
    },
    /// Bayesian cluster enrichment of dichotomous covariates.
    Enrich {
        #[arg(long)]
        manifest: PathBuf,
        /// Cluster labels CSV produced by the cluster command.
        #[arg(long)]
        labels: PathBuf,
    },
    /// Draw random shapes from a fitted sPCA model.
    Simulate {
        /// sPCA model JSON produced by the mean-pca command.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        count: usize,
    },
    /// Leave-one-out reconstruction error report with overlay figures.
    Loo {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn load_config(cli: &Cli) -> eshape::Result<AnalysisConfig> {
    let mut config = match &cli.config {
        Some(path) => AnalysisConfig::load(path)?,
        None => AnalysisConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.rng_seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let result = match &cli.command {
        Command::Distance { manifest, mode } => {
            commands::distance(manifest, (*mode).into(), &config)
        }
        Command::Geodesic { manifest, id1, id2 } => {
            commands::geodesic(manifest, id1, id2, &config)
        }
        Command::MeanPca { manifest } => commands::mean_pca(manifest, &config),
        Command::Cluster { manifest, mode, k } => {
            commands::cluster(manifest, (*mode).into(), *k, &config)
        }
        Command::Permtest {
            manifest,
            label_covariate,
            cutoffs,
        } => commands::permtest(manifest, label_covariate, cutoffs, &config),
        Command::Enrich { manifest, labels } => commands::enrich(manifest, labels, &config),
        Command::Simulate { model, count } => commands::simulate(model, *count, &config),
        Command::Loo { manifest } => commands::loo(manifest, &config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::from(EXIT_NUMERICAL)
            }
        }
    }
}
